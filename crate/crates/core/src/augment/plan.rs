use super::{AugmentError, Axis, Transform};
use std::path::Path;

/// Name of the 30-variant preset.
pub const PAPER30: &str = "paper30";

/// An ordered, duplicate-free list of transforms; each yields one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    name: String,
    transforms: Vec<Transform>,
}

impl AugmentationPlan {
    pub fn new(name: impl Into<String>, transforms: Vec<Transform>) -> Result<Self, AugmentError> {
        if transforms.is_empty() {
            return Err(AugmentError::InvalidPlan("no transforms".into()));
        }
        for (i, t) in transforms.iter().enumerate() {
            t.validate()?;
            if let Some(j) = transforms[..i].iter().position(|u| u == t) {
                return Err(AugmentError::InvalidPlan(format!(
                    "transform {i} duplicates transform {j} ({})",
                    t.label()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            transforms,
        })
    }

    /// Parse a JSON array of `{kind, params}` records.
    pub fn from_json(name: impl Into<String>, json: &str) -> Result<Self, AugmentError> {
        let transforms: Vec<Transform> = serde_json::from_str(json)
            .map_err(|e| AugmentError::InvalidPlan(format!("bad plan JSON: {e}")))?;
        Self::new(name, transforms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.transforms).expect("transforms serialize")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }
}

/// The 30-transform preset:
///
/// * mirror across the vertical axis (1)
/// * rotations by -15, -5, +5, +15 degrees (4)
/// * central zooms by -7, -3, +3, +7 percent (4)
/// * every shift `(dx, dy)` with `dx, dy` in {-15, -5, +5, +15} pixels (16)
/// * mirror followed by each of the four rotations (4)
/// * mirror across the horizontal axis (1)
pub fn preset_paper30() -> AugmentationPlan {
    const ANGLES: [f64; 4] = [-15.0, -5.0, 5.0, 15.0];
    const ZOOMS: [f64; 4] = [-7.0, -3.0, 3.0, 7.0];
    const SHIFTS: [i32; 4] = [-15, -5, 5, 15];
    let mirror = Transform::Mirror {
        axis: Axis::Vertical,
    };

    let mut t = vec![mirror.clone()];
    t.extend(ANGLES.iter().map(|&angle| Transform::Rotate { angle }));
    t.extend(ZOOMS.iter().map(|&percent| Transform::Zoom { percent }));
    for &dy in &SHIFTS {
        for &dx in &SHIFTS {
            t.push(Transform::Shift { dx, dy });
        }
    }
    t.extend(ANGLES.iter().map(|&angle| Transform::Compose {
        transforms: vec![mirror.clone(), Transform::Rotate { angle }],
    }));
    t.push(Transform::Mirror {
        axis: Axis::Horizontal,
    });
    AugmentationPlan::new(PAPER30, t).expect("preset is valid")
}

/// A preset name, or a path to a JSON plan file (named after its stem).
pub fn resolve_plan(name_or_path: &str) -> Result<AugmentationPlan, AugmentError> {
    if name_or_path == PAPER30 {
        return Ok(preset_paper30());
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| AugmentError::PlanFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name_or_path.to_string());
    AugmentationPlan::from_json(name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper30_has_thirty_distinct_transforms() {
        let plan = preset_paper30();
        assert_eq!(plan.len(), 30);
        let labels: std::collections::BTreeSet<String> =
            plan.transforms().iter().map(Transform::label).collect();
        assert_eq!(labels.len(), 30);
    }

    #[test]
    fn paper30_contains_listed_rotations_and_zooms() {
        let plan = preset_paper30();
        for angle in [5.0, -5.0, 15.0, -15.0] {
            assert!(plan.transforms().contains(&Transform::Rotate { angle }));
        }
        for percent in [3.0, -3.0, 7.0, -7.0] {
            assert!(plan.transforms().contains(&Transform::Zoom { percent }));
        }
        assert!(plan.transforms().contains(&Transform::Mirror {
            axis: Axis::Vertical
        }));
    }

    #[test]
    fn duplicates_and_empty_plans_are_rejected() {
        let t = Transform::Shift { dx: 1, dy: 1 };
        assert!(AugmentationPlan::new("dup", vec![t.clone(), t]).is_err());
        assert!(AugmentationPlan::new("empty", vec![]).is_err());
    }

    #[test]
    fn json_round_trip_and_file_resolution() {
        let plan = preset_paper30();
        let again = AugmentationPlan::from_json(PAPER30, &plan.to_json()).unwrap();
        assert_eq!(again, plan);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flips.json");
        std::fs::write(
            &path,
            r#"[{"kind":"mirror","params":{"axis":"vertical"}},{"kind":"shift","params":{"dx":3,"dy":-2}}]"#,
        )
        .unwrap();
        let loaded = resolve_plan(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded.name(), "flips");
        assert_eq!(loaded.len(), 2);
        assert!(resolve_plan("no-such-plan").is_err());
    }
}
