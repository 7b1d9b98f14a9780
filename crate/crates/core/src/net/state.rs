use super::{NetError, NetworkSpec, Tensor};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Trained parameters keyed by layer name.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    params: BTreeMap<String, LayerParams>,
    pub iteration: u64,
}

impl NetworkState {
    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (i, layer) in spec.parametric_layers() {
            let (wshape, bshape) = spec.param_shapes(i).expect("parametric layer");
            let receptive: usize = wshape[2..].iter().product();
            let fan_in = wshape[1] * receptive;
            let fan_out = wshape[0] * receptive;
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
            let dist = Uniform::new_inclusive(-bound, bound);
            let weight = Tensor::from_fn(&wshape, |_| dist.sample(&mut rng));
            params.insert(
                layer.name.clone(),
                LayerParams {
                    weight,
                    bias: Tensor::zeros(&bshape),
                },
            );
        }
        Self {
            params,
            iteration: 0,
        }
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        let params = spec
            .parametric_layers()
            .map(|(i, layer)| {
                let (w, b) = spec.param_shapes(i).expect("parametric layer");
                (
                    layer.name.clone(),
                    LayerParams {
                        weight: Tensor::zeros(&w),
                        bias: Tensor::zeros(&b),
                    },
                )
            })
            .collect();
        Self {
            params,
            iteration: 0,
        }
    }

    /// Build from explicit parameters, checking them against `spec`.
    pub fn from_params(spec: &NetworkSpec, params: BTreeMap<String, LayerParams>) -> Result<Self, NetError> {
        let state = Self {
            params,
            iteration: 0,
        };
        state.validate(spec)?;
        Ok(state)
    }

    /// Every parametric layer has parameters of the right shape, and nothing else.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), NetError> {
        let mut expected = 0;
        for (i, layer) in spec.parametric_layers() {
            expected += 1;
            let (w, b) = spec.param_shapes(i).expect("parametric layer");
            let p = self.params.get(&layer.name).ok_or_else(|| NetError::LayerMismatch {
                layer: layer.name.clone(),
                detail: "no parameters".into(),
            })?;
            if p.weight.shape() != w.as_slice() || p.bias.shape() != b.as_slice() {
                return Err(NetError::LayerMismatch {
                    layer: layer.name.clone(),
                    detail: format!(
                        "parameters {:?}/{:?}, network expects {w:?}/{b:?}",
                        p.weight.shape(),
                        p.bias.shape()
                    ),
                });
            }
        }
        if self.params.len() != expected {
            let extra = self
                .params
                .keys()
                .find(|k| spec.index_of(k).is_err())
                .cloned()
                .unwrap_or_default();
            return Err(NetError::LayerMismatch {
                layer: extra,
                detail: "parameters for a layer the network does not have".into(),
            });
        }
        Ok(())
    }

    pub fn get(&self, layer: &str) -> Option<&LayerParams> {
        self.params.get(layer)
    }

    pub fn get_mut(&mut self, layer: &str) -> Option<&mut LayerParams> {
        self.params.get_mut(layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerParams)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn expect(&self, layer: &str) -> &LayerParams {
        &self.params[layer]
    }
}

const MAGIC: &[u8; 4] = b"SKNW";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    put_u32(out, t.rank() as u32);
    for &e in t.shape() {
        put_u32(out, e as u32);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize in layer order: magic `SKNW`, version, layer count, then per
/// layer the name and the weight and bias tensors (rank, extents, `f32` LE).
pub fn encode_state(spec: &NetworkSpec, state: &NetworkState) -> Result<Vec<u8>, NetError> {
    state.validate(spec)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    let layers: Vec<_> = spec.parametric_layers().collect();
    put_u32(&mut out, layers.len() as u32);
    for (_, layer) in layers {
        let p = state.expect(&layer.name);
        put_u32(&mut out, layer.name.len() as u32);
        out.extend_from_slice(layer.name.as_bytes());
        put_tensor(&mut out, &p.weight);
        put_tensor(&mut out, &p.bias);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            NetError::Format(format!("truncated weight file while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NetError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tensor(&mut self, what: &str) -> Result<Tensor, NetError> {
        let rank = self.u32(what)? as usize;
        if rank == 0 || rank > 8 {
            return Err(NetError::Format(format!("{what}: implausible rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| self.u32(what).map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| NetError::Format(format!("{what}: tensor too large")))?;
        let raw = self.take(len, what)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::new(shape, data)
    }
}

/// Parse a weight file without reference to a network: `(name, weight, bias)`
/// in file order.
pub fn read_weight_records(bytes: &[u8]) -> Result<Vec<(String, LayerParams)>, NetError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(NetError::Format("not a weight file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(NetError::Format(format!("unsupported weight file version {version}")));
    }
    let count = r.u32("layer count")?;
    let mut records = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = String::from_utf8(r.take(len, "layer name")?.to_vec())
            .map_err(|_| NetError::Format("layer name is not UTF-8".into()))?;
        let weight = r.tensor(&format!("{name} weight"))?;
        let bias = r.tensor(&format!("{name} bias"))?;
        records.push((name, LayerParams { weight, bias }));
    }
    if r.pos != bytes.len() {
        return Err(NetError::Format(format!(
            "{} trailing bytes after last layer",
            bytes.len() - r.pos
        )));
    }
    Ok(records)
}

/// Decode a weight file for `spec`; the whole file is validated before any
/// state is returned.
pub fn decode_state(spec: &NetworkSpec, bytes: &[u8]) -> Result<NetworkState, NetError> {
    let records = read_weight_records(bytes)?;
    let expected: Vec<_> = spec.parametric_layers().collect();
    for ((i, layer), (name, p)) in expected.iter().zip(&records) {
        let (w, b) = spec.param_shapes(*i).expect("parametric layer");
        if &layer.name != name {
            return Err(NetError::LayerMismatch {
                layer: layer.name.clone(),
                detail: format!("file has layer `{name}` in its place"),
            });
        }
        if p.weight.shape() != w.as_slice() || p.bias.shape() != b.as_slice() {
            return Err(NetError::LayerMismatch {
                layer: name.clone(),
                detail: format!(
                    "file has {:?}/{:?}, network expects {w:?}/{b:?}",
                    p.weight.shape(),
                    p.bias.shape()
                ),
            });
        }
    }
    if records.len() != expected.len() {
        let layer = match expected.get(records.len()) {
            Some((_, l)) => l.name.clone(),
            None => records[expected.len()].0.clone(),
        };
        return Err(NetError::LayerMismatch {
            layer,
            detail: format!(
                "file has {} parametric layers, network has {}",
                records.len(),
                expected.len()
            ),
        });
    }
    NetworkState::from_params(spec, records.into_iter().collect())
}

pub fn save_state(spec: &NetworkSpec, state: &NetworkState, path: &Path) -> Result<(), NetError> {
    let bytes = encode_state(spec, state)?;
    crate::fsutil::write_atomic(path, &bytes).map_err(NetError::Io)
}

pub fn load_state(spec: &NetworkSpec, path: &Path) -> Result<NetworkState, NetError> {
    let bytes = std::fs::read(path).map_err(NetError::Io)?;
    decode_state(spec, &bytes)
}
