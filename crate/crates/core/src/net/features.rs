use super::engine::forward_batch;
use super::{NetError, NetworkSpec, NetworkState};
use crate::raster::Raster;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Activations of one layer for one sketch, flattened channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub network_id: String,
    pub layer: String,
    pub sketch_id: String,
    pub values: Vec<f32>,
}

/// Area-resize a raster to the network input and copy it into every channel.
pub fn raster_to_input(raster: &Raster, input_shape: [usize; 3]) -> Vec<f32> {
    let [c, h, w] = input_shape;
    let resized = if raster.height() == h && raster.width() == w {
        raster.clone()
    } else {
        raster.resize(h, w)
    };
    let mut out = Vec::with_capacity(c * h * w);
    for _ in 0..c {
        out.extend_from_slice(resized.data());
    }
    out
}

/// A trained network plus the layer to read features from.
#[derive(Debug, Clone, Copy)]
pub struct FeatureTap<'a> {
    spec: &'a NetworkSpec,
    state: &'a NetworkState,
    layer: usize,
}

impl<'a> FeatureTap<'a> {
    pub fn new(spec: &'a NetworkSpec, state: &'a NetworkState, layer: &str) -> Result<Self, NetError> {
        let layer = spec.index_of(layer)?;
        state.validate(spec)?;
        Ok(Self { spec, state, layer })
    }

    pub fn dim(&self) -> usize {
        self.spec.output_len(self.layer)
    }

    pub fn layer_name(&self) -> &str {
        &self.spec.layer(self.layer).name
    }

    /// Features for each raster, in input order. Chunks run in parallel but
    /// every sample is computed independently, so results do not depend on
    /// the thread count.
    pub fn extract(&self, rasters: &[&Raster]) -> Vec<Vec<f32>> {
        const CHUNK: usize = 64;
        let shape = self.spec.input_shape();
        let dim = self.dim();
        rasters
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let data: Vec<f32> = chunk.iter().flat_map(|r| raster_to_input(r, shape)).collect();
                let acts = forward_batch(self.spec, self.state, &data, chunk.len(), self.layer);
                let out = acts.output(self.layer).data();
                out.chunks_exact(dim).map(<[f32]>::to_vec).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Tap `layer` for a single sketch.
pub fn tap_features(
    spec: &NetworkSpec,
    state: &NetworkState,
    raster: &Raster,
    layer: &str,
    network_id: &str,
    sketch_id: &str,
) -> Result<FeatureVector, NetError> {
    let tap = FeatureTap::new(spec, state, layer)?;
    let values = tap.extract(&[raster]).pop().expect("one input");
    Ok(FeatureVector {
        network_id: network_id.to_string(),
        layer: tap.layer_name().to_string(),
        sketch_id: sketch_id.to_string(),
        values,
    })
}
