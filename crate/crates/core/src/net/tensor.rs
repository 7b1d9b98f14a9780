use super::NetError;
use crate::raster::Raster;

/// Dense row-major `f32` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NetError> {
        if shape.is_empty() {
            return Err(NetError::Contract("tensor rank must be >= 1".into()));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(NetError::Contract(format!(
                "tensor shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(!shape.is_empty(), "tensor rank must be >= 1");
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    /// `1 x H x W` view of a raster.
    pub fn from_raster(raster: &Raster) -> Self {
        Self {
            shape: vec![1, raster.height(), raster.width()],
            data: raster.data().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, NetError> {
        Self::new(shape, self.data)
    }

    /// Values of the `i`-th slice along the leading axis.
    pub fn outer(&self, i: usize) -> &[f32] {
        let n = self.data.len() / self.shape[0];
        &self.data[i * n..(i + 1) * n]
    }
}
