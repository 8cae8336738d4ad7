use crate::{Error, Result};

/// Dense `(B, C, Z, Y, X)` activation tensor in C order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor5 {
    shape: [usize; 5],
    data: Vec<f32>,
}

impl Tensor5 {
    pub fn new(shape: [usize; 5], data: Vec<f32>) -> Result<Self> {
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::ShapeMismatch(format!("shape {shape:?} overflows")))?;
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor5 { shape, data })
    }

    pub fn zeros(shape: [usize; 5]) -> Self {
        Tensor5 {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.shape[2], self.shape[3], self.shape[4]]
    }

    /// Voxels per channel.
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3] * self.shape[4]
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

    #[inline]
    pub fn offset(&self, b: usize, c: usize, z: usize, y: usize, x: usize) -> usize {
        let [_, nc, nz, ny, nx] = self.shape;
        (((b * nc + c) * nz + z) * ny + y) * nx + x
    }

    pub fn get(&self, b: usize, c: usize, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(b, c, z, y, x)]
    }

    /// All channels of batch item `b`.
    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.shape[1] * self.plane_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Concatenates along the channel axis.
pub fn concat_channels(parts: &[&Tensor5]) -> Result<Tensor5> {
    let first = parts
        .first()
        .ok_or(Error::EmptyInput("no tensors to concatenate"))?;
    let (b, spatial) = (first.batch(), first.spatial());
    if let Some(bad) = parts
        .iter()
        .find(|t| t.batch() != b || t.spatial() != spatial)
    {
        return Err(Error::ShapeMismatch(format!(
            "cannot concatenate {:?} with {:?}",
            first.shape(),
            bad.shape()
        )));
    }
    let channels: usize = parts.iter().map(|t| t.channels()).sum();
    let mut data = Vec::with_capacity(b * channels * first.plane_len());
    for i in 0..b {
        for t in parts {
            data.extend_from_slice(t.item(i));
        }
    }
    Tensor5::new([b, channels, spatial[0], spatial[1], spatial[2]], data)
}
