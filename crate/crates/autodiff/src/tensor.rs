//! Dense row-major f64 tensor with up to four axes.

use crate::AdError;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor, AdError> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(AdError::BadArg(format!("rank {} unsupported", shape.len())));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AdError::ShapeMismatch {
                op: "Tensor::new",
                lhs: shape.to_vec(),
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; numel] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn randn<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Tensor {
        let numel: usize = shape.iter().product();
        // Box-Muller keeps us off rand_distr.
        let mut data = Vec::with_capacity(numel);
        while data.len() < numel {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            data.push(r * c * std);
            if data.len() < numel {
                data.push(r * s * std);
            }
        }
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor, AdError> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Product of trailing axes after `axis` (stride of one step on `axis`).
    pub fn stride_after(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }
}
