use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::contract(format!(
                "tensor of shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Shape-only copy used when the values live elsewhere (checkpoint headers).
    pub(crate) fn hollow(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: Vec::new(),
        }
    }

    pub(crate) fn reshape_for_growth(&mut self, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.shape = shape;
        self.data = data;
    }
}

/// Anything that owns an ordered list of trainable tensors.
///
/// The order returned by [`tensors`](Parameters::tensors) and
/// [`tensors_mut`](Parameters::tensors_mut) must agree; optimizers and the
/// checkpoint format both rely on it.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Tensor>;

    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn tensor_name(&self, index: usize) -> String {
        format!("tensor[{index}]")
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn tensors(&self) -> Vec<&Tensor> {
        self.iter().flat_map(|p| p.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.iter_mut().flat_map(|p| p.tensors_mut()).collect()
    }

    fn tensor_name(&self, index: usize) -> String {
        let mut offset = 0;
        for (i, p) in self.iter().enumerate() {
            let n = p.tensors().len();
            if index < offset + n {
                return format!("[{i}].{}", p.tensor_name(index - offset));
            }
            offset += n;
        }
        format!("tensor[{index}]")
    }
}
