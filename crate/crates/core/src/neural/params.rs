use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Named parameter tensors in a fixed declaration order. Vectors are stored
/// as `1 x n` matrices so every tensor has the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
}

impl ParamStore {
    pub(crate) fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub(crate) fn add(&mut self, name: String, value: Array2<f64>) -> usize {
        self.names.push(name);
        self.tensors.push(value);
        self.tensors.len() - 1
    }

    pub(crate) fn normal<R: Rng>(&mut self, name: String, shape: (usize, usize), std: f64, rng: &mut R) -> usize {
        let dist = Normal::new(0.0, std).expect("finite std");
        let value = Array2::from_shape_fn(shape, |_| dist.sample(rng));
        self.add(name, value)
    }

    pub(crate) fn filled(&mut self, name: String, shape: (usize, usize), v: f64) -> usize {
        self.add(name, Array2::from_elem(shape, v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Array2<f64> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.tensors[i]
    }

    pub fn tensors(&self) -> &[Array2<f64>] {
        &self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn zeros_like(&self) -> Grads {
        Grads(self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect())
    }
}

/// Gradient buffers parallel to a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads(pub Vec<Array2<f64>>);

impl Grads {
    pub fn get(&self, i: usize) -> &Array2<f64> {
        &self.0[i]
    }

    pub(crate) fn acc(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.0[i]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.0 {
            *a *= k;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
