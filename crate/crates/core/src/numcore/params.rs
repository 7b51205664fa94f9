use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Tensor, TensorError};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Zero tensors shaped like every parameter, for gradient accumulation.
    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.values
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect()
    }

    /// Replaces values by name. Every stored parameter must be present with
    /// the same shape.
    pub fn load_values(&mut self, named: &HashMap<String, Tensor>) -> Result<(), TensorError> {
        for (i, name) in self.names.iter().enumerate() {
            let t = named
                .get(name)
                .ok_or_else(|| TensorError::MissingParam(name.clone()))?;
            if t.shape() != self.values[i].shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "load_values",
                    lhs: self.values[i].shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            self.values[i] = t.clone();
        }
        Ok(())
    }
}

/// Uniform fan-in initialization, `U(-1/√fan_in, 1/√fan_in)`.
pub fn kaiming_uniform<R: Rng>(rng: &mut R, fan_in: usize, shape: &[usize]) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let n = shape.iter().product();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect())
}

pub fn normal_init<R: Rng>(rng: &mut R, std: f64, shape: &[usize]) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect())
}
