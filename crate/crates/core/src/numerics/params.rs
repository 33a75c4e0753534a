use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    frozen: bool,
    /// Running average of squared gradients.
    acc_grad: Tensor,
    /// Running average of squared updates.
    acc_delta: Tensor,
}

/// Named trainable parameters plus their AdaDelta accumulators.
///
/// Iteration order is insertion order, which keeps checkpoints and gradient
/// maps deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Re-inserting an existing name replaces its value
    /// and resets the accumulators.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert_entry(name.into(), value, false)
    }

    /// Registers a parameter that optimizers leave untouched.
    pub fn insert_frozen(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert_entry(name.into(), value, true)
    }

    fn insert_entry(&mut self, name: String, value: Tensor, frozen: bool) -> ParamId {
        let acc_grad = Tensor::zeros(value.shape());
        let acc_delta = Tensor::zeros(value.shape());
        if let Some(&i) = self.index.get(&name) {
            self.entries[i] = Entry { name, value, frozen, acc_grad, acc_delta };
            return ParamId(i);
        }
        let i = self.entries.len();
        self.index.insert(name.clone(), i);
        self.entries.push(Entry { name, value, frozen, acc_grad, acc_delta });
        ParamId(i)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index.get(name).map(|&i| ParamId(i)).ok_or_else(|| Error::invalid(format!("unknown parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.entries[id.0].frozen
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    /// `(E[g^2], E[dx^2])` for a parameter.
    pub fn accumulators(&self, id: ParamId) -> (&Tensor, &Tensor) {
        let e = &self.entries[id.0];
        (&e.acc_grad, &e.acc_delta)
    }

    pub(crate) fn entry_mut(&mut self, id: ParamId) -> (&mut Tensor, &mut Tensor, &mut Tensor) {
        let e = &mut self.entries[id.0];
        (&mut e.value, &mut e.acc_grad, &mut e.acc_delta)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Copies values only (accumulators stay at zero); used to snapshot the
    /// best model during training.
    pub fn values_snapshot(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for e in &self.entries {
            out.insert_entry(e.name.clone(), e.value.clone(), e.frozen);
        }
        out
    }
}

/// Gradients aligned with a [`ParamStore`]'s parameters.
#[derive(Debug, Clone)]
pub struct Grads {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            names: store.entries.iter().map(|e| e.name.clone()).collect(),
            values: store.entries.iter().map(|e| Tensor::zeros(e.value.shape())).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn by_id(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub(crate) fn by_id_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.values {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &Grads) -> Result<()> {
        if other.values.len() != self.values.len() {
            return Err(Error::shape("gradient maps cover different parameters"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            if a.shape() != b.shape() {
                return Err(Error::shape("gradient shapes differ"));
            }
            a.add_assign(b);
        }
        Ok(())
    }
}
