//! Learnable parameters and SGD with momentum and weight decay.

use std::collections::BTreeMap;

use super::matrix::Matrix;
use super::{NumError, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// A named learnable tensor with its gradient and momentum buffer.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub momentum: Matrix,
}

/// Owns all model parameters. The autodiff tape references parameters by id
/// and `backward` accumulates into their `grad` buffers.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NumError::DuplicateParam(name));
        }
        let (r, c) = value.shape();
        let idx = self.params.len();
        self.by_name.insert(name.clone(), idx);
        self.params.push(Param {
            name,
            value,
            grad: Matrix::zeros(r, c),
            momentum: Matrix::zeros(r, c),
        });
        Ok(ParamId(idx))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> Vec<ParamId> {
        (0..self.params.len()).map(ParamId).collect()
    }

    /// Parameters in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub(crate) fn value_by_index(&self, idx: usize) -> &Matrix {
        &self.params[idx].value
    }

    pub(crate) fn grad_by_index_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.params[idx].grad
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// One SGD step over every parameter:
    ///
    /// g' = grad + weight_decay * value
    /// buf = momentum * buf + g'
    /// value = value - lr * buf
    pub fn sgd_step(&mut self, lr: f64, momentum: f64, weight_decay: f64) {
        let ids = self.ids();
        self.sgd_step_subset(&ids, lr, momentum, weight_decay);
    }

    /// SGD step restricted to `ids`; all other parameters (and their momentum
    /// buffers) are left untouched. Used for classifier-only fine-tuning.
    pub fn sgd_step_subset(&mut self, ids: &[ParamId], lr: f64, momentum: f64, weight_decay: f64) {
        for &ParamId(idx) in ids {
            let p = &mut self.params[idx];
            for i in 0..p.value.len() {
                let g = p.grad.as_slice()[i] + weight_decay * p.value.as_slice()[i];
                let buf = momentum * p.momentum.as_slice()[i] + g;
                p.momentum.as_mut_slice()[i] = buf;
                p.value.as_mut_slice()[i] -= lr * buf;
            }
        }
    }

    pub fn total_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Matrix::scalar(value)).unwrap();
        (s, id)
    }

    #[test]
    fn sgd_without_momentum_or_decay() {
        // [PAPER-style oracle from the update rule] value 1.0, grad 0.5,
        // lr 0.1, no momentum/decay -> 0.95.
        let (mut s, id) = single(1.0);
        s.get_mut(id).grad = Matrix::scalar(0.5);
        s.sgd_step(0.1, 0.0, 0.0);
        assert!((s.get(id).value.scalar_value() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_with_weight_decay() {
        // [DERIVED] g' = 0.5 + 1e-4 * 1.0 = 0.5001; 1.0 - 0.1 * 0.5001 = 0.94999.
        let (mut s, id) = single(1.0);
        s.get_mut(id).grad = Matrix::scalar(0.5);
        s.sgd_step(0.1, 0.0, 1e-4);
        assert!((s.get(id).value.scalar_value() - 0.949_99).abs() < 1e-12);
    }

    #[test]
    fn sgd_momentum_two_steps() {
        // [DERIVED] two steps, grad 1 each, momentum 0.9, lr 0.1, start 0:
        // buf1 = 1, v1 = -0.1; buf2 = 0.9 + 1 = 1.9, v2 = -0.1 - 0.19 = -0.29.
        let (mut s, id) = single(0.0);
        s.get_mut(id).grad = Matrix::scalar(1.0);
        s.sgd_step(0.1, 0.9, 0.0);
        assert!((s.get(id).value.scalar_value() + 0.1).abs() < 1e-15);
        s.zero_grads();
        s.get_mut(id).grad = Matrix::scalar(1.0);
        s.sgd_step(0.1, 0.9, 0.0);
        assert!((s.get(id).value.scalar_value() + 0.29).abs() < 1e-15);
        assert!((s.get(id).momentum.scalar_value() - 1.9).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_matches_vanilla_sgd() {
        // [TRIVIAL] momentum 0, decay 0 reduces to value -= lr * grad.
        let (mut s, id) = single(2.5);
        s.get_mut(id).grad = Matrix::scalar(-3.0);
        s.sgd_step(0.01, 0.0, 0.0);
        assert_eq!(s.get(id).value.scalar_value(), 2.5 - 0.01 * -3.0);
    }

    #[test]
    fn subset_step_leaves_other_params_untouched() {
        let mut s = ParamStore::new();
        let a = s.add("a", Matrix::scalar(1.0)).unwrap();
        let b = s.add("b", Matrix::scalar(1.0)).unwrap();
        s.get_mut(a).grad = Matrix::scalar(1.0);
        s.get_mut(b).grad = Matrix::scalar(1.0);
        s.sgd_step_subset(&[b], 0.1, 0.9, 0.0);
        assert_eq!(s.get(a).value.scalar_value(), 1.0);
        assert_eq!(s.get(a).momentum.scalar_value(), 0.0);
        assert!((s.get(b).value.scalar_value() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Matrix::scalar(0.0)).unwrap();
        assert!(s.add("w", Matrix::scalar(0.0)).is_err());
    }
}
