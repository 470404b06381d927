//! Finite-difference gradient checking.

use super::matrix::Matrix;
use super::optim::ParamStore;
use super::tape::{NodeId, Tape};
use super::{NumError, Result};

const EPS_MIN: f64 = 1e-6;
const EPS_MAX: f64 = 1e-4;

fn eval_loss<F>(forward: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store)?;
    Ok(tape.value(loss).scalar_value())
}

/// Central-difference gradients of a scalar forward pass with respect to
/// every parameter in `store`. Parameter values are perturbed in place and
/// restored; on success the store is unchanged.
pub fn finite_difference_grads<F>(forward: &F, store: &mut ParamStore, epsilon: f64) -> Result<Vec<Matrix>>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if !(EPS_MIN..=EPS_MAX).contains(&epsilon) {
        return Err(NumError::BadEpsilon(epsilon));
    }
    let ids = store.ids();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let (r, c) = store.get(id).value.shape();
        let mut grad = Matrix::zeros(r, c);
        for i in 0..r * c {
            let orig = store.get(id).value.as_slice()[i];
            store.get_mut(id).value.as_mut_slice()[i] = orig + epsilon;
            let plus = eval_loss(forward, store)?;
            store.get_mut(id).value.as_mut_slice()[i] = orig - epsilon;
            let minus = eval_loss(forward, store)?;
            store.get_mut(id).value.as_mut_slice()[i] = orig;
            grad.as_mut_slice()[i] = (plus - minus) / (2.0 * epsilon);
        }
        out.push(grad);
    }
    Ok(out)
}

/// Compare analytic gradients (via `backward`) against central differences.
///
/// Returns the maximum relative error `|a - n| / max(1, |a|, |n|)` over every
/// parameter coordinate. The forward pass must be deterministic: it is
/// evaluated twice up front and a bitwise difference in the loss is an error.
pub fn check_gradients<F>(forward: F, store: &mut ParamStore, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if !(EPS_MIN..=EPS_MAX).contains(&epsilon) {
        return Err(NumError::BadEpsilon(epsilon));
    }
    let first = eval_loss(&forward, store)?;
    let second = eval_loss(&forward, store)?;
    if first.to_bits() != second.to_bits() {
        return Err(NumError::NonDeterministicForward { a: first, b: second });
    }

    store.zero_grads();
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Matrix> = store.ids().iter().map(|&id| store.get(id).grad.clone()).collect();

    let numeric = finite_difference_grads(&forward, store, epsilon)?;

    let mut max_rel = 0.0_f64;
    for (a, n) in analytic.iter().zip(&numeric) {
        for (&av, &nv) in a.as_slice().iter().zip(n.as_slice()) {
            let rel = (av - nv).abs() / 1.0_f64.max(av.abs()).max(nv.abs());
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn quadratic_matches_analytic() {
        // [DERIVED] loss = w^2 at w = 3 -> dloss/dw = 6.
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::scalar(3.0)).unwrap();
        let forward = |tape: &mut Tape, store: &ParamStore| {
            let wn = tape.param(store, w);
            let sq = tape.matmul(wn, wn)?;
            Ok(tape.sum(sq))
        };
        let err = check_gradients(forward, &mut store, 1e-5).unwrap();
        assert!(err < 1e-8, "rel err {err}");
        assert!((store.get(w).grad.scalar_value() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unused_param_grad_is_zero() {
        // [TRIVIAL] a parameter never placed on the tape gets zero gradient.
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::scalar(2.0)).unwrap();
        let dead = store.add("dead", Matrix::scalar(5.0)).unwrap();
        let forward = |tape: &mut Tape, store: &ParamStore| {
            let wn = tape.param(store, w);
            Ok(tape.sum(wn))
        };
        let err = check_gradients(forward, &mut store, 1e-5).unwrap();
        assert!(err < 1e-10);
        assert_eq!(store.get(dead).grad.scalar_value(), 0.0);
    }

    #[test]
    fn epsilon_out_of_range_rejected() {
        let mut store = ParamStore::new();
        store.add("w", Matrix::scalar(1.0)).unwrap();
        let forward = |tape: &mut Tape, _store: &ParamStore| Ok(tape.input(Matrix::scalar(0.0)));
        assert!(matches!(
            check_gradients(forward, &mut store, 1e-3),
            Err(NumError::BadEpsilon(_))
        ));
        let forward = |tape: &mut Tape, _store: &ParamStore| Ok(tape.input(Matrix::scalar(0.0)));
        assert!(matches!(
            check_gradients(forward, &mut store, 1e-7),
            Err(NumError::BadEpsilon(_))
        ));
    }

    #[test]
    fn nondeterministic_forward_detected() {
        let mut store = ParamStore::new();
        store.add("w", Matrix::scalar(1.0)).unwrap();
        let counter = Cell::new(0.0_f64);
        let forward = |tape: &mut Tape, _store: &ParamStore| {
            counter.set(counter.get() + 1.0);
            Ok(tape.input(Matrix::scalar(counter.get())))
        };
        assert!(matches!(
            check_gradients(forward, &mut store, 1e-5),
            Err(NumError::NonDeterministicForward { .. })
        ));
    }
}
