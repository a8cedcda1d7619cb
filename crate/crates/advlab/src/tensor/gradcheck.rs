//! Central-finite-difference gradient oracle.
//!
//! Independent of the tape: it only ever calls the supplied loss closure, so
//! it can verify `backward` without sharing any code path with it.

use super::{Scalar, Tensor};
use crate::error::Result;

/// Central differences `(L(x + h e_i) - L(x - h e_i)) / 2h` per coordinate.
///
/// `loss_fn` must be deterministic; `h` must be positive.
pub fn finite_diff_grad<T, F>(loss_fn: F, x: &Tensor<T>, h: T) -> Result<Tensor<T>>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<T>,
{
    assert!(h > T::zero(), "finite_diff_grad requires h > 0");
    let two_h = h + h;
    let mut probe = x.clone();
    let mut grad = vec![T::zero(); x.numel()];
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = loss_fn(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = loss_fn(&probe)?;
        probe.data_mut()[i] = orig;
        grad[i] = (up - down) / two_h;
    }
    Tensor::from_vec(x.shape().to_vec(), grad)
}

/// Relative error with the guarded denominator `max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Max over elements of [`rel_err`] between two same-shape gradients.
pub fn max_rel_err<T: Scalar>(analytic: &Tensor<T>, numeric: &Tensor<T>, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| rel_err(a.as_f64(), n.as_f64(), floor))
        .fold(0.0, f64::max)
}
