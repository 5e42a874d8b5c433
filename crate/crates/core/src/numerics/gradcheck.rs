//! Finite-difference helpers for checking hand-written backward passes.

use super::tensor::Tensor;

/// Step used for central differences.
pub const STEP: f64 = 1e-5;

/// Central difference of `f` with respect to element `index` of `x`.
pub fn central_difference(x: &Tensor, index: usize, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    let mut probe = x.clone();
    let orig = probe.data()[index];
    probe.data_mut()[index] = orig + STEP;
    let up = f(&probe);
    probe.data_mut()[index] = orig - STEP;
    let down = f(&probe);
    (up - down) / (2.0 * STEP)
}

/// `|a - b| / max(|a|, |b|, 1e-3)`; the floor keeps near-zero gradients from
/// turning round-off into huge relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / denom
}
