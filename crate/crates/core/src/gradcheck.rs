//! Finite-difference utilities for verifying analytic gradients.
//!
//! The central-difference quotient `(f(x+h) - f(x-h)) / 2h` is an oracle that
//! knows nothing about the tape: callers pass a closure that rebuilds the
//! forward pass from raw values, so agreement between the two is meaningful.

/// Central-difference gradient of a scalar function at `x`.
pub fn central_diff_grad<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Largest relative deviation between two gradient vectors.
///
/// Each pair is compared as `|a - b| / max(floor, |a|, |b|)`; the floor keeps
/// near-zero entries from exploding the ratio.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / floor.max(x.abs()).max(y.abs()))
        .fold(0.0, f64::max)
}
