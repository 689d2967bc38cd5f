use crate::{Error, Result};

/// Compares analytic gradients with central differences.
///
/// Returns `max_i |fd_i - analytic_i| / max(1, |fd_i|, |analytic_i|)`.
/// `f` must be deterministic; it is evaluated at `params ± h e_i`.
pub fn finite_diff_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::LengthMismatch { left: params.len(), right: analytic.len() });
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!("step h must be positive, got {h}")));
    }
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        probe[i] = params[i] + h;
        let up = f(&probe);
        probe[i] = params[i] - h;
        let down = f(&probe);
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {i}")));
        }
        let fd = (up - down) / (2.0 * h);
        let a = analytic[i];
        let err = (fd - a).abs() / 1f64.max(fd.abs()).max(a.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
