use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `point`.
///
/// The oracle every analytic gradient in the crate is checked against.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        x[k] = point[k] + eps;
        let plus = f(&x);
        x[k] = point[k] - eps;
        let minus = f(&x);
        x[k] = point[k];
        for value in [plus, minus] {
            if !value.is_finite() {
                return Err(Error::OracleFailure {
                    coordinate: k,
                    value,
                });
            }
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// Relative error of one gradient coordinate, `|a - n| / max(|a|, |n|, 1)`.
///
/// The unit floor turns the measure into an absolute one for coordinates whose
/// gradient is below one in magnitude, where central differences can only be
/// trusted to an absolute tolerance.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}
