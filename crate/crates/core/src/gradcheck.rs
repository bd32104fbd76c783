//! Central finite-difference comparison against analytic gradients.

pub const EPSILON: f64 = 1e-5;

/// Relative error with a small absolute floor so that parameters whose
/// true gradient is ~0 do not amplify round-off.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Max relative error between `analytic` and central differences of
/// `loss` around `params`.
pub fn max_relative_error(
    params: &[f64],
    analytic: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + EPSILON;
        let up = loss(&p);
        p[i] = orig - EPSILON;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * EPSILON);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
