//! Sample cross-correlation functions for diagnostic output.

use nalgebra::DMatrix;

/// Sample cross-covariance `c_ij(h) = (1/T) Σ_t (x_{i,t+h} - x̄_i)(x_{j,t} - x̄_j)`.
fn cross_cov(x: &DMatrix<f64>, i: usize, j: usize, lag: i64) -> f64 {
    let t = x.nrows();
    let mean_i = x.column(i).mean();
    let mean_j = x.column(j).mean();
    let h = lag.unsigned_abs() as usize;
    let mut sum = 0.0;
    for s in 0..t - h {
        let (ti, tj) = if lag >= 0 { (s + h, s) } else { (s, s + h) };
        sum += (x[(ti, i)] - mean_i) * (x[(tj, j)] - mean_j);
    }
    sum / t as f64
}

/// Sample cross-correlation `r_ij(h) = c_ij(h) / sqrt(c_ii(0) c_jj(0))`.
///
/// Satisfies `r_ij(h) = r_ji(-h)` exactly, and `r_ii(0) = 1` whenever the
/// series has positive variance.
pub fn cross_corr(x: &DMatrix<f64>, i: usize, j: usize, lag: i64) -> f64 {
    let scale = (cross_cov(x, i, i, 0) * cross_cov(x, j, j, 0)).sqrt();
    cross_cov(x, i, j, lag) / scale
}
