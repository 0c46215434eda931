//! Shrinkage-to-target covariance baselines.
//!
//! Two classic estimators used as comparison points for the reduced-rank
//! fit: shrinkage towards a scaled identity with an analytically optimal
//! intensity, and shrinkage of the off-diagonal entries towards zero
//! (diagonal target with unequal variances). Both return a convex
//! combination of the sample covariance and the target.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::SymMatrix;
use crate::rrcov::SampleCov;

/// Target structure of a shrinkage estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// `μ I` with `μ = tr(S)/K`.
    ScaledIdentity,
    /// `diag(S)`, unequal variances.
    DiagUnequal,
}

/// Result of a shrinkage fit: `(1 - intensity) S + intensity * target`.
#[derive(Debug, Clone)]
pub struct ShrinkEstimate {
    pub matrix: SymMatrix,
    pub intensity: f64,
    pub target_kind: TargetKind,
}

fn deviations(s: &SampleCov, z: &DMatrix<f64>) -> DMatrix<f64> {
    if s.centered {
        let mean = z.row_mean();
        let mut zc = z.clone();
        for mut row in zc.row_iter_mut() {
            row -= &mean;
        }
        zc
    } else {
        z.clone()
    }
}

/// Shrinkage towards the scaled identity `μ I`.
///
/// The intensity is the analytic optimum for this target: the ratio of the
/// estimation-error energy of `S` to its total distance from `μ I`, both
/// measured in the dimension-normalized Frobenius norm, clipped to `[0, 1]`.
pub fn fit_lw(s: &SampleCov, z: &DMatrix<f64>) -> Result<ShrinkEstimate> {
    let k = s.dim();
    let t = s.t as f64;
    let zc = deviations(s, z);
    let sm = s.s.as_matrix();

    let mu = sm.trace() / k as f64;
    let centered = sm - DMatrix::identity(k, k) * mu;
    let d2 = centered.norm_squared() / k as f64;

    // average squared distance of the per-observation outer products from S
    let mut b_bar2 = 0.0;
    for row in zc.row_iter() {
        let x = row.transpose();
        let outer = &x * x.transpose();
        b_bar2 += (outer - sm).norm_squared() / k as f64;
    }
    b_bar2 /= t * t;

    let b2 = b_bar2.min(d2);
    let intensity = if d2 > 0.0 { (b2 / d2).clamp(0.0, 1.0) } else { 1.0 };

    let est = sm * (1.0 - intensity) + DMatrix::identity(k, k) * (mu * intensity);
    Ok(ShrinkEstimate {
        matrix: SymMatrix::from_dense(&est)?,
        intensity,
        target_kind: TargetKind::ScaledIdentity,
    })
}

/// Shrinkage of the off-diagonal entries towards zero (diagonal target).
///
/// The intensity is the ratio of the summed variance estimates of the
/// off-diagonal sample covariances to their summed squares, clipped to
/// `[0, 1]`. Diagonal entries are kept at their sample values.
pub fn fit_ss(s: &SampleCov, z: &DMatrix<f64>) -> Result<ShrinkEstimate> {
    let k = s.dim();
    let t = s.t as f64;
    let zc = deviations(s, z);
    let sm = s.s.as_matrix();

    let mut var_sum = 0.0;
    let mut sq_sum = 0.0;
    for i in 0..k {
        for j in 0..i {
            // w_t = z_ti * z_tj; var(s_ij) estimated from the spread of w_t
            let mut w_bar = 0.0;
            for row in 0..zc.nrows() {
                w_bar += zc[(row, i)] * zc[(row, j)];
            }
            w_bar /= t;
            let mut w_var = 0.0;
            for row in 0..zc.nrows() {
                let w = zc[(row, i)] * zc[(row, j)];
                w_var += (w - w_bar) * (w - w_bar);
            }
            var_sum += t / (t - 1.0).powi(3) * w_var;
            sq_sum += sm[(i, j)] * sm[(i, j)];
        }
    }
    let intensity = if sq_sum > 0.0 {
        (var_sum / sq_sum).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let mut est = sm * (1.0 - intensity);
    for i in 0..k {
        est[(i, i)] = sm[(i, i)];
    }
    Ok(ShrinkEstimate {
        matrix: SymMatrix::from_dense(&est)?,
        intensity,
        target_kind: TargetKind::DiagUnequal,
    })
}
