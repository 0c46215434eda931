//! Loss functions for comparing covariance estimates against a known truth.
//!
//! ```
//! use rrvar::linalg::SymMatrix;
//! use rrvar::metrics::{mse_loss, pct_reduction, steins_loss, MseNorm};
//!
//! let truth = SymMatrix::identity(3);
//! let est = SymMatrix::from_diagonal(&[2.0, 2.0, 2.0]);
//! let sl = steins_loss(&est, &truth).unwrap();
//! assert!((sl - 3.0 * (1.0 - 2.0f64.ln())).abs() < 1e-12);
//! let mse = mse_loss(&est, &truth, MseNorm::Frobenius).unwrap();
//! assert!((mse - 3.0).abs() < 1e-12);
//! assert_eq!(pct_reduction(0.5, 2.0).unwrap(), 75.0);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// Norm convention for the squared-error loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MseNorm {
    /// Squared spectral norm (largest singular value squared).
    Spectral,
    /// Squared Frobenius norm.
    Frobenius,
}

/// Per-estimator loss record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    pub estimator_tag: String,
    pub stein: f64,
    pub mse_spectral: f64,
    pub mse_frobenius: f64,
}

/// Stein's loss `tr(Ê Σ⁻¹) - log|Ê Σ⁻¹| - K`.
///
/// Computed by whitening `Ê` with the Cholesky factor of the truth; the
/// loss is then a function of the whitened eigenvalues only, which keeps
/// the log-determinant stable.
pub fn steins_loss(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let l = linalg::chol(truth)?;
    let li = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite)?;
    let w = &li * est.as_matrix() * li.transpose();
    let eig = linalg::eigh(&SymMatrix::from_dense(&w)?)?;
    let mut loss = 0.0;
    for &e in eig.values.iter() {
        if e <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        loss += e - e.ln() - 1.0;
    }
    Ok(loss)
}

/// Squared-error loss `||Ê - Σ||²` under the chosen norm convention.
pub fn mse_loss(est: &SymMatrix, truth: &SymMatrix, norm: MseNorm) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let diff = SymMatrix::from_dense(&(est.as_matrix() - truth.as_matrix()))?;
    match norm {
        MseNorm::Frobenius => Ok(diff.as_matrix().norm().powi(2)),
        MseNorm::Spectral => {
            let eig = linalg::eigh(&diff)?;
            let n = diff.dim();
            let top = eig.values[0].abs().max(eig.values[n - 1].abs());
            Ok(top * top)
        }
    }
}

/// Percentage reduction of a loss relative to the sample-covariance baseline.
pub fn pct_reduction(loss_est: f64, loss_sample: f64) -> Result<f64> {
    if loss_sample <= 0.0 {
        return Err(Error::InvalidInput(
            "baseline loss must be strictly positive".into(),
        ));
    }
    Ok(100.0 * (1.0 - loss_est / loss_sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(k: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(k, k, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        SymMatrix::from_dense(&(g.transpose() * &g + DMatrix::identity(k, k) * 0.1)).unwrap()
    }

    #[test]
    fn stein_zero_at_truth() {
        let sigma = random_pd(4, 1);
        assert_abs_diff_eq!(steins_loss(&sigma, &sigma).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn stein_scaled_truth() {
        // est = 2 * truth -> K(1 - log 2)
        let sigma = random_pd(3, 2);
        let est = SymMatrix::from_dense(&(sigma.as_matrix() * 2.0)).unwrap();
        let expect = 3.0 * (1.0 - 2.0_f64.ln());
        assert_abs_diff_eq!(steins_loss(&est, &sigma).unwrap(), expect, epsilon = 1e-9);
    }

    #[test]
    fn stein_matches_dense_formula() {
        let truth = random_pd(5, 3);
        let est = random_pd(5, 4);
        let ti = truth.as_matrix().clone().try_inverse().unwrap();
        let prod = est.as_matrix() * ti;
        let naive = prod.trace() - prod.determinant().ln() - 5.0;
        assert_abs_diff_eq!(
            steins_loss(&est, &truth).unwrap(),
            naive,
            epsilon = 1e-9
        );
    }

    #[test]
    fn stein_congruence_invariance() {
        let truth = random_pd(4, 5);
        let est = random_pd(4, 6);
        let base = steins_loss(&est, &truth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
            + DMatrix::identity(4, 4) * 2.0;
        let est2 = SymMatrix::from_dense(&(&a * est.as_matrix() * a.transpose())).unwrap();
        let truth2 = SymMatrix::from_dense(&(&a * truth.as_matrix() * a.transpose())).unwrap();
        assert_abs_diff_eq!(steins_loss(&est2, &truth2).unwrap(), base, epsilon = 1e-9);
    }

    #[test]
    fn mse_conventions_disagree_on_two_spikes() {
        let truth = SymMatrix::from_diagonal(&[0.0, 0.0]);
        let est = SymMatrix::from_diagonal(&[3.0, 4.0]);
        assert_abs_diff_eq!(mse_loss(&est, &truth, MseNorm::Spectral).unwrap(), 16.0);
        assert_abs_diff_eq!(mse_loss(&est, &truth, MseNorm::Frobenius).unwrap(), 25.0);

        let est1 = SymMatrix::from_diagonal(&[3.0, 0.0]);
        assert_abs_diff_eq!(mse_loss(&est1, &truth, MseNorm::Spectral).unwrap(), 9.0);
        assert_abs_diff_eq!(mse_loss(&est1, &truth, MseNorm::Frobenius).unwrap(), 9.0);
    }

    #[test]
    fn pct_reduction_basics() {
        assert_abs_diff_eq!(pct_reduction(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(pct_reduction(0.0, 1.0).unwrap(), 100.0);
        assert_abs_diff_eq!(pct_reduction(0.008, 1.0).unwrap(), 99.2, epsilon = 1e-12);
        assert!(pct_reduction(1.0, 0.0).is_err());
    }
}
