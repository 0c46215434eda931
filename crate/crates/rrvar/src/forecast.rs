//! Companion-form machinery and the approximate one-step forecast MSE.
//!
//! A VAR(p) is rewritten as a VAR(1) on stacked lags through its companion
//! matrix. The stationary covariance of the stacked process solves the
//! discrete Lyapunov equation `Γ = Ψ Γ Ψ' + Σ_V`; from it the one-step
//! forecast MSE with estimated coefficients is approximated as
//! `Σ_Z + Ω(1)`, where `Ω(1)` averages the quadratic forms
//! `L_t' Γ⁻¹ L_t` of the observed predictor stacks against `Σ_Z`.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use rrvar::forecast;
//! use rrvar::linalg::SymMatrix;
//! use rrvar::var::{NoiseCov, VarModel};
//!
//! let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.3]);
//! let model = VarModel::new(
//!     DVector::zeros(2),
//!     vec![a],
//!     NoiseCov::Full(SymMatrix::identity(2)),
//! )
//! .unwrap();
//! let cf = forecast::companion(&model).unwrap();
//! let gamma = forecast::stationary_cov(&cf).unwrap();
//! let g = gamma.as_matrix();
//! let residual = (g - &cf.psi * g * cf.psi.transpose() - cf.sigma_v.as_matrix()).norm();
//! assert!(residual < 1e-10);
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::var::{build_regression, VarModel};

/// Companion representation of a VAR(p): `Kp x Kp` transition matrix and
/// the stacked noise covariance (upper-left `K x K` block only).
#[derive(Debug, Clone)]
pub struct CompanionForm {
    pub psi: DMatrix<f64>,
    pub sigma_v: SymMatrix,
    pub k: usize,
    pub p: usize,
}

/// Approximate one-step forecast MSE and its parts.
#[derive(Debug, Clone)]
pub struct ForecastMse {
    /// `Σ̂_Z + Ω(1)`.
    pub matrix: SymMatrix,
    /// Parameter-uncertainty part `Ω(1)`.
    pub omega: SymMatrix,
    /// Stationary covariance of the stacked lag process.
    pub gamma_y: SymMatrix,
}

/// Companion matrix from coefficient matrices: top block row `(A_1 … A_p)`,
/// identity sub-blocks below, zeros elsewhere.
pub fn companion_matrix(a: &[DMatrix<f64>], k: usize, p: usize) -> DMatrix<f64> {
    let mut psi = DMatrix::zeros(k * p, k * p);
    for (lag, m) in a.iter().enumerate() {
        psi.view_mut((0, lag * k), (k, k)).copy_from(m);
    }
    for block in 1..p {
        psi.view_mut((block * k, (block - 1) * k), (k, k))
            .copy_from(&DMatrix::identity(k, k));
    }
    psi
}

/// Largest eigenvalue modulus of a square (not necessarily symmetric) matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Build the companion form of a fitted model.
pub fn companion(model: &VarModel) -> Result<CompanionForm> {
    if model.p == 0 {
        return Err(Error::InvalidOrder(0));
    }
    let cov = model
        .noise_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no noise covariance".into()))?;
    let k = model.k;
    let p = model.p;
    let psi = companion_matrix(&model.a, k, p);
    let mut sigma_v = DMatrix::zeros(k * p, k * p);
    sigma_v
        .view_mut((0, 0), (k, k))
        .copy_from(cov.matrix().as_matrix());
    Ok(CompanionForm {
        psi,
        sigma_v: SymMatrix::from_dense(&sigma_v)?,
        k,
        p,
    })
}

/// Dense-solve path: `vec(Γ) = (I - Ψ⊗Ψ)⁻¹ vec(Σ_V)`.
pub fn stationary_cov_vec_solve(cf: &CompanionForm) -> Result<SymMatrix> {
    check_causal(cf)?;
    let n = cf.psi.nrows();
    let system = DMatrix::identity(n * n, n * n) - linalg::kron(&cf.psi, &cf.psi);
    let rhs = linalg::vec_of(cf.sigma_v.as_matrix());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Lyapunov system".into()))?;
    SymMatrix::from_dense(&linalg::unvec(&sol, n, n))
}

/// Fixed-point path with squared-transition acceleration:
/// `Γ_{j+1} = Γ_j + Ψ_j Γ_j Ψ_j'` with `Ψ_{j+1} = Ψ_j²`.
pub fn stationary_cov_fixed_point(cf: &CompanionForm) -> Result<SymMatrix> {
    check_causal(cf)?;
    let mut gamma = cf.sigma_v.as_matrix().clone();
    let mut psi = cf.psi.clone();
    for _ in 0..128 {
        let step = &psi * &gamma * psi.transpose();
        let delta = step.norm();
        gamma += step;
        if delta <= 1e-14 * gamma.norm().max(1e-300) {
            break;
        }
        psi = &psi * &psi;
    }
    SymMatrix::from_dense(&gamma)
}

// dense vec-solve is K²p² x K²p²; switch to the iteration above this size
const VEC_SOLVE_MAX_DIM: usize = 40;

/// Stationary covariance `Γ_Y` of the stacked lag process, satisfying
/// `Γ = Ψ Γ Ψ' + Σ_V`.
pub fn stationary_cov(cf: &CompanionForm) -> Result<SymMatrix> {
    if cf.psi.nrows() <= VEC_SOLVE_MAX_DIM {
        stationary_cov_vec_solve(cf)
    } else {
        stationary_cov_fixed_point(cf)
    }
}

fn check_causal(cf: &CompanionForm) -> Result<()> {
    if spectral_radius(&cf.psi) >= 1.0 - 1e-12 {
        return Err(Error::NonCausalModel);
    }
    Ok(())
}

/// Parameter-uncertainty part of the forecast MSE:
/// `Ω(1) = (1/n) * mean_t(q_t) * Σ̂_Z` with `q_t = L_t' Γ̂_Y⁻¹ L_t`.
///
/// Since `E q_t = Kp` under stationarity this is `(Kp/n) Σ̂_Z` up to
/// sampling noise, the classic estimation-uncertainty inflation of the
/// one-step MSE. The average runs over the predictor stacks observable in
/// the data (`n = T - p` of them); `Γ̂_Y⁻¹` is applied through a Cholesky
/// solve.
pub fn omega1(model: &VarModel, y: &DMatrix<f64>) -> Result<SymMatrix> {
    let cov = model
        .noise_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no noise covariance".into()))?;
    let sigma_z = cov.matrix();
    if model.p == 0 {
        return SymMatrix::from_dense(&DMatrix::zeros(model.k, model.k));
    }
    let cf = companion(model)?;
    let gamma = stationary_cov(&cf)?;
    let chol = gamma
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("singular stationary covariance".into()))?;
    let view = build_regression(y, model.p)?;
    let mut q_sum = 0.0;
    for col in view.l.column_iter() {
        let lt = DVector::from_column_slice(col.as_slice());
        let solved = chol.solve(&lt);
        q_sum += lt.dot(&solved);
    }
    let n = view.n as f64;
    let scale = q_sum / (n * n);
    SymMatrix::from_dense(&(sigma_z.as_matrix() * scale))
}

/// Approximate one-step forecast MSE `Σ̂_Z + Ω(1)` with its parts.
pub fn fmse1(model: &VarModel, y: &DMatrix<f64>) -> Result<ForecastMse> {
    let cov = model
        .noise_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no noise covariance".into()))?;
    let sigma_z = cov.matrix();
    let omega = omega1(model, y)?;
    let matrix = SymMatrix::from_dense(&(sigma_z.as_matrix() + omega.as_matrix()))?;
    let gamma_y = if model.p == 0 {
        sigma_z.clone()
    } else {
        stationary_cov(&companion(model)?)?
    };
    Ok(ForecastMse {
        matrix,
        omega,
        gamma_y,
    })
}

/// One-step point forecast `μ̂ + Σ Â_k (Y_{t+1-k} - μ̂)` from the most
/// recent `p` observations (last row of `recent` is the newest).
pub fn forecast1(model: &VarModel, recent: &DMatrix<f64>) -> Result<DVector<f64>> {
    if recent.nrows() < model.p {
        return Err(Error::InsufficientData {
            required: model.p,
            actual: recent.nrows(),
        });
    }
    if recent.ncols() != model.k {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut out = model.mu.clone();
    let last = recent.nrows();
    for (lag, a) in model.a.iter().enumerate() {
        let past = recent.row(last - 1 - lag).transpose() - &model.mu;
        out += a * past;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rrcov;
    use crate::var::{simulate, NoiseCov};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_causal_var1(k: usize, seed: u64, scale: f64) -> VarModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a1 = DMatrix::from_fn(k, k, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let rho = spectral_radius(&a1);
        a1 *= scale / rho.max(1e-9);
        let g = DMatrix::from_fn(k, k, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let sigma =
            SymMatrix::from_dense(&(g.transpose() * &g + DMatrix::identity(k, k) * 0.2)).unwrap();
        VarModel::new(DVector::zeros(k), vec![a1], NoiseCov::Full(sigma)).unwrap()
    }

    #[test]
    fn companion_blocks() {
        // p=1 -> Psi = A1
        let model = random_causal_var1(3, 1, 0.6);
        let cf = companion(&model).unwrap();
        assert_eq!(cf.psi, model.a[0]);

        // scalar AR(2): [[a1, a2], [1, 0]]
        let a = vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, -0.2),
        ];
        let psi = companion_matrix(&a, 1, 2);
        assert_eq!(
            psi,
            DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 1.0, 0.0])
        );
    }

    #[test]
    fn spectral_radius_matches_ar_polynomial_roots() {
        // scalar AR(2): companion eigenvalues are the inverse roots of
        // 1 - a1 z - a2 z^2
        let (a1, a2) = (0.5, -0.3);
        let psi = companion_matrix(
            &[
                DMatrix::from_element(1, 1, a1),
                DMatrix::from_element(1, 1, a2),
            ],
            1,
            2,
        );
        let rho = spectral_radius(&psi);
        // roots of z^2 - a1 z - a2 = 0
        let disc = (a1 * a1 + 4.0 * a2) as f64;
        let expect = if disc >= 0.0 {
            ((a1 + disc.sqrt()) / 2.0).abs().max(((a1 - disc.sqrt()) / 2.0).abs())
        } else {
            ((a1 / 2.0).powi(2) + (-disc).sqrt().powi(2) / 4.0).sqrt()
        };
        assert_abs_diff_eq!(rho, expect, epsilon = 1e-10);
    }

    #[test]
    fn stationary_cov_zero_transition() {
        let mut model = random_causal_var1(2, 3, 0.5);
        model.a[0] = DMatrix::zeros(2, 2);
        let cf = companion(&model).unwrap();
        let gamma = stationary_cov(&cf).unwrap();
        assert!((gamma.as_matrix() - cf.sigma_v.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn stationary_cov_scalar_ar1() {
        let a = DMatrix::from_element(1, 1, 0.7);
        let sigma = SymMatrix::from_diagonal(&[2.0]);
        let model = VarModel::new(DVector::zeros(1), vec![a], NoiseCov::Full(sigma)).unwrap();
        let gamma = stationary_cov(&companion(&model).unwrap()).unwrap();
        assert_abs_diff_eq!(gamma.get(0, 0), 2.0 / (1.0 - 0.49), epsilon = 1e-10);
    }

    #[test]
    fn lyapunov_residual_and_path_agreement() {
        for seed in 0..10 {
            let model = random_causal_var1(3, 100 + seed, 0.8);
            let cf = companion(&model).unwrap();
            let g1 = stationary_cov_vec_solve(&cf).unwrap();
            let g2 = stationary_cov_fixed_point(&cf).unwrap();
            let resid = g1.as_matrix()
                - &cf.psi * g1.as_matrix() * cf.psi.transpose()
                - cf.sigma_v.as_matrix();
            assert!(resid.norm() / g1.as_matrix().norm() < 1e-8);
            assert!(
                (g1.as_matrix() - g2.as_matrix()).norm() / g1.as_matrix().norm() < 1e-8
            );
        }
    }

    #[test]
    fn stationary_cov_matches_long_run_sample() {
        let model = random_causal_var1(3, 42, 0.7);
        let y = simulate(&model, 200_000, 1000, 5).unwrap();
        let s = rrcov::sample_cov(&y, false).unwrap();
        let gamma = stationary_cov(&companion(&model).unwrap()).unwrap();
        let rel = (s.s.as_matrix() - gamma.as_matrix()).norm() / gamma.as_matrix().norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn omega_scalar_identity() {
        // K=1, p=1: mean q_t = mean(y_t^2)/gamma -> 1, so Omega ~ sigma^2/n
        let n = 50_000;
        let model = random_causal_var1(1, 7, 0.6);
        let y = simulate(&model, n, 500, 11).unwrap();
        let omega = omega1(&model, &y).unwrap();
        let sigma = model.noise_cov.as_ref().unwrap().matrix().get(0, 0);
        let expect = sigma / (n - 1) as f64;
        assert!((omega.get(0, 0) / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn omega_trace_scales_like_kp_over_t() {
        let model = random_causal_var1(3, 9, 0.6);
        let t = 400;
        let y = simulate(&model, t, 200, 13).unwrap();
        // refit so Omega reflects estimation uncertainty of this sample size
        let fitted = crate::var::fit_two_step(&y, 1, &[1, 2]).unwrap();
        let omega = omega1(&fitted, &y).unwrap();
        let sigma = fitted.noise_cov.as_ref().unwrap().matrix();
        // E q_t = Kp under stationarity, so tr(Omega) ~ (Kp/n) tr(Sigma)
        let ratio = omega.as_matrix().trace() / sigma.as_matrix().trace();
        let expect = 3.0 / (t - 1) as f64;
        assert!((ratio / expect - 1.0).abs() < 0.15, "ratio {ratio}");
    }

    #[test]
    fn fmse_trivial_edges() {
        let model = random_causal_var1(3, 15, 0.5);
        let y = simulate(&model, 500, 100, 17).unwrap();
        let fitted = crate::var::fit_two_step(&y, 1, &[1, 2]).unwrap();
        let f = fmse1(&fitted, &y).unwrap();
        let sigma = fitted.noise_cov.as_ref().unwrap().matrix();
        for i in 0..3 {
            assert!(f.matrix.get(i, i) >= sigma.get(i, i) - 1e-12);
        }
        let diff = f.matrix.as_matrix() - sigma.as_matrix();
        assert!((diff - f.omega.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn forecast1_cases() {
        // zero coefficients -> forecast is the mean
        let sigma = SymMatrix::identity(2);
        let mu = DVector::from_row_slice(&[1.0, -2.0]);
        let model = VarModel::new(
            mu.clone(),
            vec![DMatrix::zeros(2, 2)],
            NoiseCov::Full(sigma.clone()),
        )
        .unwrap();
        let recent = DMatrix::from_row_slice(1, 2, &[5.0, 5.0]);
        let f = forecast1(&model, &recent).unwrap();
        assert!((f - &mu).norm() < 1e-14);

        // A1 = I -> forecast equals the last observation
        let model = VarModel::new(
            mu.clone(),
            vec![DMatrix::identity(2, 2)],
            NoiseCov::Full(sigma.clone()),
        )
        .unwrap();
        let f = forecast1(&model, &recent).unwrap();
        assert!((f - recent.row(0).transpose()).norm() < 1e-14);

        // scalar AR(1): a*y + (1-a)*mu
        let model = VarModel::new(
            DVector::from_row_slice(&[2.0]),
            vec![DMatrix::from_element(1, 1, 0.6)],
            NoiseCov::Full(SymMatrix::identity(1)),
        )
        .unwrap();
        let recent = DMatrix::from_row_slice(1, 1, &[10.0]);
        let f = forecast1(&model, &recent).unwrap();
        assert_abs_diff_eq!(f[0], 0.6 * 10.0 + 0.4 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn companion_rejects_p0() {
        let model = VarModel::new(
            DVector::zeros(2),
            vec![],
            NoiseCov::Full(SymMatrix::identity(2)),
        )
        .unwrap();
        assert!(matches!(companion(&model), Err(Error::InvalidOrder(0))));
    }
}
