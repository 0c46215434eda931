//! Vector autoregression fitting with a reduced-rank noise covariance.
//!
//! Two fitting procedures are provided. Without coefficient constraints the
//! coefficient estimate does not depend on the noise covariance, so a
//! 2-step method applies: ordinary least squares first, then the
//! reduced-rank covariance fit on the residuals ([`fit_two_step`]). With
//! zero constraints on the coefficients the two estimates are coupled and
//! the model is fitted by coordinate ascent alternating a constrained GLS
//! step with the analytic covariance fit ([`fit_iterative`]).
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use rrvar::linalg::SymMatrix;
//! use rrvar::var::{self, NoiseCov, VarModel};
//!
//! let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
//! let truth = VarModel::new(
//!     DVector::zeros(2),
//!     vec![a],
//!     NoiseCov::Full(SymMatrix::identity(2)),
//! )
//! .unwrap();
//! let y = var::simulate(&truth, 300, 50, 7).unwrap();
//! let model = var::fit_two_step(&y, 1, &[1]).unwrap();
//! assert_eq!(model.p, 1);
//! assert!(model.is_causal());
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast;
use crate::linalg::{self, SymMatrix};
use crate::rrcov::{self, RRCovEstimate, SampleCov};

/// Noise covariance attached to a fitted VAR model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NoiseCov {
    ReducedRank(RRCovEstimate),
    /// Unrestricted residual sample covariance.
    Full(SymMatrix),
}

impl NoiseCov {
    pub fn matrix(&self) -> SymMatrix {
        match self {
            NoiseCov::ReducedRank(est) => est.full_matrix(),
            NoiseCov::Full(s) => s.clone(),
        }
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        match self {
            NoiseCov::ReducedRank(est) => est.inverse(),
            NoiseCov::Full(s) => {
                let inv = s
                    .as_matrix()
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularEstimate)?
                    .inverse();
                SymMatrix::from_dense(&inv)
            }
        }
    }

    pub fn log_det(&self) -> Result<f64> {
        match self {
            NoiseCov::ReducedRank(est) => est.log_det(),
            NoiseCov::Full(s) => {
                let chol = s
                    .as_matrix()
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularEstimate)?;
                Ok(2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
            }
        }
    }

    /// Parameter count used in order-selection BIC.
    pub fn n_params(&self, k: usize) -> usize {
        match self {
            NoiseCov::ReducedRank(est) => rrcov::n_free_params(k, est.requested_rank()),
            NoiseCov::Full(_) => k * (k + 1) / 2,
        }
    }
}

/// Zero-constraint pattern on the AR coefficients, stored as the list of
/// free positions `(lag, row, col)` with `lag` in `0..p`.
///
/// This is the sparse form of a selection matrix with one unit entry per
/// column: the free-coefficient vector maps onto the full stacked
/// coefficient vector through these positions, all other entries are zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    k: usize,
    p: usize,
    /// `None` means unconstrained (all positions free).
    free: Option<Vec<(usize, usize, usize)>>,
}

impl ConstraintSpec {
    pub fn unconstrained(k: usize, p: usize) -> Self {
        Self { k, p, free: None }
    }

    pub fn from_positions(
        k: usize,
        p: usize,
        mut positions: Vec<(usize, usize, usize)>,
    ) -> Result<Self> {
        positions.sort_unstable();
        let before = positions.len();
        positions.dedup();
        if positions.len() != before {
            return Err(Error::InvalidInput("duplicate constraint positions".into()));
        }
        for &(lag, row, col) in &positions {
            if lag >= p || row >= k || col >= k {
                return Err(Error::InvalidInput(format!(
                    "constraint position ({lag}, {row}, {col}) out of range for K={k}, p={p}"
                )));
            }
        }
        Ok(Self {
            k,
            p,
            free: Some(positions),
        })
    }

    pub fn is_unconstrained(&self) -> bool {
        self.free.is_none()
    }

    /// Number of free coefficients.
    pub fn m(&self) -> usize {
        match &self.free {
            None => self.k * self.k * self.p,
            Some(v) => v.len(),
        }
    }

    /// Free positions as `(lag, row, col)` triples.
    pub fn positions(&self) -> Vec<(usize, usize, usize)> {
        match &self.free {
            Some(v) => v.clone(),
            None => {
                let mut out = Vec::with_capacity(self.k * self.k * self.p);
                // column-stacking order of the coefficient vector
                for lag in 0..self.p {
                    for col in 0..self.k {
                        for row in 0..self.k {
                            out.push((lag, row, col));
                        }
                    }
                }
                out
            }
        }
    }
}

/// Fitting metadata recorded on a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMeta {
    pub procedure: String,
    pub iterations: usize,
    pub converged: bool,
    /// `-2 log L` after each covariance update (plus the initial value).
    pub neg2_loglik_trace: Vec<f64>,
}

impl FitMeta {
    fn new(procedure: &str) -> Self {
        Self {
            procedure: procedure.to_string(),
            iterations: 0,
            converged: true,
            neg2_loglik_trace: Vec::new(),
        }
    }
}

/// A fitted (or specified) VAR(p) model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarModel {
    pub k: usize,
    pub p: usize,
    pub mu: DVector<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub noise_cov: Option<NoiseCov>,
    pub constraint: ConstraintSpec,
    pub fit_meta: FitMeta,
}

impl VarModel {
    /// Specify a model directly (for simulation).
    pub fn new(mu: DVector<f64>, a: Vec<DMatrix<f64>>, noise_cov: NoiseCov) -> Result<Self> {
        let k = mu.len();
        let p = a.len();
        for m in &a {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::InvalidInput(
                    "coefficient matrix dimensions do not match the mean vector".into(),
                ));
            }
        }
        if noise_cov.matrix().dim() != k {
            return Err(Error::InvalidInput(
                "noise covariance dimension does not match".into(),
            ));
        }
        Ok(Self {
            k,
            p,
            mu,
            a,
            noise_cov: Some(noise_cov),
            constraint: ConstraintSpec::unconstrained(k, p),
            fit_meta: FitMeta::new("specified"),
        })
    }

    /// Spectral radius of the companion matrix; 0 for `p = 0`.
    pub fn companion_spectral_radius(&self) -> f64 {
        if self.p == 0 {
            return 0.0;
        }
        let psi = forecast::companion_matrix(&self.a, self.k, self.p);
        forecast::spectral_radius(&psi)
    }

    pub fn is_causal(&self) -> bool {
        self.companion_spectral_radius() < 1.0 - 1e-12
    }
}

/// Data arranged for coefficient regression: predictors `L` (`Kp x n`) and
/// responses (`K x n`), both demeaned by the sample mean.
#[derive(Debug, Clone)]
pub struct RegressionView {
    pub l: DMatrix<f64>,
    pub responses: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub n: usize,
}

impl RegressionView {
    /// Stacked response vector `vec(responses)`.
    pub fn y_vec(&self) -> DVector<f64> {
        linalg::vec_of(&self.responses)
    }
}

/// Arrange a `T x K` series for order-`p` regression. Responses start at
/// `t = p` so every predictor lag is observed.
pub fn build_regression(y: &DMatrix<f64>, p: usize) -> Result<RegressionView> {
    let t = y.nrows();
    let k = y.ncols();
    if t <= p {
        return Err(Error::InsufficientData {
            required: p + 1,
            actual: t,
        });
    }
    let mu = y.row_mean().transpose();
    let n = t - p;
    let mut l = DMatrix::zeros(k * p, n);
    let mut responses = DMatrix::zeros(k, n);
    for col in 0..n {
        let resp_t = p + col;
        for i in 0..k {
            responses[(i, col)] = y[(resp_t, i)] - mu[i];
        }
        for lag in 0..p {
            let src = resp_t - 1 - lag;
            for i in 0..k {
                l[(lag * k + i, col)] = y[(src, i)] - mu[i];
            }
        }
    }
    Ok(RegressionView {
        l,
        responses,
        mu,
        n,
    })
}

fn coef_matrices_from_stacked(a_all: &DMatrix<f64>, k: usize, p: usize) -> Vec<DMatrix<f64>> {
    (0..p)
        .map(|lag| a_all.columns(lag * k, k).into_owned())
        .collect()
}

/// Unconstrained least-squares coefficient fit. The noise covariance is
/// left unset; the calling procedure fills it.
pub fn fit_ols(y: &DMatrix<f64>, p: usize) -> Result<VarModel> {
    let view = build_regression(y, p)?;
    let k = y.ncols();
    let a = if p == 0 {
        Vec::new()
    } else {
        let gram = &view.l * view.l.transpose();
        let chol = gram.cholesky().ok_or(Error::RankDeficientDesign)?;
        // A (LL') = responses L'  =>  A = responses L' (LL')^{-1}
        let rhs = &view.responses * view.l.transpose();
        let a_all = chol.solve(&rhs.transpose()).transpose();
        coef_matrices_from_stacked(&a_all, k, p)
    };
    Ok(VarModel {
        k,
        p,
        mu: view.mu,
        a,
        noise_cov: None,
        constraint: ConstraintSpec::unconstrained(k, p),
        fit_meta: FitMeta::new("ols"),
    })
}

/// Residuals `Z_t = (Y_t - μ) - Σ A_k (Y_{t-k} - μ)` for `t = p..T-1`,
/// one row per usable time point.
pub fn residuals(model: &VarModel, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = y.nrows();
    let k = y.ncols();
    if k != model.k {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if t <= model.p {
        return Err(Error::InsufficientData {
            required: model.p + 1,
            actual: t,
        });
    }
    let n = t - model.p;
    let mut out = DMatrix::zeros(n, k);
    for row in 0..n {
        let tt = model.p + row;
        let mut z = y.row(tt).transpose() - &model.mu;
        for (lag, a) in model.a.iter().enumerate() {
            let past = y.row(tt - 1 - lag).transpose() - &model.mu;
            z -= a * past;
        }
        out.set_row(row, &z.transpose());
    }
    Ok(out)
}

/// Solution of the constrained GLS step: free coefficients and the stacked
/// coefficient matrices they imply.
#[derive(Debug, Clone)]
pub struct ConstrainedFit {
    pub gamma: DVector<f64>,
    pub a: Vec<DMatrix<f64>>,
}

/// Constrained GLS coefficient estimate with a fixed noise precision.
///
/// Solves the selection-restricted normal equations without materializing
/// the `K²p x K²p` Kronecker product: the reduced normal matrix has entries
/// `(LL')[col_a, col_b] * Σ⁻¹[row_a, row_b]` over pairs of free positions,
/// and the right-hand side is read off `Σ⁻¹ · responses · L'`.
pub fn fit_constrained(
    view: &RegressionView,
    constraint: &ConstraintSpec,
    sigma_inv: &SymMatrix,
    k: usize,
    p: usize,
) -> Result<ConstrainedFit> {
    if p == 0 {
        return Ok(ConstrainedFit {
            gamma: DVector::zeros(0),
            a: Vec::new(),
        });
    }
    let positions = constraint.positions();
    let m = positions.len();
    let gram = &view.l * view.l.transpose();
    let rhs_full = sigma_inv.as_matrix() * &view.responses * view.l.transpose();

    let mut g = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for (a_idx, &(lag_a, row_a, col_a)) in positions.iter().enumerate() {
        let ca = lag_a * k + col_a;
        b[a_idx] = rhs_full[(row_a, ca)];
        for (b_idx, &(lag_b, row_b, col_b)) in positions.iter().enumerate() {
            let cb = lag_b * k + col_b;
            g[(a_idx, b_idx)] = gram[(ca, cb)] * sigma_inv.get(row_a, row_b);
        }
    }
    let chol = g.cholesky().ok_or(Error::RankDeficientDesign)?;
    let gamma = chol.solve(&b);

    let mut a_all = DMatrix::zeros(k, k * p);
    for (idx, &(lag, row, col)) in positions.iter().enumerate() {
        a_all[(row, lag * k + col)] = gamma[idx];
    }
    Ok(ConstrainedFit {
        gamma,
        a: coef_matrices_from_stacked(&a_all, k, p),
    })
}

fn residual_cov(model: &VarModel, y: &DMatrix<f64>) -> Result<SampleCov> {
    let resid = residuals(model, y)?;
    rrcov::sample_cov(&resid, false)
}

/// Unconstrained 2-step fit: least squares for the coefficients, then a
/// BIC-selected reduced-rank covariance on the residuals.
pub fn fit_two_step(
    y: &DMatrix<f64>,
    p: usize,
    rank_candidates: &[usize],
) -> Result<VarModel> {
    let mut model = fit_ols(y, p)?;
    let s = residual_cov(&model, y)?;
    let (est, _curve) = rrcov::select_rank(&s, rank_candidates)?;
    let nll = rrcov::neg2_loglik_avg(&est, &s)?;
    model.noise_cov = Some(NoiseCov::ReducedRank(est));
    model.fit_meta = FitMeta {
        procedure: "two_step".into(),
        iterations: 1,
        converged: true,
        neg2_loglik_trace: vec![s.t as f64 * nll],
    };
    Ok(model)
}

/// Options for the iterative (constrained) procedure.
#[derive(Debug, Clone, Copy)]
pub struct IterOptions {
    pub max_iter: usize,
    /// Relative `-2 log L` change below which the iteration stops.
    pub tol: f64,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

/// Iterative fit for constrained coefficients at a fixed rank `d`.
///
/// Coordinate ascent: the GLS step maximizes the likelihood over the free
/// coefficients with the covariance fixed, the covariance step applies the
/// analytic reduced-rank fit to the current residuals. Both are conditional
/// maximizers, so the `-2 log L` trace is non-increasing. On hitting
/// `max_iter` the best iterate is returned with `converged = false`.
pub fn fit_iterative(
    y: &DMatrix<f64>,
    p: usize,
    constraint: &ConstraintSpec,
    d: usize,
    opts: IterOptions,
) -> Result<VarModel> {
    let k = y.ncols();
    let view = build_regression(y, p)?;

    let mut model = VarModel {
        k,
        p,
        mu: view.mu.clone(),
        a: Vec::new(),
        noise_cov: None,
        constraint: constraint.clone(),
        fit_meta: FitMeta::new("iterative"),
    };

    // initial coefficients from GLS with identity precision
    let identity = SymMatrix::identity(k);
    let init = fit_constrained(&view, constraint, &identity, k, p)?;
    model.a = init.a;
    let s0 = residual_cov(&model, y)?;
    let mut est = rrcov::fit_rr(&s0, d)?;
    let mut trace = vec![s0.t as f64 * rrcov::neg2_loglik_avg(&est, &s0)?];

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let sigma_inv = est.inverse()?;
        let fit = fit_constrained(&view, constraint, &sigma_inv, k, p)?;
        model.a = fit.a;
        let s = residual_cov(&model, y)?;
        est = rrcov::fit_rr(&s, d)?;
        let nll = s.t as f64 * rrcov::neg2_loglik_avg(&est, &s)?;
        let prev = *trace.last().unwrap();
        trace.push(nll);
        if (prev - nll).abs() <= opts.tol * prev.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    model.noise_cov = Some(NoiseCov::ReducedRank(est));
    model.fit_meta = FitMeta {
        procedure: "iterative".into(),
        iterations,
        converged,
        neg2_loglik_trace: trace,
    };
    Ok(model)
}

/// Which fitter order selection evaluates at each candidate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderFitter {
    /// Unconstrained least squares with the full residual covariance.
    Ols,
    /// 2-step fit with a BIC-selected reduced-rank covariance.
    TwoStep,
}

/// Select the autoregression order by Gaussian BIC over a candidate set.
///
/// All orders are evaluated on the common sample starting after the largest
/// candidate order, so the likelihood terms are comparable. Ties break
/// toward the smaller order.
pub fn select_order(
    y: &DMatrix<f64>,
    orders: &[usize],
    fitter: OrderFitter,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if orders.is_empty() {
        return Err(Error::InvalidInput("empty order candidate set".into()));
    }
    let k = y.ncols();
    let t = y.nrows();
    let p_max = *orders.iter().max().unwrap();
    if p_max >= t {
        return Err(Error::InsufficientData {
            required: p_max + 1,
            actual: t,
        });
    }
    let mut sorted: Vec<usize> = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut table = Vec::with_capacity(sorted.len());
    let mut best: Option<(usize, f64)> = None;
    for &p in &sorted {
        // drop leading rows so responses start at the common time point
        let sub = y.rows(p_max - p, t - (p_max - p)).into_owned();
        let (nll_avg, cov_params) = match fitter {
            OrderFitter::Ols => {
                let model = fit_ols(&sub, p)?;
                let s = residual_cov(&model, &sub)?;
                let cov = NoiseCov::Full(s.s.clone());
                // tr(Σ̂⁻¹ S) = K when Σ̂ is the residual sample covariance
                (cov.log_det()? + k as f64, cov.n_params(k))
            }
            OrderFitter::TwoStep => {
                let candidates: Vec<usize> = (1..k).collect();
                let model = fit_two_step(&sub, p, &candidates)?;
                let s = residual_cov(&model, &sub)?;
                let Some(NoiseCov::ReducedRank(est)) = &model.noise_cov else {
                    unreachable!()
                };
                (
                    rrcov::neg2_loglik_avg(est, &s)?,
                    rrcov::n_free_params(k, est.requested_rank()),
                )
            }
        };
        let t_eff = (t - p_max) as f64;
        let n_coef = k * k * p;
        let score = t_eff * nll_avg + t_eff.ln() * (n_coef + cov_params) as f64;
        table.push((p, score));
        let better = match best {
            None => true,
            Some((_, b)) => score < b,
        };
        if better {
            best = Some((p, score));
        }
    }
    Ok((best.unwrap().0, table))
}

/// Standard errors of the stacked coefficient vector under the plugged-in
/// noise covariance: square roots of the diagonal of the constrained-GLS
/// asymptotic covariance. Constrained entries report 0.
pub fn coef_stderr(model: &VarModel, view: &RegressionView) -> Result<Vec<f64>> {
    let k = model.k;
    let p = model.p;
    let cov = model
        .noise_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no noise covariance".into()))?;
    let sigma_inv = cov.inverse()?;
    let positions = model.constraint.positions();
    let m = positions.len();
    let gram = &view.l * view.l.transpose();

    let mut g = DMatrix::zeros(m, m);
    for (a_idx, &(lag_a, row_a, col_a)) in positions.iter().enumerate() {
        let ca = lag_a * k + col_a;
        for (b_idx, &(lag_b, row_b, col_b)) in positions.iter().enumerate() {
            let cb = lag_b * k + col_b;
            g[(a_idx, b_idx)] = gram[(ca, cb)] * sigma_inv.get(row_a, row_b);
        }
    }
    let g_inv = g
        .cholesky()
        .ok_or(Error::RankDeficientDesign)?
        .inverse();

    let mut out = vec![0.0; k * k * p];
    for (idx, &(lag, row, col)) in positions.iter().enumerate() {
        let alpha_idx = (lag * k + col) * k + row;
        out[alpha_idx] = g_inv[(idx, idx)].sqrt();
    }
    Ok(out)
}

/// Simulate a causal VAR(p) model: Gaussian noise drawn through the
/// Cholesky factor of the noise covariance, `burn_in` samples discarded,
/// deterministic per seed.
pub fn simulate(
    model: &VarModel,
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if !model.is_causal() {
        return Err(Error::NonCausalModel);
    }
    let cov = model
        .noise_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no noise covariance".into()))?;
    let l = linalg::chol(&cov.matrix())?;
    let k = model.k;
    let p = model.p;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let total = t_len + burn_in;
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(k); p];
    let mut out = DMatrix::zeros(t_len, k);
    for t in 0..total {
        let eps = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        let mut dev = &l * eps;
        for (lag, a) in model.a.iter().enumerate() {
            dev += a * &history[lag];
        }
        if p > 0 {
            history.rotate_right(1);
            history[0] = dev.clone();
        }
        if t >= burn_in {
            out.set_row(t - burn_in, &(&dev + &model.mu).transpose());
        }
    }
    Ok(out)
}
