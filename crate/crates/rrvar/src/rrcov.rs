//! Reduced-rank covariance estimation.
//!
//! Models a `K`-dimensional observation as a rank-`d` structured part plus
//! isotropic noise, `Sigma = U Λ U' + σ² I`, and fits it by the analytic
//! maximum-likelihood solution: `U` spans the top-`d` eigenvectors of the
//! sample covariance, `σ²` is the mean of the trailing eigenvalues and
//! `λ_i = c_i − σ²`. Rank selection is done by BIC.
//!
//! ```
//! use nalgebra::DMatrix;
//! use rrvar::rrcov::{sample_cov, select_rank};
//!
//! // 200 draws from a 4-dimensional distribution with one strong direction.
//! let t = 200;
//! let z = DMatrix::from_fn(t, 4, |i, j| {
//!     let common = ((i * 37 + 11) % 101) as f64 / 101.0 - 0.5;
//!     let noise = ((i * 17 + j * 29 + 3) % 97) as f64 / 97.0 - 0.5;
//!     3.0 * common * (j == 0) as u8 as f64 + noise
//! });
//! let s = sample_cov(&z, true).unwrap();
//! let (est, curve) = select_rank(&s, &[1, 2, 3]).unwrap();
//! assert_eq!(curve.len(), 3);
//! assert!(est.rank() >= 1);
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenSystem, SymMatrix};

/// Sample covariance `S = (1/T) Σ Z_t Z_t'` together with the sample count.
#[derive(Debug, Clone)]
pub struct SampleCov {
    pub s: SymMatrix,
    pub t: usize,
    pub centered: bool,
}

impl SampleCov {
    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// Wrap a precomputed covariance matrix with its sample count.
    pub fn from_matrix(s: SymMatrix, t: usize, centered: bool) -> Self {
        Self { s, t, centered }
    }
}

/// Compute the sample covariance of a `T x K` observation matrix.
///
/// The divisor is `T`, not `T - 1`. When `center` is set the column mean is
/// subtracted first.
pub fn sample_cov(z: &DMatrix<f64>, center: bool) -> Result<SampleCov> {
    let t = z.nrows();
    if t < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: t,
        });
    }
    if !z.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("non-finite observations".into()));
    }
    let zc = if center {
        let mean = z.row_mean();
        let mut zc = z.clone();
        for mut row in zc.row_iter_mut() {
            row -= &mean;
        }
        zc
    } else {
        z.clone()
    };
    let s = (zc.transpose() * &zc) / t as f64;
    Ok(SampleCov {
        s: SymMatrix::from_dense(&s)?,
        t,
        centered: center,
    })
}

/// Fitted reduced-rank covariance `U diag(λ) U' + σ² I`.
///
/// `requested_rank` is the rank asked for; `rank` is the effective rank
/// after dropping non-positive `λ` estimates (possible when the requested
/// rank reaches into the flat part of the spectrum).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RRCovEstimate {
    k: usize,
    requested_rank: usize,
    u: DMatrix<f64>,
    lambda: Vec<f64>,
    sigma2: f64,
    n_samples: usize,
}

impl RRCovEstimate {
    pub fn dim(&self) -> usize {
        self.k
    }

    /// Effective rank (after truncating non-positive eigenvalue gaps).
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn requested_rank(&self) -> usize {
        self.requested_rank
    }

    /// `K x d` column-orthonormal loading matrix.
    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Structured-part eigenvalues `λ_1 > … > λ_d > 0`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn is_invertible(&self) -> bool {
        self.sigma2 > 0.0
    }

    /// Dense `U diag(λ) U' + σ² I`.
    pub fn full_matrix(&self) -> SymMatrix {
        let mut m = DMatrix::identity(self.k, self.k) * self.sigma2;
        if !self.lambda.is_empty() {
            let lam = DMatrix::from_diagonal(&DVector::from_row_slice(&self.lambda));
            m += &self.u * lam * self.u.transpose();
        }
        SymMatrix::from_dense(&m).expect("square by construction")
    }

    /// Inverse via the Woodbury identity:
    /// `Σ⁻¹ = (1/σ²)(I + U diag(-λ_i/(λ_i+σ²)) U')`.
    pub fn inverse(&self) -> Result<SymMatrix> {
        if !self.is_invertible() {
            return Err(Error::SingularEstimate);
        }
        let mut m = DMatrix::identity(self.k, self.k);
        if !self.lambda.is_empty() {
            let tilde: Vec<f64> = self
                .lambda
                .iter()
                .map(|&l| -l / (l + self.sigma2))
                .collect();
            let tilde = DMatrix::from_diagonal(&DVector::from_row_slice(&tilde));
            m += &self.u * tilde * self.u.transpose();
        }
        m /= self.sigma2;
        SymMatrix::from_dense(&m)
    }

    /// `log|Σ| = (K-d) log σ² + Σ log(λ_i + σ²)`.
    pub fn log_det(&self) -> Result<f64> {
        if !self.is_invertible() {
            return Err(Error::SingularEstimate);
        }
        let d = self.rank();
        let mut out = (self.k - d) as f64 * self.sigma2.ln();
        for &l in &self.lambda {
            out += (l + self.sigma2).ln();
        }
        Ok(out)
    }

    /// Build an estimate directly from its parts (used by deserialization
    /// paths and tests). The caller is responsible for `U` orthonormality.
    pub fn from_parts(
        u: DMatrix<f64>,
        lambda: Vec<f64>,
        sigma2: f64,
        requested_rank: usize,
        n_samples: usize,
    ) -> Self {
        let k = u.nrows();
        debug_assert_eq!(u.ncols(), lambda.len());
        Self {
            k,
            requested_rank,
            u,
            lambda,
            sigma2,
            n_samples,
        }
    }
}

fn fit_from_eigen(eig: &EigenSystem, d: usize, t: usize) -> RRCovEstimate {
    let k = eig.values.len();
    let tail: f64 = (d..k).map(|i| eig.values[i].max(0.0)).sum();
    let sigma2 = tail / (k - d) as f64;
    // truncate to the largest effective rank with lambda > 0
    let mut lambda = Vec::with_capacity(d);
    for i in 0..d {
        let l = eig.values[i] - sigma2;
        if l > 0.0 {
            lambda.push(l);
        } else {
            break;
        }
    }
    let u = eig.vectors.columns(0, lambda.len()).into_owned();
    RRCovEstimate {
        k,
        requested_rank: d,
        u,
        lambda,
        sigma2,
        n_samples: t,
    }
}

/// Analytic maximum-likelihood fit at a fixed rank `d ∈ [1, K-1]`.
///
/// Returns the estimate even when `σ̂² = 0`; such estimates are flagged
/// non-invertible and likelihood queries on them fail with
/// [`Error::SingularEstimate`].
pub fn fit_rr(s: &SampleCov, d: usize) -> Result<RRCovEstimate> {
    let k = s.dim();
    if d < 1 || d > k - 1 {
        return Err(Error::InvalidRank {
            d,
            min: 1,
            max: k - 1,
        });
    }
    let eig = linalg::eigh(&s.s)?;
    Ok(fit_from_eigen(&eig, d, s.t))
}

/// The `d = 0` extreme: the isotropic fit `c̄ I_K`.
pub fn fit_isotropic(s: &SampleCov) -> RRCovEstimate {
    let k = s.dim();
    let mean = s.s.as_matrix().trace() / k as f64;
    RRCovEstimate {
        k,
        requested_rank: 0,
        u: DMatrix::zeros(k, 0),
        lambda: Vec::new(),
        sigma2: mean,
        n_samples: s.t,
    }
}

/// Average negative twice log-likelihood `log|Σ̂| + tr(Σ̂⁻¹ S)`, up to the
/// usual additive constant, evaluated through the Woodbury form.
pub fn neg2_loglik_avg(est: &RRCovEstimate, s: &SampleCov) -> Result<f64> {
    if est.dim() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: estimate {} vs sample {}",
            est.dim(),
            s.dim()
        )));
    }
    if !est.is_invertible() {
        return Err(Error::SingularEstimate);
    }
    let log_det = est.log_det()?;
    // tr(Σ⁻¹ S) = (1/σ²) [tr S - Σ_i (λ_i/(λ_i+σ²)) u_i' S u_i]
    let mut trace = s.s.as_matrix().trace();
    for (i, &l) in est.lambda.iter().enumerate() {
        let ui = est.u.column(i);
        let quad = (s.s.as_matrix() * ui).dot(&ui);
        trace -= l / (l + est.sigma2) * quad;
    }
    Ok(log_det + trace / est.sigma2)
}

/// Number of free parameters at requested rank `d`: `Kd - d(d-1)/2 + 1`.
pub fn n_free_params(k: usize, d: usize) -> usize {
    k * d - d.saturating_sub(1) * d / 2 + 1
}

/// BIC of a fitted estimate: `T * (log|Σ̂| + tr(Σ̂⁻¹S)) + log(T) * params`.
///
/// The parameter count uses the requested rank even when the effective rank
/// was truncated, so the selection curve stays comparable across `d`.
pub fn bic(est: &RRCovEstimate, s: &SampleCov) -> Result<f64> {
    let nll = neg2_loglik_avg(est, s)?;
    let t = s.t as f64;
    Ok(t * nll + t.ln() * n_free_params(s.dim(), est.requested_rank) as f64)
}

/// Fit every candidate rank and return the minimum-BIC estimate together
/// with the full `(d, BIC)` curve. Ties break toward smaller `d`.
///
/// Candidate `0` is accepted and evaluates the isotropic fit `c̄ I_K`;
/// the default candidate set of the VAR pipeline is `{1, …, K-1}`.
///
/// ```
/// use nalgebra::DMatrix;
/// use rrvar::rrcov::{sample_cov, select_rank};
///
/// let z = DMatrix::from_fn(120, 5, |i, j| {
///     ((i * 31 + j * 17 + 5) % 89) as f64 / 89.0 - 0.5
/// });
/// let s = sample_cov(&z, false).unwrap();
/// let (est, curve) = select_rank(&s, &[1, 2, 3, 4]).unwrap();
/// let best = curve.iter().map(|&(_, b)| b).fold(f64::INFINITY, f64::min);
/// let at_selected = curve
///     .iter()
///     .find(|&&(d, _)| d == est.requested_rank())
///     .unwrap()
///     .1;
/// assert_eq!(at_selected, best);
/// ```
pub fn select_rank(s: &SampleCov, candidates: &[usize]) -> Result<(RRCovEstimate, Vec<(usize, f64)>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty rank candidate set".into()));
    }
    let k = s.dim();
    for &d in candidates {
        if d > k - 1 {
            return Err(Error::InvalidRank {
                d,
                min: 0,
                max: k - 1,
            });
        }
    }
    let eig = linalg::eigh(&s.s)?;
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut curve = Vec::with_capacity(sorted.len());
    let mut best: Option<(RRCovEstimate, f64)> = None;
    for &d in &sorted {
        let est = if d == 0 {
            fit_isotropic(s)
        } else {
            fit_from_eigen(&eig, d, s.t)
        };
        let Ok(score) = bic(&est, s) else {
            curve.push((d, f64::INFINITY));
            continue;
        };
        curve.push((d, score));
        let better = match &best {
            None => true,
            Some((_, b)) => score < *b,
        };
        if better {
            best = Some((est, score));
        }
    }
    match best {
        Some((est, _)) => Ok((est, curve)),
        None => Err(Error::SingularEstimate),
    }
}

/// Latent-score extraction `δ̂_t = U' Z_t`, one row per observation.
pub fn latent_scores(est: &RRCovEstimate, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if est.rank() == 0 {
        return Err(Error::InvalidRank {
            d: 0,
            min: 1,
            max: est.dim().saturating_sub(1),
        });
    }
    if z.ncols() != est.dim() {
        return Err(Error::InvalidInput(format!(
            "observation dimension {} does not match estimate dimension {}",
            z.ncols(),
            est.dim()
        )));
    }
    Ok(z * &est.u)
}

/// Conditional contemporaneous covariance between components `i != j`:
/// the weighted inner product `u_i' diag(λ) u_j` of rows of `U`.
pub fn contemporaneous_cov(est: &RRCovEstimate, i: usize, j: usize) -> Result<f64> {
    let k = est.dim();
    if i >= k || j >= k {
        return Err(Error::InvalidInput(format!(
            "index out of range: ({i}, {j}) for dimension {k}"
        )));
    }
    if i == j {
        return Err(Error::InvalidInput(
            "variance queries go through full_matrix()".into(),
        ));
    }
    let mut out = 0.0;
    for (c, &l) in est.lambda.iter().enumerate() {
        out += est.u[(i, c)] * l * est.u[(j, c)];
    }
    Ok(out)
}
