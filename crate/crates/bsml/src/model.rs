//! Model state, priors and likelihood for the factorized regression
//! `Y = X B Aᵀ + E` with horseshoe priors on the columns of `B`,
//! standard normal entries of `A`, and diagonal or inverse-Wishart noise.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{spd_factor_dense, spd_inverse};

/// Design and (column-centered) response matrices.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array2<f64>,
    centered: bool,
}

impl Dataset {
    /// Validates shapes and finiteness. When `centered` is set, every
    /// response column must have mean zero within `1e-8`; the library
    /// asserts centering rather than performing it.
    pub fn new(x: Array2<f64>, y: Array2<f64>, centered: bool) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::contract(format!("need n >= 2 observations, got {n}")));
        }
        if y.nrows() != n {
            return Err(Error::contract(format!(
                "X has {n} rows but Y has {}",
                y.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("dataset entries must be finite"));
        }
        if centered {
            for (h, col) in y.columns().into_iter().enumerate() {
                let mean = col.sum() / n as f64;
                if mean.abs() > 1e-8 {
                    return Err(Error::contract(format!(
                        "response column {h} has mean {mean:e}, expected centered data"
                    )));
                }
            }
        }
        Ok(Dataset { x, y, centered })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn centered(&self) -> bool {
        self.centered
    }
}

/// Noise covariance state: independent per-response variances or a full
/// symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub enum NoiseState {
    Diagonal { sigma2: Array1<f64> },
    Full { sigma: Array2<f64> },
}

impl NoiseState {
    pub fn q(&self) -> usize {
        match self {
            NoiseState::Diagonal { sigma2 } => sigma2.len(),
            NoiseState::Full { sigma } => sigma.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseState::Diagonal { sigma2 } => {
                if sigma2.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::contract("noise variances must be positive and finite"));
                }
            }
            NoiseState::Full { sigma } => {
                if sigma.nrows() != sigma.ncols() {
                    return Err(Error::contract("noise covariance must be square"));
                }
                for i in 0..sigma.nrows() {
                    for j in 0..i {
                        if (sigma[[i, j]] - sigma[[j, i]]).abs()
                            > 1e-8 * sigma[[i, i]].abs().max(1.0)
                        {
                            return Err(Error::contract("noise covariance must be symmetric"));
                        }
                    }
                }
                spd_factor_dense(sigma.view())
                    .map_err(|_| Error::contract("noise covariance must be positive definite"))?;
            }
        }
        Ok(())
    }

    /// Whitening matrix `W` with `Wᵀ W = Σ⁻¹`; multiplying rows of data by
    /// `Wᵀ` (columns by `W`) gives unit noise covariance. For the full
    /// case `W = Kᵀ` where `K Kᵀ` is the Cholesky factorization of `Σ⁻¹`.
    pub fn whitener(&self) -> Result<Array2<f64>> {
        match self {
            NoiseState::Diagonal { sigma2 } => {
                let q = sigma2.len();
                let mut w = Array2::zeros((q, q));
                for h in 0..q {
                    if sigma2[h] <= 0.0 {
                        return Err(Error::numerical("non-positive noise variance", sigma2[h]));
                    }
                    w[[h, h]] = 1.0 / sigma2[h].sqrt();
                }
                Ok(w)
            }
            NoiseState::Full { sigma } => {
                let inv = spd_inverse(sigma.view())?;
                let f = spd_factor_dense(inv.view())?;
                Ok(f.lower().t().to_owned())
            }
        }
    }

    /// `ln |Σ|`.
    pub fn log_det(&self) -> Result<f64> {
        match self {
            NoiseState::Diagonal { sigma2 } => Ok(sigma2.iter().map(|v| v.ln()).sum()),
            NoiseState::Full { sigma } => Ok(spd_factor_dense(sigma.view())?.log_det()),
        }
    }

    /// Σ⁻¹ as a dense matrix.
    pub fn precision(&self) -> Result<Array2<f64>> {
        match self {
            NoiseState::Diagonal { sigma2 } => {
                let q = sigma2.len();
                let mut p = Array2::zeros((q, q));
                for h in 0..q {
                    p[[h, h]] = 1.0 / sigma2[h];
                }
                Ok(p)
            }
            NoiseState::Full { sigma } => spd_inverse(sigma.view()),
        }
    }
}

/// All sampled parameters at one sweep. The coefficient matrix `C = B Aᵀ`
/// is never stored; it is recomputed where needed.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// `p x q*` factor carrying the horseshoe-shrunk coefficients.
    pub b: Array2<f64>,
    /// `q x q*` factor with standard normal prior.
    pub a: Array2<f64>,
    /// Local scales, one per entry of `b`.
    pub lambda: Array2<f64>,
    /// Global scales, one per column of `b`.
    pub tau: Array1<f64>,
    pub noise: NoiseState,
}

impl ChainState {
    pub fn new(
        b: Array2<f64>,
        a: Array2<f64>,
        lambda: Array2<f64>,
        tau: Array1<f64>,
        noise: NoiseState,
    ) -> Result<Self> {
        let st = ChainState {
            b,
            a,
            lambda,
            tau,
            noise,
        };
        st.validate()?;
        Ok(st)
    }

    /// Postulated rank `q*`.
    pub fn rank_bound(&self) -> usize {
        self.b.ncols()
    }

    /// `C = B Aᵀ`, recomputed on demand.
    pub fn coefficient(&self) -> Array2<f64> {
        self.b.dot(&self.a.t())
    }

    pub fn validate(&self) -> Result<()> {
        let (p, qs) = (self.b.nrows(), self.b.ncols());
        let q = self.a.nrows();
        if self.a.ncols() != qs || self.lambda.dim() != (p, qs) || self.tau.len() != qs {
            return Err(Error::contract("chain state shapes are inconsistent"));
        }
        if qs > q {
            return Err(Error::contract(format!(
                "postulated rank {qs} exceeds the number of responses {q}"
            )));
        }
        if self.b.iter().any(|v| !v.is_finite()) || self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("factors must be finite"));
        }
        if self
            .lambda
            .iter()
            .chain(self.tau.iter())
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::contract("scales must be positive and finite"));
        }
        if self.noise.q() != q {
            return Err(Error::contract("noise dimension does not match responses"));
        }
        self.noise.validate()
    }
}

/// Noise model selected for the Gibbs run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Independent variances with improper `1/σ²` priors.
    Diagonal,
    /// Full covariance with an inverse-Wishart(q, I) prior.
    InverseWishart,
}

/// Gibbs run configuration.
#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Fractional likelihood power in `(0, 1]`.
    pub alpha: f64,
    /// Postulated rank `q*`; `None` means the full `q`.
    pub postulated_rank: Option<usize>,
    pub noise_model: NoiseModel,
    pub seed: u64,
    /// Retain every kept coefficient draw instead of a bounded reservoir.
    pub store_draws: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            alpha: 1.0,
            postulated_rank: None,
            noise_model: NoiseModel::Diagonal,
            seed: 0,
            store_draws: false,
        }
    }
}

impl GibbsConfig {
    /// Validates against a dataset with `q` responses and resolves `q*`.
    pub fn resolve_rank(&self, q: usize) -> Result<usize> {
        if self.burn_in >= self.iterations {
            return Err(Error::contract(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::contract("thin must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::contract(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        let qs = self.postulated_rank.unwrap_or(q);
        if qs == 0 || qs > q {
            return Err(Error::contract(format!(
                "postulated rank {qs} must lie in [1, {q}]"
            )));
        }
        Ok(qs)
    }

    /// Number of retained draws, `floor((iterations - burn_in) / thin)`.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Posterior mean and pointwise credible bounds of the coefficient matrix.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Posterior mean of `C` over retained draws.
    pub c_mean: Array2<f64>,
    /// Lower credible bound at `level`.
    pub c_lo: Array2<f64>,
    /// Upper credible bound at `level`.
    pub c_hi: Array2<f64>,
    /// Credible level of `(c_lo, c_hi)`.
    pub level: f64,
    /// Retained draw count.
    pub kept: usize,
    /// Subsample of retained draws backing the quantiles (all of them when
    /// `store_draws` was set or the chain is short).
    pub samples: Vec<Array2<f64>>,
    /// Full retained draws, present only when requested.
    pub draws: Option<Vec<Array2<f64>>>,
}

impl PosteriorSummary {
    /// Draws backing the quantiles: the full set when stored, otherwise
    /// the reservoir subsample.
    pub fn quantile_basis(&self) -> &[Array2<f64>] {
        match &self.draws {
            Some(d) => d,
            None => &self.samples,
        }
    }

    /// Equal-tail empirical quantile bounds at credible level `gamma`,
    /// recomputed from the stored samples.
    pub fn credible_bounds(&self, gamma: f64) -> Result<(Array2<f64>, Array2<f64>)> {
        if !(0.0 < gamma && gamma < 1.0) {
            return Err(Error::contract("credible level must lie in (0, 1)"));
        }
        let basis = self.quantile_basis();
        if basis.is_empty() {
            return Err(Error::contract("no stored samples to compute bounds from"));
        }
        let (p, q) = self.c_mean.dim();
        let mut lo = Array2::zeros((p, q));
        let mut hi = Array2::zeros((p, q));
        let mut buf = vec![0.0; basis.len()];
        for j in 0..p {
            for h in 0..q {
                for (k, s) in basis.iter().enumerate() {
                    buf[k] = s[[j, h]];
                }
                buf.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
                lo[[j, h]] = empirical_quantile(&buf, (1.0 - gamma) / 2.0);
                hi[[j, h]] = empirical_quantile(&buf, (1.0 + gamma) / 2.0);
            }
        }
        Ok((lo, hi))
    }
}

/// Linear-interpolation empirical quantile of a sorted slice.
pub(crate) fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Joint log prior density of a state, up to additive constants that do
/// not depend on the state: Gaussian terms for `B | scales` and `A`,
/// half-Cauchy terms for every scale, and the noise prior (`∝ 1/σ²` per
/// variance in the diagonal model, inverse-Wishart(q, I) in the full one).
pub fn log_prior_density(state: &ChainState) -> Result<f64> {
    let (p, qs) = (state.b.nrows(), state.b.ncols());
    for v in state.lambda.iter().chain(state.tau.iter()) {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::contract("scales must be positive and finite"));
        }
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for j in 0..p {
        for h in 0..qs {
            let sd = state.lambda[[j, h]] * state.tau[h];
            let b = state.b[[j, h]];
            total += -0.5 * ln_2pi - sd.ln() - b * b / (2.0 * sd * sd);
        }
    }
    for a in state.a.iter() {
        total += -0.5 * ln_2pi - a * a / 2.0;
    }
    let half_cauchy = |t: f64| (2.0 / std::f64::consts::PI).ln() - (1.0 + t * t).ln();
    total += state.lambda.iter().map(|l| half_cauchy(*l)).sum::<f64>();
    total += state.tau.iter().map(|t| half_cauchy(*t)).sum::<f64>();
    match &state.noise {
        NoiseState::Diagonal { sigma2 } => {
            total += sigma2.iter().map(|s| -s.ln()).sum::<f64>();
        }
        NoiseState::Full { sigma } => {
            let q = sigma.nrows() as f64;
            let f = spd_factor_dense(sigma.view())?;
            let log_det = f.log_det();
            let trace_inv = spd_inverse(sigma.view())?.diag().sum();
            // inverse-Wishart(ν = q, Ψ = I) kernel
            total += -(2.0 * q + 1.0) / 2.0 * log_det - 0.5 * trace_inv;
        }
    }
    Ok(total)
}

/// `alpha` times the exact Gaussian log likelihood of `Y` given
/// `C = B Aᵀ` and the noise state.
pub fn loglik(state: &ChainState, data: &Dataset, alpha: f64) -> Result<f64> {
    let n = data.n() as f64;
    let q = data.q();
    if state.a.nrows() != q || state.b.nrows() != data.p() {
        return Err(Error::contract("state dimensions do not match the dataset"));
    }
    let resid = &data.y().to_owned() - &data.x().dot(&state.coefficient());
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let (log_det, quad) = match &state.noise {
        NoiseState::Diagonal { sigma2 } => {
            let mut quad = 0.0;
            for h in 0..q {
                let s = resid.column(h).mapv(|v| v * v).sum();
                quad += s / sigma2[h];
            }
            (state.noise.log_det()?, quad)
        }
        NoiseState::Full { sigma } => {
            let f = spd_factor_dense(sigma.view())
                .map_err(|_| Error::numerical("noise covariance not positive definite", f64::NAN))?;
            // tr(R Σ⁻¹ Rᵀ) = ‖L⁻¹Rᵀ‖²_F
            let mut quad = 0.0;
            let mut col = vec![0.0; q];
            for i in 0..resid.nrows() {
                for h in 0..q {
                    col[h] = resid[[i, h]];
                }
                f.solve_lower_in_place(&mut col);
                quad += col.iter().map(|v| v * v).sum::<f64>();
            }
            (f.log_det(), quad)
        }
    };
    Ok(alpha * (-0.5 * (n * q as f64 * ln_2pi + n * log_det + quad)))
}
