//! Gaussian-mixture latent prior and mixture log-densities.
//!
//! Covariances are parameterized through factors `A_k` with
//! `Σ_k = A_k A_kᵀ`. A static prior built with `sigma_init` has
//! `Σ_k = sigma_init · I`, so its factors are `√sigma_init · I`. At sampling
//! time a [`SigmaScale`] `s` multiplies every covariance, i.e. the factor is
//! scaled by `√s`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tape, Tensor, Var};

pub const PRIOR_LABEL: &str = "prior";
const MEAN: &str = "mu";
const FACTOR: &str = "cov_factor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Means and covariances fixed after initialization.
    Static,
    /// Means and covariance factors are trained with the generator.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    /// One factor entry per latent coordinate (`K×d` parameters).
    Diagonal,
    /// A dense `d×d` factor per component.
    Full,
}

/// Post-training covariance multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaScale(f64);

impl SigmaScale {
    pub const ONE: SigmaScale = SigmaScale(1.0);

    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("sigma scale must be > 0, got {scale}")));
        }
        Ok(SigmaScale(scale))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for SigmaScale {
    fn default() -> Self {
        Self::ONE
    }
}

/// `K`-component Gaussian mixture over the `d`-dimensional latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePrior {
    k: usize,
    d: usize,
    alpha: Vec<f64>,
    mode: PriorMode,
    covariance: CovarianceKind,
    params: ParamStore,
}

impl MixturePrior {
    /// Means drawn from `U[-c, c]^d`, `Σ_k = sigma_init · I`, uniform weights.
    pub fn init_static<R: Rng + ?Sized>(
        k: usize,
        d: usize,
        c: f64,
        sigma_init: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Parameter(format!(
                "mixture needs K ≥ 1 and d ≥ 1, got K={k}, d={d}"
            )));
        }
        if !(sigma_init > 0.0 && sigma_init.is_finite()) {
            return Err(Error::Parameter(format!("sigma_init must be > 0, got {sigma_init}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("mean range c must be ≥ 0, got {c}")));
        }
        let means: Vec<f64> = if c == 0.0 {
            vec![0.0; k * d]
        } else {
            let u = Uniform::new_inclusive(-c, c).expect("c > 0");
            (0..k * d).map(|_| u.sample(rng)).collect()
        };
        Self::from_diagonal(
            Tensor::new(vec![k, d], means)?,
            Tensor::filled(&[k, d], sigma_init.sqrt()),
            vec![1.0 / k as f64; k],
        )
    }

    /// The single standard normal N(0, I) used by the baseline models.
    pub fn standard_normal(d: usize) -> Result<Self> {
        Self::replicated_standard_normal(1, d)
    }

    /// `k` identical N(0, I) components; a categorical index with no
    /// influence on `z`.
    pub fn replicated_standard_normal(k: usize, d: usize) -> Result<Self> {
        Self::from_diagonal(
            Tensor::zeros(&[k, d]),
            Tensor::filled(&[k, d], 1.0),
            vec![1.0 / k as f64; k],
        )
    }

    /// Prior from explicit `K×d` means and diagonal factors.
    pub fn from_diagonal(means: Tensor, factors: Tensor, alpha: Vec<f64>) -> Result<Self> {
        let (k, d) = (means.rows(), means.cols());
        if factors.shape() != [k, d] {
            return Err(Error::Dimension(format!(
                "diagonal factors {:?} for {k}×{d} means",
                factors.shape()
            )));
        }
        Self::assemble(means, factors, alpha, CovarianceKind::Diagonal)
    }

    /// Prior from explicit `K×d` means and dense `K×d×d` factors.
    pub fn from_full(means: Tensor, factors: Tensor, alpha: Vec<f64>) -> Result<Self> {
        let (k, d) = (means.rows(), means.cols());
        if factors.shape() != [k, d, d] {
            return Err(Error::Dimension(format!(
                "full factors {:?} for {k}×{d} means",
                factors.shape()
            )));
        }
        Self::assemble(means, factors, alpha, CovarianceKind::Full)
    }

    fn assemble(
        means: Tensor,
        factors: Tensor,
        alpha: Vec<f64>,
        covariance: CovarianceKind,
    ) -> Result<Self> {
        let (k, d) = (means.rows(), means.cols());
        if k == 0 || d == 0 {
            return Err(Error::Parameter("empty mixture".into()));
        }
        validate_weights(&alpha, k)?;
        let means = means.reshape(vec![k, d])?;
        let mut params = ParamStore::new(PRIOR_LABEL);
        params.insert(MEAN, means)?;
        params.insert(FACTOR, factors)?;
        Ok(MixturePrior {
            k,
            d,
            alpha,
            mode: PriorMode::Static,
            covariance,
            params,
        })
    }

    /// Switches to the learnable variant. Requesting [`CovarianceKind::Full`]
    /// expands diagonal factors into dense ones.
    pub fn into_dynamic(mut self, covariance: CovarianceKind) -> Self {
        if covariance == CovarianceKind::Full && self.covariance == CovarianceKind::Diagonal {
            let (k, d) = (self.k, self.d);
            let diag = self.params.get(FACTOR).expect("present").data().to_vec();
            let mut full = vec![0.0; k * d * d];
            for c in 0..k {
                for i in 0..d {
                    full[c * d * d + i * d + i] = diag[c * d + i];
                }
            }
            *self.params.get_mut(FACTOR).expect("present") =
                Tensor::new(vec![k, d, d], full).expect("sized");
            self.covariance = CovarianceKind::Full;
        }
        self.mode = PriorMode::Dynamic;
        self
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn covariance_kind(&self) -> CovarianceKind {
        self.covariance
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        self.params.get(MEAN).expect("present").row(k)
    }

    fn factor_data(&self) -> &[f64] {
        self.params.get(FACTOR).expect("present").data()
    }

    /// Dense covariance `A_k A_kᵀ` of component `k` (row-major `d×d`).
    pub fn covariance(&self, k: usize) -> Vec<f64> {
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        match self.covariance {
            CovarianceKind::Diagonal => {
                for i in 0..d {
                    let a = self.factor_data()[k * d + i];
                    cov[i * d + i] = a * a;
                }
            }
            CovarianceKind::Full => {
                let a = &self.factor_data()[k * d * d..(k + 1) * d * d];
                for i in 0..d {
                    for j in 0..d {
                        cov[i * d + j] = (0..d).map(|m| a[i * d + m] * a[j * d + m]).sum();
                    }
                }
            }
        }
        cov
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.k {
            return Err(Error::Parameter(format!(
                "component {k} out of range for K={}",
                self.k
            )));
        }
        Ok(())
    }

    /// Draws a component index from the categorical `alpha`.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.k == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, a) in self.alpha.iter().enumerate() {
            acc += a;
            if u < acc {
                return i;
            }
        }
        // Rounding left `u` above the cumulative sum; fall back to the last
        // component with positive weight.
        self.alpha.iter().rposition(|&a| a > 0.0).unwrap_or(0)
    }

    /// `z = √scale · A_k ε + μ_k` for a given standard-normal `eps`.
    pub fn latent_from_noise(&self, k: usize, eps: &[f64], scale: SigmaScale) -> Result<Vec<f64>> {
        self.check_component(k)?;
        if eps.len() != self.d {
            return Err(Error::Dimension(format!(
                "noise of length {} for d={}",
                eps.len(),
                self.d
            )));
        }
        let d = self.d;
        let root = scale.get().sqrt();
        let mu = self.mean(k);
        let mut z = vec![0.0; d];
        match self.covariance {
            CovarianceKind::Diagonal => {
                let a = &self.factor_data()[k * d..(k + 1) * d];
                for i in 0..d {
                    z[i] = root * (a[i] * eps[i]) + mu[i];
                }
            }
            CovarianceKind::Full => {
                let a = &self.factor_data()[k * d * d..(k + 1) * d * d];
                for i in 0..d {
                    let dot: f64 = a[i * d..(i + 1) * d].iter().zip(eps).map(|(p, q)| p * q).sum();
                    z[i] = root * dot + mu[i];
                }
            }
        }
        Ok(z)
    }

    /// One latent draw from component `k`.
    pub fn sample_latent<R: Rng + ?Sized>(
        &self,
        k: usize,
        scale: SigmaScale,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_component(k)?;
        let eps = standard_normal_vec(self.d, rng);
        self.latent_from_noise(k, &eps, scale)
    }

    /// Marginal draws: a component index then a latent per row.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        n: usize,
        scale: SigmaScale,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Tensor)> {
        let mut ks = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n * self.d);
        for _ in 0..n {
            let k = self.sample_component(rng);
            z.extend(self.sample_latent(k, scale, rng)?);
            ks.push(k);
        }
        Ok((ks, Tensor::new(vec![n, self.d], z)?))
    }

    /// `n` draws from the fixed component `k`.
    pub fn sample_from_component<R: Rng + ?Sized>(
        &self,
        k: usize,
        n: usize,
        scale: SigmaScale,
        rng: &mut R,
    ) -> Result<Tensor> {
        let mut z = Vec::with_capacity(n * self.d);
        for _ in 0..n {
            z.extend(self.sample_latent(k, scale, rng)?);
        }
        Tensor::new(vec![n, self.d], z)
    }

    /// Records the reparameterized batch `z_b = √scale · A_{k_b} ε_b + μ_{k_b}`
    /// on `tape`. With `trainable` the means and factors are tape parameters
    /// whose gradients can be accumulated into [`params_mut`](Self::params_mut).
    pub fn latent_on_tape(
        &self,
        tape: &mut Tape,
        components: &[usize],
        eps: Tensor,
        scale: SigmaScale,
        trainable: bool,
    ) -> Result<Var> {
        if eps.rows() != components.len() || eps.cols() != self.d {
            return Err(Error::Dimension(format!(
                "noise {:?} for {} components of dimension {}",
                eps.shape(),
                components.len(),
                self.d
            )));
        }
        if let Some(&bad) = components.iter().find(|&&k| k >= self.k) {
            return Err(Error::Parameter(format!(
                "component {bad} out of range for K={}",
                self.k
            )));
        }
        let (mu, factor) = if trainable {
            (tape.param(&self.params, MEAN)?, tape.param(&self.params, FACTOR)?)
        } else {
            (tape.frozen(&self.params, MEAN)?, tape.frozen(&self.params, FACTOR)?)
        };
        let eps_shape = vec![components.len(), self.d];
        let eps = tape.constant(eps.reshape(eps_shape)?);
        let mu_rows = tape.gather_rows(mu, components)?;
        let noise = match self.covariance {
            CovarianceKind::Diagonal => {
                let a = tape.gather_rows(factor, components)?;
                tape.mul(a, eps)?
            }
            CovarianceKind::Full => tape.gather_matvec(factor, components, eps)?,
        };
        let scaled = tape.affine(noise, scale.get().sqrt(), 0.0);
        tape.add(scaled, mu_rows)
    }
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn validate_weights(alpha: &[f64], k: usize) -> Result<()> {
    if alpha.len() != k {
        return Err(Error::Parameter(format!("{} weights for {k} components", alpha.len())));
    }
    if alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::Parameter("mixture weights must be finite and ≥ 0".into()));
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("mixture weights sum to {total}, not 1")));
    }
    Ok(())
}

/// A Gaussian mixture with precomputed Cholesky factors, for repeated
/// log-density evaluation.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    d: usize,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Lower-triangular Cholesky factors, row-major `d×d`.
    chol: Vec<Vec<f64>>,
    /// `-½ (d log 2π + log det Σ)` per component.
    log_norm: Vec<f64>,
}

impl GaussianMixture {
    /// `covariances` are row-major `d×d` matrices, one per mean.
    pub fn new(means: Vec<Vec<f64>>, covariances: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = means.len();
        if m == 0 {
            return Err(Error::Parameter("mixture has no components".into()));
        }
        if covariances.len() != m {
            return Err(Error::Dimension(format!(
                "{} covariances for {m} means",
                covariances.len()
            )));
        }
        validate_weights(&weights, m)?;
        let d = means[0].len();
        let mut chol = Vec::with_capacity(m);
        let mut log_norm = Vec::with_capacity(m);
        for (mu, cov) in means.iter().zip(&covariances) {
            if mu.len() != d || cov.len() != d * d {
                return Err(Error::Dimension(format!(
                    "component of dimension {} with {}-entry covariance, expected {d}",
                    mu.len(),
                    cov.len()
                )));
            }
            let l = cholesky(cov, d)?;
            let log_det: f64 = (0..d).map(|i| 2.0 * l[i * d + i].ln()).sum();
            log_norm.push(-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det));
            chol.push(l);
        }
        Ok(GaussianMixture {
            d,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            means,
            chol,
            log_norm,
        })
    }

    /// Shared isotropic covariance `variance · I` for every component.
    pub fn isotropic(means: Vec<Vec<f64>>, variance: f64, weights: Vec<f64>) -> Result<Self> {
        let d = means.first().map_or(0, Vec::len);
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = variance;
        }
        let covs = vec![cov; means.len()];
        Self::new(means, covs, weights)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Log-density of component `m` at `x`.
    pub fn component_log_density(&self, m: usize, x: &[f64]) -> f64 {
        let d = self.d;
        let l = &self.chol[m];
        // Solve L y = (x - μ) by forward substitution; quadratic form is |y|².
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.means[m][i];
            for j in 0..i {
                s -= l[i * d + j] * y[j];
            }
            y[i] = s / l[i * d + i];
        }
        let quad: f64 = y.iter().map(|v| v * v).sum();
        self.log_norm[m] - 0.5 * quad
    }

    /// `log Σ_m w_m N(x; μ_m, Σ_m)` via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Dimension(format!(
                "point of dimension {} for a {}-dimensional mixture",
                x.len(),
                self.d
            )));
        }
        let terms: Vec<f64> = (0..self.means.len())
            .map(|m| self.log_weights[m] + self.component_log_density(m, x))
            .collect();
        Ok(log_sum_exp(&terms))
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Numeric(format!(
                        "covariance is not positive definite (pivot {i} = {s})"
                    )));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// `log Σ_m w_m N(x; μ_m, Σ_m)` for a single point.
pub fn mixture_log_density(
    means: &[Vec<f64>],
    covariances: &[Vec<f64>],
    weights: &[f64],
    x: &[f64],
) -> Result<f64> {
    GaussianMixture::new(means.to_vec(), covariances.to_vec(), weights.to_vec())?.log_density(x)
}
