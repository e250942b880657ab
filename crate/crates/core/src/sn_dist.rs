//! The skew-normal family `SN(μ, σ, γ)` with density `(2/σ) φ(z) Φ(γz)`, `z = (x−μ)/σ`.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::numerics::{find_root, inv_mills, log_norm_cdf, norm_cdf, owens_t, special, RngStream};
use crate::{Error, Result};

/// Half-width, in units of σ, of the bracket used by [`sn_quantile`].
pub const QUANTILE_BRACKET: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnParams {
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl SnParams {
    pub fn new(mu: f64, sigma: f64, gamma: f64) -> Result<Self> {
        let p = SnParams { mu, sigma, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(gamma: f64) -> Self {
        SnParams {
            mu: 0.0,
            sigma: 1.0,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.gamma.is_finite() && self.sigma.is_finite()) {
            return Err(Error::domain("skew-normal parameters must be finite"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::domain("skew-normal scale must be positive"));
        }
        Ok(())
    }

    /// `δ = γ / sqrt(1 + γ²)`
    pub fn with_location(self, mu: f64) -> Self {
        SnParams { mu, ..self }
    }

    pub fn delta(&self) -> f64 {
        delta(self.gamma)
    }
}

#[inline]
pub fn delta(gamma: f64) -> f64 {
    gamma / (1.0 + gamma * gamma).sqrt()
}

/// Regression parameter `θ = (β, σ, γ)`; flattened order is `β₁…β_p, σ, γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub gamma: f64,
}

impl ParamVector {
    pub fn new(beta: Vec<f64>, sigma: f64, gamma: f64) -> Result<Self> {
        let t = ParamVector { beta, sigma, gamma };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return Err(Error::domain("parameter vector needs at least one coefficient"));
        }
        if !self.beta.iter().all(|b| b.is_finite()) || !self.gamma.is_finite() {
            return Err(Error::domain("parameter vector entries must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("scale must be positive and finite"));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Number of free parameters, `p + 2`.
    pub fn dim(&self) -> usize {
        self.beta.len() + 2
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.sigma);
        v.push(self.gamma);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: v.len(),
            });
        }
        let p = v.len() - 2;
        ParamVector::new(v[..p].to_vec(), v[p], v[p + 1])
    }

    /// Location `μ_i = x_iᵀβ`.
    pub fn location(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    pub fn error_law(&self, x: &[f64]) -> SnParams {
        SnParams {
            mu: self.location(x),
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }
}

pub fn sn_pdf(x: f64, p: SnParams) -> f64 {
    let z = (x - p.mu) / p.sigma;
    2.0 / p.sigma * special::norm_pdf(z) * norm_cdf(p.gamma * z)
}

/// `ln` of the density; the `ln Φ` factor switches to its asymptotic series deep in
/// the lower tail so the value stays finite where `Φ(γz)` underflows.
pub fn sn_logpdf(x: f64, p: SnParams) -> f64 {
    let z = (x - p.mu) / p.sigma;
    LN_2 - p.sigma.ln() + special::log_norm_pdf(z) + log_norm_cdf(p.gamma * z)
}

/// `Φ(z) − 2T(z, γ)`, clamped to `[0, 1]`.
pub fn sn_cdf(x: f64, p: SnParams) -> f64 {
    let z = (x - p.mu) / p.sigma;
    if !z.is_finite() {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    // owens_t only fails on non-finite input, excluded above
    let t = owens_t(z, p.gamma).unwrap_or(0.0);
    (norm_cdf(z) - 2.0 * t).clamp(0.0, 1.0)
}

pub fn sn_quantile(prob: f64, p: SnParams) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::domain("quantile probability must lie in (0, 1)"));
    }
    p.validate()?;
    let lo = p.mu - QUANTILE_BRACKET * p.sigma;
    let hi = p.mu + QUANTILE_BRACKET * p.sigma;
    find_root(|x| sn_cdf(x, p) - prob, lo, hi, 1e-12)
}

/// Mean, variance and skewness.
///
/// The skewness is `½(4−π) γ³ (π/2 + (π/2−1)γ²)^{−3/2}`, which is algebraically the
/// familiar `½(4−π) (δ√(2/π))³ / (1 − 2δ²/π)^{3/2}` rewritten in terms of `γ`.
pub fn sn_moments(p: SnParams) -> (f64, f64, f64) {
    let d = p.delta();
    let mean = p.mu + p.sigma * d * (2.0 / PI).sqrt();
    let variance = p.sigma * p.sigma * (1.0 - 2.0 * d * d / PI);
    let g = p.gamma;
    let skew = 0.5 * (4.0 - PI) * g * g * g * (0.5 * PI + (0.5 * PI - 1.0) * g * g).powf(-1.5);
    (mean, variance, skew)
}

/// `n` draws via `μ + σ(δ|U| + sqrt(1−δ²) V)`.
pub fn sn_sample(n: usize, p: SnParams, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| sn_draw(p, rng)).collect()
}

/// One draw of [`sn_sample`]; consumes two standard normals.
pub fn sn_draw(p: SnParams, rng: &mut RngStream) -> f64 {
    let d = p.delta();
    let c = (1.0 - d * d).sqrt();
    let u = rng.standard_normal().abs();
    let v = rng.standard_normal();
    p.mu + p.sigma * (d * u + c * v)
}

/// Standardized score pieces `(s₁, s₂, s₃)` at `z = (y−μ)/σ`:
/// `s₁ = z − γλ`, `s₂ = z² − 1 − γzλ`, `s₃ = zλ` with `λ = φ(γz)/Φ(γz)`.
///
/// The regression score is `(s₁ x/σ, s₂/σ, s₃)`.
#[inline]
pub fn std_score(z: f64, gamma: f64) -> [f64; 3] {
    let lam = inv_mills(gamma * z);
    [z - gamma * lam, z * z - 1.0 - gamma * z * lam, z * lam]
}

/// Per-observation score `u(y, θ) = ∂/∂θ ln f(y; x_iᵀβ, σ, γ)`, ordered `(β, σ, γ)`.
pub fn score(y: f64, x: &[f64], theta: &ParamVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 2);
    score_into(y, x, theta, &mut out);
    out
}

pub(crate) fn score_into(y: f64, x: &[f64], theta: &ParamVector, out: &mut Vec<f64>) {
    let s = theta.sigma;
    let z = (y - theta.location(x)) / s;
    let [s1, s2, s3] = std_score(z, theta.gamma);
    out.clear();
    out.extend(x.iter().map(|xj| s1 * xj / s));
    out.push(s2 / s);
    out.push(s3);
}
