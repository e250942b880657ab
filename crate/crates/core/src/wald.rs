//! Wald-type tests of `m(θ) = 0` built on the MDPDE and its sandwich covariance.
//!
//! Convention: `Σ` in [`AsymptoticMatrices`] is per observation, so
//! `W_n = n · m(θ̂)ᵀ (Mᵀ Σ M)⁻¹ m(θ̂)` with `M = ∂mᵀ/∂θ`, a `(p+2) × r` matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticMatrices;
use crate::dpd_fit::FitResult;
use crate::linalg::{dependent_columns, solve_symmetric};
use crate::numerics::special::{chi2_quantile, chi2_sf, noncentral_chi2_sf};
use crate::sn_dist::ParamVector;
use crate::{Error, Result};

/// Levels at which [`wald_statistic`] records rejection decisions.
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

type RestrictionFn = dyn Fn(&ParamVector) -> Vec<f64> + Send + Sync;
type JacobianFn = dyn Fn(&ParamVector) -> DMatrix<f64> + Send + Sync;

/// Null hypothesis `m(θ) = 0_r` with Jacobian `M(θ) = ∂m(θ)ᵀ/∂θ`.
#[derive(Clone)]
pub struct HypothesisSpec {
    m: Arc<RestrictionFn>,
    jacobian: Arc<JacobianFn>,
    r: usize,
    description: String,
}

impl fmt::Debug for HypothesisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypothesisSpec")
            .field("r", &self.r)
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

impl HypothesisSpec {
    /// General restriction; `jacobian` must return a `(p+2) × r` matrix.
    pub fn new<F, G>(r: usize, description: impl Into<String>, m: F, jacobian: G) -> Result<Self>
    where
        F: Fn(&ParamVector) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(&ParamVector) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if r == 0 {
            return Err(Error::HypothesisDegenerate("a hypothesis needs r ≥ 1 restrictions".into()));
        }
        Ok(HypothesisSpec {
            m: Arc::new(m),
            jacobian: Arc::new(jacobian),
            r,
            description: description.into(),
        })
    }

    /// `L θ = c` for an `r × (p+2)` matrix `L`.
    pub fn linear(l: DMatrix<f64>, c: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        let r = l.nrows();
        if c.len() != r {
            return Err(Error::Dimension { expected: r, got: c.len() });
        }
        let dim = l.ncols();
        let lt = l.transpose();
        HypothesisSpec::new(
            r,
            description,
            move |theta| {
                if theta.dim() != dim {
                    return vec![f64::NAN; r];
                }
                let t = DVector::from_vec(theta.to_vec());
                let v = &l * t;
                v.iter().zip(&c).map(|(a, b)| a - b).collect()
            },
            move |_| lt.clone(),
        )
    }

    /// `θ_k = value` for position `k` of the stacked vector `(β, σ, γ)`.
    pub fn coefficient(k: usize, value: f64, description: impl Into<String>) -> Result<Self> {
        HypothesisSpec::new(
            1,
            description,
            move |theta| {
                let v = theta.to_vec();
                vec![v.get(k).copied().unwrap_or(f64::NAN) - value]
            },
            move |theta| {
                let mut m = DMatrix::zeros(theta.dim(), 1);
                if k < theta.dim() {
                    m[(k, 0)] = 1.0;
                }
                m
            },
        )
    }

    /// `β_j = value`.
    pub fn beta(j: usize, value: f64) -> Result<Self> {
        HypothesisSpec::coefficient(j, value, format!("beta[{j}] = {value}"))
    }

    /// `γ = 0`: the error law is normal.
    pub fn symmetry() -> Self {
        HypothesisSpec {
            m: Arc::new(|theta: &ParamVector| vec![theta.gamma]),
            jacobian: Arc::new(|theta: &ParamVector| {
                let mut m = DMatrix::zeros(theta.dim(), 1);
                m[(theta.dim() - 1, 0)] = 1.0;
                m
            }),
            r: 1,
            description: "symmetry (gamma = 0)".into(),
        }
    }

    /// Parses `"<name>=<value>"` or `"symmetry"`.
    ///
    /// `name` is a covariate name from `column_names`, `beta<j>` (0-based), `sigma`
    /// or `gamma`.
    pub fn parse(text: &str, column_names: &[String]) -> Result<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("symmetry") {
            return Ok(HypothesisSpec::symmetry());
        }
        let (name, value) = text
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("hypothesis `{text}` is not of the form NAME=VALUE or `symmetry`")))?;
        let name = name.trim();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("hypothesis value `{}` is not a number", value.trim())))?;
        let p = column_names.len();
        let k = if let Some(j) = column_names.iter().position(|c| c == name) {
            j
        } else if name == "sigma" {
            p
        } else if name == "gamma" {
            p + 1
        } else if let Some(j) = name.strip_prefix("beta").and_then(|s| s.parse::<usize>().ok()) {
            if j >= p {
                return Err(Error::domain(format!("`{name}` is out of range for {p} coefficients")));
            }
            j
        } else {
            return Err(Error::domain(format!("unknown parameter `{name}` in hypothesis")));
        };
        HypothesisSpec::coefficient(k, value, format!("{name} = {value}"))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `m(θ)`, checked to have length `r`.
    pub fn restriction(&self, theta: &ParamVector) -> Result<DVector<f64>> {
        let v = (self.m)(theta);
        if v.len() != self.r {
            return Err(Error::Dimension { expected: self.r, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("restriction m(θ) is not finite"));
        }
        Ok(DVector::from_vec(v))
    }

    /// `M(θ)`, checked for shape and full column rank.
    pub fn jacobian(&self, theta: &ParamVector) -> Result<DMatrix<f64>> {
        let m = (self.jacobian)(theta);
        if m.nrows() != theta.dim() {
            return Err(Error::Dimension { expected: theta.dim(), got: m.nrows() });
        }
        if m.ncols() != self.r {
            return Err(Error::Dimension { expected: self.r, got: m.ncols() });
        }
        if self.r > theta.dim() || !dependent_columns(&m).is_empty() {
            return Err(Error::HypothesisDegenerate(format!(
                "M(θ) for `{}` does not have full column rank {}",
                self.description, self.r
            )));
        }
        Ok(m)
    }

    /// Positions of `θ` with a nonzero row in `M(θ)`.
    pub fn row_support(&self, theta: &ParamVector) -> Result<Vec<usize>> {
        let m = self.jacobian(theta)?;
        Ok((0..m.nrows()).filter(|&i| m.row(i).iter().any(|v| *v != 0.0)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub level: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub description: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub reject_at: Vec<LevelDecision>,
    pub alpha: f64,
}

impl TestResult {
    pub fn rejects_at(&self, level: f64) -> Option<bool> {
        self.reject_at.iter().find(|d| d.level == level).map(|d| d.reject)
    }
}

/// Memo of `χ²_{r,τ}` keyed on `(r, τ)`.
#[derive(Debug, Clone, Default)]
pub struct CriticalValues {
    cache: BTreeMap<(usize, u64), f64>,
}

impl CriticalValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, r: usize, tau: f64) -> Result<f64> {
        let key = (r, tau.to_bits());
        if let Some(&q) = self.cache.get(&key) {
            return Ok(q);
        }
        let q = chi2_quantile(r as f64, tau)?;
        self.cache.insert(key, q);
        Ok(q)
    }
}

/// `Mᵀ Σ M`, inverted through a symmetric solve; singular → degenerate hypothesis.
fn inner_inverse(m: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inner = m.transpose() * sigma * m;
    let id = DMatrix::identity(inner.nrows(), inner.nrows());
    solve_symmetric(&inner, &id).map_err(|e| match e {
        Error::Singular { condition } => {
            Error::HypothesisDegenerate(format!("Mᵀ Σ M is singular (condition number {condition:e})"))
        }
        other => other,
    })
}

/// `Q_α(θ) = M (Mᵀ Σ_α M)⁻¹ Mᵀ`.
pub fn q_matrix(hyp: &HypothesisSpec, theta: &ParamVector, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_sigma(theta, sigma)?;
    let m = hyp.jacobian(theta)?;
    let inv = inner_inverse(&m, sigma)?;
    Ok(&m * inv * m.transpose())
}

fn check_sigma(theta: &ParamVector, sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != theta.dim() || sigma.ncols() != theta.dim() {
        return Err(Error::Dimension { expected: theta.dim(), got: sigma.nrows() });
    }
    Ok(())
}

/// Bare `W_n` at `θ` for a sample of size `n`.
pub fn statistic(theta: &ParamVector, sigma: &DMatrix<f64>, hyp: &HypothesisSpec, n: usize) -> Result<f64> {
    check_sigma(theta, sigma)?;
    let mv = hyp.restriction(theta)?;
    let m = hyp.jacobian(theta)?;
    let inv = inner_inverse(&m, sigma)?;
    let w = n as f64 * mv.dot(&(&inv * &mv));
    // a quadratic form in a PD matrix; clip rounding below zero
    Ok(w.max(0.0))
}

/// Wald-type test of `hyp` at `θ̂`, recording decisions at [`DEFAULT_LEVELS`].
pub fn wald_statistic(fit: &FitResult, am: &AsymptoticMatrices, hyp: &HypothesisSpec) -> Result<TestResult> {
    wald_test_at(fit, am, hyp, &DEFAULT_LEVELS, &mut CriticalValues::new())
}

/// As [`wald_statistic`] with caller-chosen levels and a shared quantile cache.
pub fn wald_test_at(
    fit: &FitResult,
    am: &AsymptoticMatrices,
    hyp: &HypothesisSpec,
    levels: &[f64],
    critical: &mut CriticalValues,
) -> Result<TestResult> {
    if !fit.converged {
        return Err(Error::domain("Wald-type test requested on a fit that did not converge"));
    }
    let n = fit.residuals.len();
    let w = statistic(&fit.theta_hat, &am.sigma, hyp, n)?;
    let r = hyp.r();
    let reject_at = levels
        .iter()
        .map(|&level| {
            Ok(LevelDecision {
                level,
                reject: w > critical.get(r, level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestResult {
        description: hyp.description().to_string(),
        statistic: w,
        df: r,
        p_value: chi2_sf(r as f64, w).clamp(0.0, 1.0),
        reject_at,
        alpha: fit.alpha,
    })
}

/// Simplified scalar form `n (θ̂_k − value)² / Σ_kk`.
pub fn scalar_statistic(fit: &FitResult, am: &AsymptoticMatrices, k: usize, value: f64) -> Result<f64> {
    let v = fit.theta_hat.to_vec();
    let t = *v.get(k).ok_or(Error::Dimension { expected: v.len(), got: k + 1 })?;
    let s = am.sigma[(k, k)];
    if !(s > 0.0) {
        return Err(Error::HypothesisDegenerate(format!("Σ_{k}{k} = {s:e} is not positive")));
    }
    Ok(fit.residuals.len() as f64 * (t - value).powi(2) / s)
}

/// Approximate power `1 − G_{χ²_r(δ)}(χ²_{r,τ})` at the contiguous alternative
/// `θ₀ + n^{−1/2} d`, with `δ = dᵀ Q_α(θ₀) d`.
pub fn contiguous_power(
    theta0: &ParamVector,
    hyp: &HypothesisSpec,
    d: &[f64],
    tau: f64,
    am: &AsymptoticMatrices,
) -> Result<f64> {
    check_null(theta0, hyp)?;
    let delta = noncentrality(theta0, hyp, d, am)?;
    let r = hyp.r() as f64;
    if delta == 0.0 {
        // central case: the power is the size
        return Ok(tau);
    }
    let q = chi2_quantile(r, tau)?;
    noncentral_chi2_sf(r, delta, q)
}

/// `δ = dᵀ Q_α(θ₀) d`.
pub fn noncentrality(theta0: &ParamVector, hyp: &HypothesisSpec, d: &[f64], am: &AsymptoticMatrices) -> Result<f64> {
    if d.len() != theta0.dim() {
        return Err(Error::Dimension { expected: theta0.dim(), got: d.len() });
    }
    let q = q_matrix(hyp, theta0, &am.sigma)?;
    let dv = DVector::from_column_slice(d);
    Ok(dv.dot(&(&q * &dv)).max(0.0))
}

/// Rejects `θ₀` outside the null set (`|m(θ₀)| > 1e−8 · (1 + ‖θ₀‖)`).
pub(crate) fn check_null(theta0: &ParamVector, hyp: &HypothesisSpec) -> Result<()> {
    let m = hyp.restriction(theta0)?;
    let scale = 1.0 + theta0.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt();
    if m.amax() > 1e-8 * scale {
        return Err(Error::domain(format!(
            "θ₀ does not satisfy `{}` (|m(θ₀)| = {:e})",
            hyp.description(),
            m.amax()
        )));
    }
    Ok(())
}

/// One scalar test `β_j = 0` per coefficient, then the symmetry test `γ = 0`.
pub fn significance_tests(fit: &FitResult, am: &AsymptoticMatrices) -> Result<Vec<TestResult>> {
    let names: Vec<String> = (0..fit.theta_hat.p()).map(|j| format!("beta[{j}]")).collect();
    significance_tests_named(fit, am, &names)
}

/// [`significance_tests`] with coefficient names used in the descriptions.
pub fn significance_tests_named(fit: &FitResult, am: &AsymptoticMatrices, names: &[String]) -> Result<Vec<TestResult>> {
    let p = fit.theta_hat.p();
    if names.len() != p {
        return Err(Error::Dimension { expected: p, got: names.len() });
    }
    let mut critical = CriticalValues::new();
    let mut out = Vec::with_capacity(p + 1);
    for (j, name) in names.iter().enumerate() {
        let hyp = HypothesisSpec::coefficient(j, 0.0, format!("{name} = 0"))?;
        out.push(wald_test_at(fit, am, &hyp, &DEFAULT_LEVELS, &mut critical)?);
    }
    out.push(wald_test_at(fit, am, &HypothesisSpec::symmetry(), &DEFAULT_LEVELS, &mut critical)?);
    Ok(out)
}
