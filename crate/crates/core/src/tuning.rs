//! Data-driven choice of `α` by the iterated Warwick–Jones (IWJ) algorithm.
//!
//! For a pilot `θ̂_P` the empirical asymptotic MSE of the fit at `α` is
//!
//! ```text
//! AMSE(α) = ‖θ̂_α − θ̂_P‖² + tr Σ_α(θ̂_α) / n
//! ```
//!
//! IWJ minimizes it over a grid, makes the minimizer the next pilot, and repeats until
//! the chosen `α` stops changing. The grid fits do not depend on the pilot, so they
//! are computed once; each grid fit is warm-started from its left neighbour.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{attach_standard_errors, sandwich};
use crate::dpd_fit::{fit, FitConfig, FitResult, RegressionData};
use crate::sn_dist::ParamVector;
use crate::wald::HypothesisSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Number of equispaced `α` values in `[0, 1]`.
    pub grid_size: usize,
    pub pilot_alpha: f64,
    pub max_rounds: usize,
    /// Optimizer settings shared by all fits; its `alpha` and `warm_start` are overridden.
    pub fit: FitConfig,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            grid_size: 21,
            pilot_alpha: 0.5,
            max_rounds: 20,
            fit: FitConfig::default(),
        }
    }
}

impl TuningConfig {
    pub fn with_pilot(pilot_alpha: f64) -> Self {
        TuningConfig {
            pilot_alpha,
            ..TuningConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::domain("the α grid needs at least two points"));
        }
        if self.max_rounds == 0 {
            return Err(Error::domain("max_rounds must be at least 1"));
        }
        if !(self.pilot_alpha >= 0.0) {
            return Err(Error::domain("pilot α must be non-negative"));
        }
        Ok(())
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        let m = (self.grid_size - 1) as f64;
        (0..self.grid_size).map(|k| k as f64 / m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTrace {
    pub alpha_grid: Vec<f64>,
    /// One row per round; `None` where the fit at that `α` failed.
    pub amse_values: Vec<Vec<Option<f64>>>,
    pub chosen_alpha_per_iter: Vec<f64>,
    pub pilot_alpha: f64,
    pub converged: bool,
    pub final_alpha: f64,
    /// Full-model fit at `final_alpha`, with standard errors.
    pub final_fit: FitResult,
    /// Grid values whose fit failed and were left out.
    pub failed_alphas: Vec<f64>,
    /// Coordinates of `θ` entering the AMSE, ordered `(β, σ, γ)`.
    pub selected_coordinates: Vec<usize>,
}

struct GridPoint {
    fit: FitResult,
    /// `tr Σ / n` restricted to the selected coordinates
    variance: f64,
}

fn variance_term(f: &FitResult, data: &RegressionData, coords: &[usize]) -> Result<f64> {
    let am = sandwich(&f.theta_hat, data, f.alpha)?;
    let tr: f64 = coords.iter().map(|&k| am.sigma[(k, k)]).sum();
    if !tr.is_finite() {
        return Err(Error::Numerical("non-finite asymptotic variance".into()));
    }
    Ok(tr / data.n() as f64)
}

fn bias_term(theta: &ParamVector, pilot: &ParamVector, coords: &[usize]) -> f64 {
    let a = theta.to_vec();
    let b = pilot.to_vec();
    coords.iter().map(|&k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

fn all_coordinates(data: &RegressionData) -> Vec<usize> {
    (0..data.p() + 2).collect()
}

/// Empirical AMSE of the fit at `alpha` against `pilot`.
pub fn empirical_amse(alpha: f64, data: &RegressionData, pilot: &ParamVector) -> Result<f64> {
    let f = fit(data, &FitConfig::with_alpha(alpha))?;
    amse_of_fit(&f, data, pilot, &all_coordinates(data))
}

/// AMSE of an existing fit, restricted to `coords`.
pub fn amse_of_fit(f: &FitResult, data: &RegressionData, pilot: &ParamVector, coords: &[usize]) -> Result<f64> {
    if pilot.dim() != f.theta_hat.dim() {
        return Err(Error::Dimension { expected: f.theta_hat.dim(), got: pilot.dim() });
    }
    pilot.validate()?;
    if let Some(&k) = coords.iter().find(|&&k| k >= pilot.dim()) {
        return Err(Error::Dimension { expected: pilot.dim(), got: k + 1 });
    }
    Ok(bias_term(&f.theta_hat, pilot, coords) + variance_term(f, data, coords)?)
}

/// Iterated Warwick–Jones selection of `α` over all parameters.
pub fn iwj_select(data: &RegressionData, config: &TuningConfig) -> Result<TuningTrace> {
    select(data, config, all_coordinates(data))
}

/// IWJ restricted to the parameters a hypothesis constrains (the nonzero rows of
/// `M(θ)` at the pilot). The chosen `α` is used for the full-model fit.
pub fn targeted_select(data: &RegressionData, hyp: &HypothesisSpec, config: &TuningConfig) -> Result<TuningTrace> {
    config.validate()?;
    let pilot = pilot_fit(data, config)?;
    let coords = hyp.row_support(&pilot.theta_hat)?;
    if coords.is_empty() {
        return Err(Error::HypothesisDegenerate(format!("`{}` selects no parameters", hyp.description())));
    }
    select_from(data, config, coords, pilot)
}

fn pilot_fit(data: &RegressionData, config: &TuningConfig) -> Result<FitResult> {
    let mut cfg = config.fit.clone();
    cfg.alpha = config.pilot_alpha;
    cfg.warm_start = None;
    fit(data, &cfg)
}

fn select(data: &RegressionData, config: &TuningConfig, coords: Vec<usize>) -> Result<TuningTrace> {
    config.validate()?;
    let pilot = pilot_fit(data, config)?;
    select_from(data, config, coords, pilot)
}

fn select_from(
    data: &RegressionData,
    config: &TuningConfig,
    coords: Vec<usize>,
    pilot: FitResult,
) -> Result<TuningTrace> {
    let alphas = config.alpha_grid();
    let mut points: Vec<Option<GridPoint>> = Vec::with_capacity(alphas.len());
    let mut warm: Option<ParamVector> = None;
    for &a in &alphas {
        let mut cfg = config.fit.clone();
        cfg.alpha = a;
        cfg.warm_start = warm.clone();
        let point = fit(data, &cfg).and_then(|f| {
            let variance = variance_term(&f, data, &coords)?;
            Ok(GridPoint { fit: f, variance })
        });
        match point {
            Ok(p) => {
                warm = Some(p.fit.theta_hat.clone());
                points.push(Some(p));
            }
            Err(_) => points.push(None),
        }
    }
    let failed_alphas: Vec<f64> = alphas
        .iter()
        .zip(&points)
        .filter(|(_, p)| p.is_none())
        .map(|(a, _)| *a)
        .collect();
    if failed_alphas.len() == alphas.len() {
        return Err(Error::Fit {
            message: "the fit failed at every grid value of α".into(),
            best: None,
        });
    }

    let mut pilot_theta = pilot.theta_hat;
    let mut amse_values = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut chosen_amse: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut final_k = None;
    for _ in 0..config.max_rounds {
        let row: Vec<Option<f64>> = points
            .iter()
            .map(|p| p.as_ref().map(|g| bias_term(&g.fit.theta_hat, &pilot_theta, &coords) + g.variance))
            .collect();
        // first minimizer: ties go to the smaller α
        let (k, v) = row
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .fold(None, |acc: Option<(usize, f64)>, (k, v)| match acc {
                Some((_, best)) if best <= v => acc,
                _ => Some((k, v)),
            })
            .expect("at least one grid fit succeeded");
        amse_values.push(row);
        chosen.push(k);
        chosen_amse.push(v);
        let t = chosen.len();
        if t >= 2 && chosen[t - 1] == chosen[t - 2] {
            converged = true;
            final_k = Some(k);
            break;
        }
        if t >= 3 && chosen[t - 1] == chosen[t - 3] {
            // 2-cycle: keep the member with the smaller AMSE at the round it was chosen
            let pick = if chosen_amse[t - 2] < chosen_amse[t - 1] { chosen[t - 2] } else { chosen[t - 1] };
            final_k = Some(pick);
            break;
        }
        pilot_theta = points[k].as_ref().expect("chosen point has a fit").fit.theta_hat.clone();
    }
    let final_k = final_k.unwrap_or(*chosen.last().expect("at least one round"));
    let mut final_fit = points[final_k].take().expect("chosen point has a fit").fit;
    attach_standard_errors(&mut final_fit, data)?;
    Ok(TuningTrace {
        chosen_alpha_per_iter: chosen.iter().map(|&k| alphas[k]).collect(),
        alpha_grid: alphas.clone(),
        amse_values,
        pilot_alpha: config.pilot_alpha,
        converged,
        final_alpha: alphas[final_k],
        final_fit,
        failed_alphas,
        selected_coordinates: coords,
    })
}
