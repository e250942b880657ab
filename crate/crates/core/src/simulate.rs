//! Monte-Carlo designs: bias/MSE of the MDPDE and empirical level/power of the
//! Wald-type test, on clean or contaminated data.
//!
//! Replication `k` draws everything from `RngStream::new(master_seed, k)`, so
//! replications can run in any order or on any number of threads; results are
//! aggregated in replication order. [`Prepared::run_rep`] and [`Prepared::aggregate`]
//! are the building blocks for parallel drivers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotics::sandwich;
use crate::dpd_fit::{fit, FitConfig, RegressionData};
use crate::numerics::special::chi2_quantile;
use crate::numerics::RngStream;
use crate::sn_dist::{sn_draw, ParamVector, SnParams};
use crate::wald::{check_null, statistic, HypothesisSpec};
use crate::{Error, Result};

/// Largest fraction of failed fits at an `α` before its summary is flagged invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

pub const PAPER_ALPHAS: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 0.7, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub reps: usize,
    /// Intercept first.
    pub beta_true: Vec<f64>,
    pub sigma_true: f64,
    pub gamma_true: f64,
    /// `(mean, sd)` of each non-intercept covariate, all normal.
    pub covariate_laws: Vec<(f64, f64)>,
    pub contamination_fraction: f64,
    pub contamination_error: SnParams,
    pub alphas: Vec<f64>,
    pub master_seed: u64,
    #[serde(default)]
    pub fit: FitConfig,
}

impl SimConfig {
    /// Bias/MSE design: `β = (1, 2, 3)`, errors `SN(0, 1, 2)`, `x₁ ~ N(1, 1)`,
    /// `x₂ ~ N(−1, 1)`, contaminating errors `SN(−10, 1, 2)`.
    pub fn table2(n: usize, reps: usize, contamination_fraction: f64, master_seed: u64) -> Self {
        SimConfig {
            n,
            reps,
            beta_true: vec![1.0, 2.0, 3.0],
            sigma_true: 1.0,
            gamma_true: 2.0,
            covariate_laws: vec![(1.0, 1.0), (-1.0, 1.0)],
            contamination_fraction,
            contamination_error: SnParams::standard(2.0).with_location(-10.0),
            alphas: PAPER_ALPHAS.to_vec(),
            master_seed,
            fit: FitConfig::default(),
        }
    }

    /// Level design for `β₁ = 2`: as [`SimConfig::table2`] with contaminating errors
    /// `SN(−5, 1, 2)`.
    pub fn table3_level(n: usize, reps: usize, contamination_fraction: f64, master_seed: u64) -> Self {
        SimConfig {
            contamination_error: SnParams::standard(2.0).with_location(-5.0),
            ..SimConfig::table2(n, reps, contamination_fraction, master_seed)
        }
    }

    /// Power design: contaminating errors `SN(−3, 1, 2)`; the slope is moved off the
    /// null by [`run_level_power`].
    pub fn table3_power(n: usize, reps: usize, contamination_fraction: f64, master_seed: u64) -> Self {
        SimConfig {
            contamination_error: SnParams::standard(2.0).with_location(-3.0),
            ..SimConfig::table2(n, reps, contamination_fraction, master_seed)
        }
    }

    pub fn theta_true(&self) -> Result<ParamVector> {
        ParamVector::new(self.beta_true.clone(), self.sigma_true, self.gamma_true)
    }

    pub fn contaminated_rows(&self) -> usize {
        (self.contamination_fraction * self.n as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if !(self.contamination_fraction >= 0.0 && self.contamination_fraction < 0.5) {
            return Err(Error::domain("contamination fraction must lie in [0, 0.5)"));
        }
        if self.beta_true.len() != self.covariate_laws.len() + 1 {
            return Err(Error::Dimension {
                expected: self.covariate_laws.len() + 1,
                got: self.beta_true.len(),
            });
        }
        if self.covariate_laws.iter().any(|&(m, s)| !m.is_finite() || !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::domain("covariate laws need finite means and non-negative sds"));
        }
        if self.alphas.is_empty() {
            return Err(Error::domain("no α values to simulate"));
        }
        self.contamination_error.validate()?;
        self.theta_true()?;
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![String::from("(Intercept)")];
        names.extend((1..=self.covariate_laws.len()).map(|j| format!("x{j}")));
        names
    }
}

/// Design matrix, errors and response of replication `rep_index`.
///
/// Draw order: covariates row by row, then a shuffle of the row indices whose first
/// `⌊εn⌋` entries get contaminated errors, then one error per row.
pub fn generate_dataset(cfg: &SimConfig, rep_index: usize) -> Result<RegressionData> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.master_seed, rep_index as u64);
    let p = cfg.beta_true.len();
    let mut rows = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let mut x = Vec::with_capacity(p);
        x.push(1.0);
        for &(m, s) in &cfg.covariate_laws {
            x.push(rng.normal(m, s));
        }
        rows.push(x);
    }
    let mut order: Vec<usize> = (0..cfg.n).collect();
    rng.shuffle(&mut order);
    let mut contaminated = vec![false; cfg.n];
    for &i in &order[..cfg.contaminated_rows()] {
        contaminated[i] = true;
    }
    let clean = SnParams::new(0.0, cfg.sigma_true, cfg.gamma_true)?;
    let y: Vec<f64> = rows
        .iter()
        .zip(&contaminated)
        .map(|(x, &c)| {
            let law = if c { cfg.contamination_error } else { clean };
            let mean: f64 = x.iter().zip(&cfg.beta_true).map(|(a, b)| a * b).sum();
            mean + sn_draw(law, &mut rng)
        })
        .collect();
    RegressionData::from_rows(&rows, y, cfg.column_names())
}

#[derive(Debug, Clone)]
pub enum Study {
    BiasMse,
    /// Rejection rate of `hyp` at level `tau`. With `contiguous_d`, data come from
    /// `θ₀ + n^{−1/2} d` on the coordinates `hyp` constrains (power); otherwise
    /// from `θ₀`, which must satisfy the null (level).
    Rejection {
        hyp: HypothesisSpec,
        tau: f64,
        contiguous_d: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    BiasMse,
    Level,
    Power,
}

/// Outcome of one replication, one entry per `α` (`None` when the fit or test failed).
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub estimates: Vec<Option<Vec<f64>>>,
    pub rejections: Vec<Option<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    /// `None` when no replication succeeded.
    pub bias: Option<f64>,
    pub mse: Option<f64>,
    /// Monte-Carlo standard errors of the two means above; need two successes.
    pub bias_mc_se: Option<f64>,
    pub mse_mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub tau: f64,
    pub rate: f64,
    /// `sqrt(p̂(1 − p̂)/reps)` over successful replications.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub successes: usize,
    pub failures: usize,
    /// False when more than 5% of the replications failed.
    pub valid: bool,
    pub parameters: Vec<ParamSummary>,
    pub rejection: Option<RejectionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub kind: StudyKind,
    pub config: SimConfig,
    /// Parameters the data were generated from (shifted off the null for power runs).
    pub theta_generating: Vec<f64>,
    pub hypothesis: Option<String>,
    pub rep_count: usize,
    pub master_seed: u64,
    /// Replication `k` used stream `k` of the master seed.
    pub rep_streams: (u64, u64),
    pub alphas: Vec<AlphaSummary>,
}

impl SimReport {
    pub fn at_alpha(&self, alpha: f64) -> Option<&AlphaSummary> {
        self.alphas.iter().find(|a| a.alpha == alpha)
    }
}

/// A validated study ready to run replication by replication.
#[derive(Debug, Clone)]
pub struct Prepared {
    cfg: SimConfig,
    generating: SimConfig,
    kind: StudyKind,
    test: Option<(HypothesisSpec, f64, f64)>,
}

impl Prepared {
    pub fn new(cfg: &SimConfig, study: &Study) -> Result<Self> {
        cfg.validate()?;
        let theta0 = cfg.theta_true()?;
        match study {
            Study::BiasMse => Ok(Prepared {
                cfg: cfg.clone(),
                generating: cfg.clone(),
                kind: StudyKind::BiasMse,
                test: None,
            }),
            Study::Rejection { hyp, tau, contiguous_d } => {
                check_null(&theta0, hyp)?;
                let critical = chi2_quantile(hyp.r() as f64, *tau)?;
                let mut generating = cfg.clone();
                let kind = match contiguous_d {
                    None => StudyKind::Level,
                    Some(d) => {
                        let shift = d / (cfg.n as f64).sqrt();
                        let p = cfg.beta_true.len();
                        for k in hyp.row_support(&theta0)? {
                            match k {
                                k if k < p => generating.beta_true[k] += shift,
                                k if k == p => generating.sigma_true += shift,
                                _ => generating.gamma_true += shift,
                            }
                        }
                        generating.validate()?;
                        StudyKind::Power
                    }
                };
                Ok(Prepared {
                    cfg: cfg.clone(),
                    generating,
                    kind,
                    test: Some((hyp.clone(), *tau, critical)),
                })
            }
        }
    }

    pub fn reps(&self) -> usize {
        self.cfg.reps
    }

    pub fn run_rep(&self, rep: usize) -> RepOutcome {
        let data = generate_dataset(&self.generating, rep);
        let mut estimates = Vec::with_capacity(self.cfg.alphas.len());
        let mut rejections = Vec::with_capacity(self.cfg.alphas.len());
        for &alpha in &self.cfg.alphas {
            let mut fc = self.cfg.fit.clone();
            fc.alpha = alpha;
            let fitted = data.as_ref().ok().and_then(|d| fit(d, &fc).ok().map(|f| (d, f)));
            let reject = match (&self.test, &fitted) {
                (Some((hyp, _, critical)), Some((d, f))) => sandwich(&f.theta_hat, d, alpha)
                    .and_then(|am| statistic(&f.theta_hat, &am.sigma, hyp, d.n()))
                    .ok()
                    .map(|w| w > *critical),
                _ => None,
            };
            estimates.push(fitted.map(|(_, f)| f.theta_hat.to_vec()));
            rejections.push(reject);
        }
        RepOutcome { rep, estimates, rejections }
    }

    /// Summaries from outcomes of replications `0..reps`, in any order.
    pub fn aggregate(&self, outcomes: &[RepOutcome]) -> Result<SimReport> {
        let mut sorted: Vec<&RepOutcome> = outcomes.iter().collect();
        sorted.sort_by_key(|o| o.rep);
        if sorted.len() != self.cfg.reps || sorted.iter().enumerate().any(|(k, o)| o.rep != k) {
            return Err(Error::domain("outcomes must cover replications 0..reps exactly once"));
        }
        let truth = self.generating.theta_true()?.to_vec();
        let mut names = self.cfg.column_names();
        names.push("sigma".into());
        names.push("gamma".into());
        let mut alphas = Vec::with_capacity(self.cfg.alphas.len());
        for (a, &alpha) in self.cfg.alphas.iter().enumerate() {
            let ok: Vec<&Vec<f64>> = match self.kind {
                StudyKind::BiasMse => sorted.iter().filter_map(|o| o.estimates[a].as_ref()).collect(),
                _ => Vec::new(),
            };
            let decisions: Vec<bool> = sorted.iter().filter_map(|o| o.rejections[a]).collect();
            let successes = match self.kind {
                StudyKind::BiasMse => ok.len(),
                _ => decisions.len(),
            };
            let failures = self.cfg.reps - successes;
            let parameters = if self.kind == StudyKind::BiasMse {
                summarize_params(&ok, &truth, &names)
            } else {
                Vec::new()
            };
            let rejection = self.test.as_ref().map(|(_, tau, _)| {
                let m = decisions.len().max(1) as f64;
                let rate = decisions.iter().filter(|&&r| r).count() as f64 / m;
                RejectionSummary {
                    tau: *tau,
                    rate,
                    mc_se: (rate * (1.0 - rate) / m).sqrt(),
                }
            });
            alphas.push(AlphaSummary {
                alpha,
                successes,
                failures,
                valid: successes > 0 && failures as f64 <= MAX_FAILURE_FRACTION * self.cfg.reps as f64,
                parameters,
                rejection,
            });
        }
        Ok(SimReport {
            kind: self.kind,
            config: self.cfg.clone(),
            theta_generating: truth,
            hypothesis: self.test.as_ref().map(|(h, _, _)| String::from(h.description())),
            rep_count: self.cfg.reps,
            master_seed: self.cfg.master_seed,
            rep_streams: (0, self.cfg.reps as u64),
            alphas,
        })
    }

    pub fn run(&self) -> Result<SimReport> {
        let outcomes: Vec<RepOutcome> = (0..self.cfg.reps).map(|r| self.run_rep(r)).collect();
        self.aggregate(&outcomes)
    }
}

fn summarize_params(estimates: &[&Vec<f64>], truth: &[f64], names: &[String]) -> Vec<ParamSummary> {
    let m = estimates.len();
    (0..truth.len())
        .map(|k| {
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for e in estimates {
                let d = e[k] - truth[k];
                let d2 = d * d;
                s1 += d;
                s2 += d2;
                s4 += d2 * d2;
            }
            let mf = m.max(1) as f64;
            let bias = s1 / mf;
            let mse = s2 / mf;
            let mc = |mean: f64, second: f64| {
                (m > 1).then(|| ((second / mf - mean * mean).max(0.0) / (mf - 1.0)).sqrt())
            };
            ParamSummary {
                name: names[k].clone(),
                truth: truth[k],
                bias: (m > 0).then_some(bias),
                mse: (m > 0).then_some(mse),
                bias_mc_se: mc(bias, s2),
                mse_mc_se: mc(mse, s4),
            }
        })
        .collect()
}

/// Empirical bias and MSE of `θ̂_α` for every `α` in the config.
pub fn run_bias_mse(cfg: &SimConfig) -> Result<SimReport> {
    Prepared::new(cfg, &Study::BiasMse)?.run()
}

/// Empirical rejection rate of the Wald-type test of `hyp` at level `tau`: the level
/// when `contiguous_d` is `None`, the power at `θ₀ + n^{−1/2} d` otherwise.
pub fn run_level_power(cfg: &SimConfig, hyp: &HypothesisSpec, tau: f64, contiguous_d: Option<f64>) -> Result<SimReport> {
    Prepared::new(
        cfg,
        &Study::Rejection {
            hyp: hyp.clone(),
            tau,
            contiguous_d,
        },
    )?
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contaminated_row_count() {
        let cfg = SimConfig::table2(100, 1, 0.05, 3);
        assert_eq!(cfg.contaminated_rows(), 5);
        let d = generate_dataset(&cfg, 0).unwrap();
        // contaminated errors sit near −10, far below the clean ones
        let resid: Vec<f64> = (0..100)
            .map(|i| d.y[i] - d.row(i).unwrap().iter().zip(&cfg.beta_true).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        assert_eq!(resid.iter().filter(|&&r| r < -5.0).count(), 5);
        let clean = SimConfig::table2(100, 1, 0.0, 3);
        let d0 = generate_dataset(&clean, 0).unwrap();
        assert_eq!(d0.x, d.x);
    }

    #[test]
    fn generation_is_keyed_by_rep() {
        let cfg = SimConfig::table2(30, 5, 0.1, 11);
        assert_eq!(generate_dataset(&cfg, 2).unwrap(), generate_dataset(&cfg, 2).unwrap());
        assert_ne!(generate_dataset(&cfg, 2).unwrap().y, generate_dataset(&cfg, 3).unwrap().y);
        let mut other = cfg.clone();
        other.master_seed = 12;
        assert_ne!(generate_dataset(&other, 2).unwrap().y, generate_dataset(&cfg, 2).unwrap().y);
    }

    #[test]
    fn covariate_means() {
        let cfg = SimConfig::table2(50, 1, 0.0, 5);
        let reps = 400;
        let mut sums = [0.0; 3];
        for r in 0..reps {
            let m = generate_dataset(&cfg, r).unwrap().mean_row();
            for k in 0..3 {
                sums[k] += m[k];
            }
        }
        let se = 1.0 / ((50 * reps) as f64).sqrt();
        assert_eq!(sums[0] / reps as f64, 1.0);
        assert!((sums[1] / reps as f64 - 1.0).abs() < 4.0 * se);
        assert!((sums[2] / reps as f64 + 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn bias_mse_report_is_consistent() {
        let mut cfg = SimConfig::table2(60, 8, 0.0, 1);
        cfg.alphas = vec![0.0, 0.5];
        let rep = run_bias_mse(&cfg).unwrap();
        assert_eq!(rep.kind, StudyKind::BiasMse);
        assert_eq!(rep.alphas.len(), 2);
        for a in &rep.alphas {
            assert_eq!(a.parameters.len(), 5);
            for p in &a.parameters {
                let (b, m) = (p.bias.unwrap(), p.mse.unwrap());
                assert!(m >= b * b * (1.0 - 1.0 / a.successes as f64) - 1e-15);
            }
        }
        assert_eq!(run_bias_mse(&cfg).unwrap(), rep);
    }

    #[test]
    fn outcomes_aggregate_in_any_order() {
        let mut cfg = SimConfig::table3_level(60, 6, 0.0, 2);
        cfg.alphas = vec![0.3];
        let hyp = HypothesisSpec::beta(1, 2.0).unwrap();
        let study = Study::Rejection { hyp, tau: 0.05, contiguous_d: None };
        let prep = Prepared::new(&cfg, &study).unwrap();
        let mut outs: Vec<RepOutcome> = (0..6).rev().map(|r| prep.run_rep(r)).collect();
        let a = prep.aggregate(&outs).unwrap();
        outs.reverse();
        assert_eq!(prep.aggregate(&outs).unwrap(), a);
        assert_eq!(a.kind, StudyKind::Level);
        let r = a.alphas[0].rejection.as_ref().unwrap();
        assert!((0.0..=1.0).contains(&r.rate));
        outs.pop();
        assert!(prep.aggregate(&outs).is_err());
    }

    #[test]
    fn power_shifts_the_tested_slope() {
        let cfg = SimConfig::table3_power(100, 1, 0.0, 2);
        let hyp = HypothesisSpec::beta(1, 2.0).unwrap();
        let prep = Prepared::new(&cfg, &Study::Rejection { hyp: hyp.clone(), tau: 0.05, contiguous_d: Some(1.5) }).unwrap();
        assert!((prep.generating.beta_true[1] - 2.15).abs() < 1e-15);
        assert_eq!(prep.generating.beta_true[2], 3.0);
        let off = HypothesisSpec::beta(1, 2.5).unwrap();
        assert!(Prepared::new(&cfg, &Study::Rejection { hyp: off, tau: 0.05, contiguous_d: None }).is_err());
    }
}
