use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use snfit_core::asymptotics::{attach_standard_errors, sandwich};
use snfit_core::dpd_fit::fit;
use snfit_core::sn_dist::{sn_quantile, SnParams};
use snfit_core::wald::significance_tests_named;
use snfit_core::{FitConfig, FitResult, HypothesisSpec, RegressionData, TestResult};

use super::{param_names, report, RunConfig};
use crate::output::{num, opt_num, read_report, Report, Table, Tabular};
use crate::parallel::{map_indexed, pool};
use crate::CliError;

/// One row of the estimates table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub parameter: String,
    pub estimate: f64,
    pub se: Option<f64>,
    /// Wald-type p-value of `β_j = 0`, or of `γ = 0` on the `gamma` row.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub ok: bool,
    pub error: Option<String>,
    /// Set when `γ̂` sits at the optimizer bound; standard errors then assume an
    /// interior optimum and should be read with care.
    pub warning: Option<String>,
    pub fit: Option<FitResult>,
    pub tests: Vec<TestResult>,
    pub rows: Vec<ParamRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub dropped_rows: usize,
    pub column_names: Vec<String>,
    pub fits: Vec<AlphaFit>,
}

impl Tabular for FitReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["alpha", "parameter", "estimate", "se", "p_value", "converged"]);
        for f in &self.fits {
            let converged = f.fit.as_ref().map_or(false, |r| r.converged);
            for r in &f.rows {
                t.push(vec![
                    num(f.alpha),
                    r.parameter.clone(),
                    num(r.estimate),
                    opt_num(r.se),
                    opt_num(r.p_value),
                    converged.to_string(),
                ]);
            }
        }
        t
    }
}

fn fit_one(data: &RegressionData, alpha: f64) -> AlphaFit {
    let mut out = AlphaFit {
        alpha,
        ok: false,
        error: None,
        warning: None,
        fit: None,
        tests: Vec::new(),
        rows: Vec::new(),
    };
    let mut f = match fit(data, &FitConfig::with_alpha(alpha)) {
        Ok(f) => f,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    if f.gamma_at_bound {
        out.warning = Some(format!(
            "γ̂ is at the bound ±{}: no interior minimizer",
            snfit_core::dpd_fit::GAMMA_BOUND
        ));
    }
    let inference = attach_standard_errors(&mut f, data)
        .and_then(|am| significance_tests_named(&f, &am, &data.column_names));
    let names = param_names(&data.column_names);
    let theta = f.theta_hat.to_vec();
    match inference {
        Ok(tests) => {
            out.ok = true;
            let p = data.p();
            let se = f.se.clone().unwrap_or_default();
            out.rows = names
                .iter()
                .enumerate()
                .map(|(k, name)| ParamRow {
                    parameter: name.clone(),
                    estimate: theta[k],
                    se: se.get(k).copied(),
                    p_value: match k {
                        k if k < p => Some(tests[k].p_value),
                        k if k == p + 1 => Some(tests[p].p_value),
                        _ => None,
                    },
                })
                .collect();
            out.tests = tests;
        }
        Err(e) => {
            out.error = Some(format!("estimates available, inference failed: {e}"));
            out.rows = names
                .iter()
                .enumerate()
                .map(|(k, name)| ParamRow {
                    parameter: name.clone(),
                    estimate: theta[k],
                    se: None,
                    p_value: None,
                })
                .collect();
        }
    }
    out.fit = Some(f);
    out
}

/// Fits every α (concurrently), with standard errors, per-coefficient significance
/// tests and the symmetry test.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Report<FitReport>, CliError> {
    cfg.validate()?;
    cfg.require_alphas()?;
    let loaded = cfg.load()?;
    let data = &loaded.data;
    let pool = pool()?;
    let fits = map_indexed(&pool, cfg.alphas.len(), |k| fit_one(data, cfg.alphas[k]));
    for f in &fits {
        if let Some(msg) = f.error.as_deref().or(f.warning.as_deref()) {
            log::warn!("α = {}: {msg}", f.alpha);
        }
    }
    let partial = fits.iter().any(|f| !f.ok);
    Ok(report(
        cfg,
        partial,
        FitReport {
            n: data.n(),
            dropped_rows: loaded.dropped,
            column_names: data.column_names.clone(),
            fits,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTests {
    pub alpha: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub theta_hat: Option<Vec<f64>>,
    pub results: Vec<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub n: usize,
    pub column_names: Vec<String>,
    pub tests: Vec<AlphaTests>,
}

impl Tabular for TestReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["alpha", "hypothesis", "statistic", "df", "p_value", "level", "reject"]);
        for a in &self.tests {
            for r in &a.results {
                for d in &r.reject_at {
                    t.push(vec![
                        num(a.alpha),
                        r.description.clone(),
                        num(r.statistic),
                        r.df.to_string(),
                        num(r.p_value),
                        num(d.level),
                        d.reject.to_string(),
                    ]);
                }
            }
        }
        t
    }
}

/// Wald-type tests of each `--hypothesis` at each α.
pub fn cmd_test(cfg: &RunConfig) -> Result<Report<TestReport>, CliError> {
    cfg.validate()?;
    cfg.require_alphas()?;
    if cfg.hypothesis.is_empty() {
        return Err(CliError::Config("--hypothesis is required".into()));
    }
    let loaded = cfg.load()?;
    let data = &loaded.data;
    let hyps = cfg
        .hypothesis
        .iter()
        .map(|h| HypothesisSpec::parse(h, &data.column_names).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut levels = snfit_core::wald::DEFAULT_LEVELS.to_vec();
    if !levels.contains(&cfg.level) {
        levels.push(cfg.level);
    }
    let pool = pool()?;
    let tests = map_indexed(&pool, cfg.alphas.len(), |k| {
        let alpha = cfg.alphas[k];
        let run = || -> snfit_core::Result<(Vec<f64>, Vec<TestResult>)> {
            let f = fit(data, &FitConfig::with_alpha(alpha))?;
            let am = sandwich(&f.theta_hat, data, alpha)?;
            let mut crit = snfit_core::wald::CriticalValues::new();
            let results = hyps
                .iter()
                .map(|h| snfit_core::wald::wald_test_at(&f, &am, h, &levels, &mut crit))
                .collect::<snfit_core::Result<Vec<_>>>()?;
            Ok((f.theta_hat.to_vec(), results))
        };
        match run() {
            Ok((theta, results)) => AlphaTests {
                alpha,
                ok: true,
                error: None,
                theta_hat: Some(theta),
                results,
            },
            Err(e) => AlphaTests {
                alpha,
                ok: false,
                error: Some(e.to_string()),
                theta_hat: None,
                results: Vec::new(),
            },
        }
    });
    let partial = tests.iter().any(|t| !t.ok);
    Ok(report(
        cfg,
        partial,
        TestReport {
            n: data.n(),
            column_names: data.column_names.clone(),
            tests,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqReport {
    pub alpha: f64,
    pub fit: FitResult,
    /// `(theoretical, empirical)` pairs in increasing order.
    pub points: Vec<(f64, f64)>,
}

impl Tabular for QqReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["theoretical", "empirical"]);
        for &(a, b) in &self.points {
            t.push(vec![num(a), num(b)]);
        }
        t
    }
}

/// Sorted residuals `y_i − x_iᵀβ̂` against `SN(0, σ̂, γ̂)` quantiles at `(i − ½)/n`.
pub fn qq_points(fit: &FitResult) -> snfit_core::Result<Vec<(f64, f64)>> {
    let law = SnParams::new(0.0, fit.theta_hat.sigma, fit.theta_hat.gamma)?;
    let mut r = fit.residuals.clone();
    r.sort_by(f64::total_cmp);
    let n = r.len() as f64;
    r.iter()
        .enumerate()
        .map(|(i, &e)| Ok((sn_quantile((i as f64 + 0.5) / n, law)?, e)))
        .collect()
}

/// QQ data of the residuals at a single α.
pub fn cmd_qq(cfg: &RunConfig) -> Result<Report<QqReport>, CliError> {
    cfg.validate()?;
    let alpha = match cfg.alphas.as_slice() {
        [a] => *a,
        _ => return Err(CliError::Config("qq needs exactly one α".into())),
    };
    let loaded = cfg.load()?;
    let f = fit(&loaded.data, &FitConfig::with_alpha(alpha))?;
    let points = qq_points(&f)?;
    Ok(report(cfg, false, QqReport { alpha, fit: f, points }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelDiffOptions {
    /// Fit report on the full data.
    pub full: PathBuf,
    /// Fit report on the data without the suspected outliers.
    pub clean: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelDiffRow {
    pub parameter: String,
    pub alpha: f64,
    pub full: f64,
    pub clean: f64,
    /// `|(full − clean)/full|`; `None` when the full-data estimate is zero.
    pub rel_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelDiffReport {
    pub rows: Vec<RelDiffRow>,
}

impl Tabular for RelDiffReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["parameter", "alpha", "full", "clean", "rel_diff"]);
        for r in &self.rows {
            t.push(vec![r.parameter.clone(), num(r.alpha), num(r.full), num(r.clean), opt_num(r.rel_diff)]);
        }
        t
    }
}

/// Relative differences between two fit reports, per parameter and shared α.
pub fn cmd_reldiff(cfg: &RunConfig, opts: &RelDiffOptions) -> Result<Report<RelDiffReport>, CliError> {
    let full: Report<FitReport> = read_report(&opts.full)?;
    let clean: Report<FitReport> = read_report(&opts.clean)?;
    let rows = reldiff(&full.result, &clean.result)?;
    Ok(report(cfg, false, RelDiffReport { rows }))
}

pub(crate) fn reldiff(full: &FitReport, clean: &FitReport) -> Result<Vec<RelDiffRow>, CliError> {
    if full.column_names != clean.column_names {
        return Err(CliError::Config("the two fit reports have different model columns".into()));
    }
    let mut rows = Vec::new();
    for f in full.fits.iter().filter(|f| f.ok) {
        let Some(c) = clean.fits.iter().find(|c| c.alpha == f.alpha && c.ok) else {
            continue;
        };
        for (rf, rc) in f.rows.iter().zip(&c.rows) {
            rows.push(RelDiffRow {
                parameter: rf.parameter.clone(),
                alpha: f.alpha,
                full: rf.estimate,
                clean: rc.estimate,
                rel_diff: Some(((rf.estimate - rc.estimate) / rf.estimate).abs()).filter(|v| v.is_finite()),
            });
        }
    }
    Ok(rows)
}
