use serde::{Deserialize, Serialize};
use snfit_core::asymptotics::{are_table, AreTable, CovariateLaw};
use snfit_core::dpd_fit::fit;
use snfit_core::influence::{
    default_grid, grid, if_curve, if_tail_limit, test_curve, Direction, IfCurve, TestCurve, GRID_HALFWIDTH,
    GRID_POINTS,
};
use snfit_core::simulate::{generate_dataset, Prepared, SimConfig, SimReport, Study, StudyKind, PAPER_ALPHAS};
use snfit_core::tuning::{iwj_select, targeted_select, TuningConfig, TuningTrace};
use snfit_core::{FitConfig, HypothesisSpec, ParamVector, RegressionData, SnParams};

use super::{param_names, report, RunConfig};
use crate::output::{num, opt_num, Report, Table, Tabular};
use crate::parallel::{map_indexed, pool, run_study};
use crate::CliError;

fn parse_hypothesis(text: &str, names: &[String]) -> Result<HypothesisSpec, CliError> {
    HypothesisSpec::parse(text, names).map_err(|e| CliError::Config(e.to_string()))
}

// ---------------------------------------------------------------- are

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreOptions {
    pub errors: Vec<SnParams>,
    pub design: CovariateLaw,
}

impl Default for AreOptions {
    fn default() -> Self {
        AreOptions {
            errors: vec![
                SnParams::standard(0.0),
                SnParams { mu: 0.0, sigma: 4.0, gamma: 0.0 },
                SnParams::standard(-2.0),
                SnParams::standard(2.0),
            ],
            design: CovariateLaw::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreReport {
    pub tables: Vec<AreTable>,
}

impl Tabular for AreReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["error_mu", "error_sigma", "error_gamma", "alpha", "are_beta", "are_sigma", "are_gamma"]);
        for tab in &self.tables {
            for (k, &a) in tab.alphas.iter().enumerate() {
                t.push(vec![
                    num(tab.error.mu),
                    num(tab.error.sigma),
                    num(tab.error.gamma),
                    num(a),
                    num(tab.beta[k]),
                    num(tab.sigma[k]),
                    num(tab.gamma[k]),
                ]);
            }
        }
        t
    }
}

/// ARE of the MDPDE relative to the MLE for each error law.
pub fn cmd_are(cfg: &RunConfig, opts: &AreOptions) -> Result<Report<AreReport>, CliError> {
    cfg.validate()?;
    let mut alphas = cfg.alphas.clone();
    if !alphas.contains(&0.0) {
        alphas.insert(0, 0.0);
    }
    let pool = pool()?;
    let tables = map_indexed(&pool, opts.errors.len(), |k| are_table(opts.errors[k], &alphas, &opts.design));
    let tables = tables.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(report(cfg, false, AreReport { tables }))
}

// ---------------------------------------------------------------- influence

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IfKind {
    /// IF of the estimator, one column per parameter.
    #[default]
    Estimator,
    /// Second-order IF of the Wald-type statistic.
    SecondOrder,
    /// Power influence function.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceOptions {
    pub kind: IfKind,
    /// `(β…, σ, γ)`; when absent the model is fitted at each α.
    pub theta: Option<Vec<f64>>,
    /// 0-based observation to contaminate; ignored with `all`.
    pub observation: usize,
    pub all: bool,
    /// Contiguous direction for the power IF; defaults to 0.01 on the tested coordinates.
    pub d: Option<Vec<f64>>,
    pub grid_points: usize,
    /// Half-width of the grid in units of σ.
    pub halfwidth: f64,
    /// Single-covariate design (no intercept) used without `--input`.
    pub design: CovariateLaw,
}

impl Default for InfluenceOptions {
    fn default() -> Self {
        InfluenceOptions {
            kind: IfKind::Estimator,
            theta: None,
            observation: 0,
            all: false,
            d: None,
            grid_points: GRID_POINTS,
            halfwidth: GRID_HALFWIDTH,
            design: CovariateLaw {
                n: 100,
                ..CovariateLaw::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub alpha: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub theta: Option<Vec<f64>>,
    pub components: Vec<String>,
    pub curve: Option<IfCurve>,
    /// Limit of the estimator IF at `±∞` (α > 0).
    pub tail_limit: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub kind: IfKind,
    pub hypothesis: Option<String>,
    pub curves: Vec<CurveEntry>,
}

impl Tabular for InfluenceReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["alpha", "component", "y", "value"]);
        for e in &self.curves {
            let Some(c) = &e.curve else { continue };
            for (j, name) in e.components.iter().enumerate() {
                for (y, row) in c.contamination_points.iter().zip(&c.values) {
                    t.push(vec![num(e.alpha), name.clone(), num(*y), num(row[j])]);
                }
            }
        }
        t
    }
}

fn influence_data(cfg: &RunConfig, opts: &InfluenceOptions) -> Result<RegressionData, CliError> {
    if cfg.input_path.is_some() {
        return Ok(cfg.load()?.data);
    }
    let theta = opts
        .theta
        .as_ref()
        .ok_or_else(|| CliError::Config("without --input, --theta is required".into()))?;
    if theta.len() != 3 {
        return Err(CliError::Config(
            "the built-in design has one covariate and no intercept: --theta takes β,σ,γ".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = opts.design.draw().into_iter().map(|x| vec![x]).collect();
    // the responses never enter the influence functions
    let y = rows.iter().map(|x| theta[0] * x[0]).collect();
    Ok(RegressionData::from_rows(&rows, y, vec!["x".into()])?)
}

/// Influence curves on a grid of contamination points, one per α.
pub fn cmd_influence(cfg: &RunConfig, opts: &InfluenceOptions) -> Result<Report<InfluenceReport>, CliError> {
    cfg.validate()?;
    cfg.require_alphas()?;
    let data = influence_data(cfg, opts)?;
    let direction = if opts.all {
        Direction::All
    } else {
        if opts.observation >= data.n() {
            return Err(CliError::Config(format!(
                "observation {} out of range (n = {})",
                opts.observation,
                data.n()
            )));
        }
        Direction::Single(opts.observation)
    };
    let hyp = match opts.kind {
        IfKind::Estimator => None,
        _ => {
            let text = cfg
                .hypothesis
                .first()
                .ok_or_else(|| CliError::Config("test influence functions need --hypothesis".into()))?;
            if opts.theta.is_none() {
                return Err(CliError::Config("test influence functions need --theta in the null set".into()));
            }
            Some(parse_hypothesis(text, &data.column_names)?)
        }
    };
    let fixed_theta = opts.theta.as_ref().map(|t| ParamVector::from_slice(t)).transpose()?;
    let names = param_names(&data.column_names);

    let pool = pool()?;
    let curves = map_indexed(&pool, cfg.alphas.len(), |k| {
        let alpha = cfg.alphas[k];
        let run = || -> snfit_core::Result<(ParamVector, IfCurve, Option<Vec<f64>>, Vec<String>)> {
            let theta = match &fixed_theta {
                Some(t) => t.clone(),
                None => fit(&data, &FitConfig::with_alpha(alpha))?.theta_hat,
            };
            let center_grid = default_grid(direction, &theta, &data)?;
            let center = 0.5 * (center_grid[0] + center_grid[center_grid.len() - 1]);
            let points = grid(center, opts.halfwidth * theta.sigma, opts.grid_points);
            match (&opts.kind, &hyp) {
                (IfKind::Estimator, _) => {
                    let c = if_curve(direction, &theta, &data, alpha, Some(points))?;
                    let tail = if alpha > 0.0 {
                        Some(if_tail_limit(direction, &theta, &data, alpha)?)
                    } else {
                        None
                    };
                    Ok((theta, c, tail, names.clone()))
                }
                (IfKind::SecondOrder, Some(h)) => {
                    let c = test_curve(TestCurve::SecondOrder, direction, &theta, h, &data, alpha, Some(points))?;
                    Ok((theta, c, None, vec!["if2".into()]))
                }
                (IfKind::Power, Some(h)) => {
                    let d = match &opts.d {
                        Some(d) => d.clone(),
                        None => {
                            let mut d = vec![0.0; theta.dim()];
                            for k in h.row_support(&theta)? {
                                d[k] = 0.01;
                            }
                            d
                        }
                    };
                    let kind = TestCurve::Power { d, tau: cfg.level };
                    let c = test_curve(kind, direction, &theta, h, &data, alpha, Some(points))?;
                    Ok((theta, c, None, vec!["pif".into()]))
                }
                _ => unreachable!("hypothesis checked above"),
            }
        };
        match run() {
            Ok((theta, curve, tail_limit, components)) => CurveEntry {
                alpha,
                ok: true,
                error: None,
                theta: Some(theta.to_vec()),
                components,
                curve: Some(curve),
                tail_limit,
            },
            Err(e) => CurveEntry {
                alpha,
                ok: false,
                error: Some(e.to_string()),
                theta: None,
                components: Vec::new(),
                curve: None,
                tail_limit: None,
            },
        }
    });
    let partial = curves.iter().any(|c| !c.ok);
    Ok(report(
        cfg,
        partial,
        InfluenceReport {
            kind: opts.kind,
            hypothesis: hyp.map(|h| h.description().to_string()),
            curves,
        },
    ))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimDesign {
    /// Bias and MSE of the estimates; contamination `SN(−10, 1, 2)`.
    #[default]
    BiasMse,
    /// Empirical level of the test; contamination `SN(−5, 1, 2)`.
    Level,
    /// Empirical power at `β₁ = 2 + d/√n`; contamination `SN(−3, 1, 2)`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOptions {
    pub design: SimDesign,
    pub n: usize,
    pub reps: usize,
    pub contamination: f64,
    /// Contiguous shift for power runs.
    pub d: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            design: SimDesign::BiasMse,
            n: 100,
            reps: 100,
            contamination: 0.0,
            d: 1.5,
        }
    }
}

impl Tabular for SimReport {
    fn table(&self) -> Table {
        match self.kind {
            StudyKind::BiasMse => {
                let mut t = Table::new([
                    "alpha",
                    "parameter",
                    "truth",
                    "bias",
                    "mse",
                    "bias_mc_se",
                    "mse_mc_se",
                    "successes",
                    "failures",
                    "valid",
                ]);
                for a in &self.alphas {
                    for p in &a.parameters {
                        t.push(vec![
                            num(a.alpha),
                            p.name.clone(),
                            num(p.truth),
                            opt_num(p.bias),
                            opt_num(p.mse),
                            opt_num(p.bias_mc_se),
                            opt_num(p.mse_mc_se),
                            a.successes.to_string(),
                            a.failures.to_string(),
                            a.valid.to_string(),
                        ]);
                    }
                }
                t
            }
            _ => {
                let mut t = Table::new(["alpha", "tau", "rate", "mc_se", "successes", "failures", "valid"]);
                for a in &self.alphas {
                    let r = a.rejection.as_ref();
                    t.push(vec![
                        num(a.alpha),
                        opt_num(r.map(|r| r.tau)),
                        opt_num(r.map(|r| r.rate)),
                        opt_num(r.map(|r| r.mc_se)),
                        a.successes.to_string(),
                        a.failures.to_string(),
                        a.valid.to_string(),
                    ]);
                }
                t
            }
        }
    }
}

/// Builds the simulation config a run of `simulate` uses.
pub fn sim_config(cfg: &RunConfig, opts: &SimulateOptions) -> SimConfig {
    let seed = cfg.seed.unwrap_or(42);
    let mut sc = match opts.design {
        SimDesign::BiasMse => SimConfig::table2(opts.n, opts.reps, opts.contamination, seed),
        SimDesign::Level => SimConfig::table3_level(opts.n, opts.reps, opts.contamination, seed),
        SimDesign::Power => SimConfig::table3_power(opts.n, opts.reps, opts.contamination, seed),
    };
    sc.alphas = if cfg.alphas.is_empty() { PAPER_ALPHAS.to_vec() } else { cfg.alphas.clone() };
    sc
}

/// Monte-Carlo study; replications run concurrently and are aggregated in order.
pub fn cmd_simulate(cfg: &RunConfig, opts: &SimulateOptions) -> Result<Report<SimReport>, CliError> {
    cfg.validate()?;
    let sc = sim_config(cfg, opts);
    let study = match opts.design {
        SimDesign::BiasMse => Study::BiasMse,
        design => {
            let text = cfg.hypothesis.first().map_or("x1=2", String::as_str);
            Study::Rejection {
                hyp: parse_hypothesis(text, &sc.column_names())?,
                tau: cfg.level,
                contiguous_d: (design == SimDesign::Power).then_some(opts.d),
            }
        }
    };
    let prepared = Prepared::new(&sc, &study)?;
    let outcomes = run_study(&pool()?, &prepared);
    let rep = prepared.aggregate(&outcomes)?;
    for a in rep.alphas.iter().filter(|a| !a.valid) {
        log::warn!("α = {}: {} of {} replications failed", a.alpha, a.failures, rep.rep_count);
    }
    let partial = rep.alphas.iter().any(|a| !a.valid);
    Ok(report(cfg, partial, rep))
}

// ---------------------------------------------------------------- tune

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub n: usize,
    pub contamination: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub grid_size: usize,
    pub pilot_alpha: f64,
    pub max_rounds: usize,
    /// Tune on one simulated bias/MSE-design dataset instead of `--input`.
    pub synthetic: Option<SyntheticData>,
}

impl Default for TuneOptions {
    fn default() -> Self {
        let t = TuningConfig::default();
        TuneOptions {
            grid_size: t.grid_size,
            pilot_alpha: t.pilot_alpha,
            max_rounds: t.max_rounds,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub n: usize,
    pub column_names: Vec<String>,
    /// Hypothesis whose parameters the AMSE was restricted to, if any.
    pub targeted: Option<String>,
    pub trace: TuningTrace,
}

impl Tabular for TuneReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["round", "alpha", "amse", "chosen"]);
        for (r, row) in self.trace.amse_values.iter().enumerate() {
            for (a, v) in self.trace.alpha_grid.iter().zip(row) {
                t.push(vec![
                    (r + 1).to_string(),
                    num(*a),
                    opt_num(*v),
                    (self.trace.chosen_alpha_per_iter[r] == *a).to_string(),
                ]);
            }
        }
        t
    }
}

/// Iterated Warwick–Jones choice of α, optionally targeted at `--hypothesis`.
pub fn cmd_tune(cfg: &RunConfig, opts: &TuneOptions) -> Result<Report<TuneReport>, CliError> {
    cfg.validate()?;
    let data = match &opts.synthetic {
        Some(s) => generate_dataset(&SimConfig::table2(s.n, 1, s.contamination, cfg.seed.unwrap_or(42)), 0)?,
        None => cfg.load()?.data,
    };
    let tc = TuningConfig {
        grid_size: opts.grid_size,
        pilot_alpha: opts.pilot_alpha,
        max_rounds: opts.max_rounds,
        fit: FitConfig::default(),
    };
    let (trace, targeted) = match cfg.hypothesis.first() {
        Some(text) => {
            let h = parse_hypothesis(text, &data.column_names)?;
            (targeted_select(&data, &h, &tc)?, Some(h.description().to_string()))
        }
        None => (iwj_select(&data, &tc)?, None),
    };
    if !trace.converged {
        log::warn!("tuning did not settle; reporting α = {}", trace.final_alpha);
    }
    if !trace.failed_alphas.is_empty() {
        log::warn!("fits failed and were skipped at α ∈ {:?}", trace.failed_alphas);
    }
    let partial = !trace.failed_alphas.is_empty();
    Ok(report(
        cfg,
        partial,
        TuneReport {
            n: data.n(),
            column_names: data.column_names.clone(),
            targeted,
            trace,
        },
    ))
}
