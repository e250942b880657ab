use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use snfit::commands::{
    cmd_are, cmd_fit, cmd_influence, cmd_qq, cmd_reldiff, cmd_simulate, cmd_test, cmd_tune, AreOptions, IfKind,
    InfluenceOptions, RelDiffOptions, SimDesign, SimulateOptions, SyntheticData, TuneOptions,
};
use snfit::output::{emit, Tabular};
use snfit::{CliError, Command, Format, Report, RunConfig, Status};
use snfit_core::SnParams;

/// Robust skew-normal linear regression by minimum density power divergence.
#[derive(Parser)]
#[command(name = "snfit", version)]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// CSV file with a header row.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Response column.
    #[arg(long, global = true)]
    response: Option<String>,
    /// Covariate columns, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Fit without an intercept column.
    #[arg(long, global = true)]
    no_intercept: bool,
    /// Tuning parameters α, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Null hypothesis, e.g. `x1=2`, `gamma=0` or `symmetry`; repeatable.
    #[arg(long, global = true)]
    hypothesis: Vec<String>,
    /// Test level τ.
    #[arg(long, global = true, default_value_t = 0.05)]
    level: f64,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Record the wall-clock time in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit at each α with standard errors and significance tests.
    Fit,
    /// Wald-type tests of the given hypotheses.
    Test,
    /// Asymptotic relative efficiencies against the MLE.
    Are {
        /// Error laws as `mu:sigma:gamma`, repeatable.
        #[arg(long = "error")]
        errors: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        x_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        x_sd: f64,
        #[arg(long, default_value_t = 10_000)]
        design_n: usize,
        #[arg(long, default_value_t = 20_170_301)]
        design_seed: u64,
    },
    /// Influence curves over a grid of contamination points.
    Influence {
        #[arg(long, value_enum, default_value_t = IfKind::Estimator)]
        kind: IfKind,
        /// Fixed `β…,σ,γ`; otherwise fitted at each α.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// 0-based observation to contaminate.
        #[arg(long, default_value_t = 0)]
        observation: usize,
        /// Contaminate every observation.
        #[arg(long)]
        all: bool,
        /// Contiguous direction for the power IF, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d: Option<Vec<f64>>,
        #[arg(long, default_value_t = snfit_core::influence::GRID_POINTS)]
        grid_points: usize,
        /// Half-width of the grid in units of σ.
        #[arg(long, default_value_t = snfit_core::influence::GRID_HALFWIDTH)]
        halfwidth: f64,
        /// Size of the built-in design used without --input.
        #[arg(long, default_value_t = 100)]
        design_n: usize,
    },
    /// Monte-Carlo bias/MSE, level or power study.
    Simulate {
        #[arg(long, value_enum, default_value_t = SimDesign::BiasMse)]
        design: SimDesign,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Contaminated fraction ε.
        #[arg(long, default_value_t = 0.0)]
        contamination: f64,
        /// Contiguous shift for the power design.
        #[arg(long, default_value_t = 1.5)]
        d: f64,
    },
    /// Data-driven choice of α.
    Tune {
        #[arg(long, default_value_t = 21)]
        grid_size: usize,
        #[arg(long, default_value_t = 0.5)]
        pilot_alpha: f64,
        #[arg(long, default_value_t = 20)]
        max_rounds: usize,
        /// Tune on a simulated dataset of this size instead of --input.
        #[arg(long)]
        synthetic_n: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        synthetic_contamination: f64,
    },
    /// Residual QQ data against the fitted error law.
    Qq,
    /// Relative differences between two fit reports.
    Reldiff {
        #[arg(long)]
        full: PathBuf,
        #[arg(long)]
        clean: PathBuf,
    },
}

fn parse_law(s: &str) -> Result<SnParams, CliError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("bad error law {s:?}; expected mu:sigma:gamma")))?;
    match parts.as_slice() {
        [mu, sigma, gamma] => Ok(SnParams::new(*mu, *sigma, *gamma)?),
        _ => Err(CliError::Config(format!("bad error law {s:?}; expected mu:sigma:gamma"))),
    }
}

fn base_config(cmd: Command, c: &Common) -> RunConfig {
    let mut cfg = RunConfig::new(cmd);
    cfg.input_path = c.input.clone();
    cfg.response_column = c.response.clone();
    cfg.covariate_columns = c.covariates.clone();
    cfg.intercept = !c.no_intercept;
    cfg.alphas = c.alphas.clone();
    cfg.hypothesis = c.hypothesis.clone();
    cfg.level = c.level;
    cfg.seed = c.seed;
    cfg.output_path = c.out.clone();
    cfg.output_format = c.format;
    cfg
}

fn finish<T: Serialize + Tabular>(mut report: Report<T>, c: &Common, started: Instant) -> Result<Status, CliError> {
    let secs = started.elapsed().as_secs_f64();
    log::info!("finished in {secs:.3} s");
    if c.timing {
        report.wall_clock_seconds = Some(secs);
    }
    emit(&report, c.format, c.out.as_deref())?;
    Ok(report.status)
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let started = Instant::now();
    let c = &cli.common;
    match cli.command {
        Sub::Fit => finish(cmd_fit(&base_config(Command::Fit, c))?, c, started),
        Sub::Test => finish(cmd_test(&base_config(Command::Test, c))?, c, started),
        Sub::Qq => finish(cmd_qq(&base_config(Command::Qq, c))?, c, started),
        Sub::Are {
            errors,
            x_mean,
            x_sd,
            design_n,
            design_seed,
        } => {
            let mut opts = AreOptions::default();
            if !errors.is_empty() {
                opts.errors = errors.iter().map(|e| parse_law(e)).collect::<Result<_, _>>()?;
            }
            opts.design.mean = x_mean;
            opts.design.sd = x_sd;
            opts.design.n = design_n;
            opts.design.seed = design_seed;
            let mut cfg = base_config(Command::Are, c);
            if cfg.alphas.is_empty() {
                cfg.alphas = vec![0.0, 0.1, 0.3, 0.5, 0.7, 1.0];
            }
            let cfg = cfg.with_options(&opts)?;
            finish(cmd_are(&cfg, &opts)?, c, started)
        }
        Sub::Influence {
            kind,
            theta,
            observation,
            all,
            d,
            grid_points,
            halfwidth,
            design_n,
        } => {
            let mut opts = InfluenceOptions {
                kind,
                theta,
                observation,
                all,
                d,
                grid_points,
                halfwidth,
                ..InfluenceOptions::default()
            };
            opts.design.n = design_n;
            if let Some(seed) = c.seed {
                opts.design.seed = seed;
            }
            let cfg = base_config(Command::Influence, c).with_options(&opts)?;
            finish(cmd_influence(&cfg, &opts)?, c, started)
        }
        Sub::Simulate {
            design,
            n,
            reps,
            contamination,
            d,
        } => {
            let opts = SimulateOptions {
                design,
                n,
                reps,
                contamination,
                d,
            };
            let mut cfg = base_config(Command::Simulate, c);
            cfg.seed.get_or_insert(42);
            if cfg.alphas.is_empty() {
                cfg.alphas = snfit_core::simulate::PAPER_ALPHAS.to_vec();
            }
            if design != SimDesign::BiasMse && cfg.hypothesis.is_empty() {
                cfg.hypothesis.push("x1=2".into());
            }
            let cfg = cfg.with_options(&opts)?;
            finish(cmd_simulate(&cfg, &opts)?, c, started)
        }
        Sub::Tune {
            grid_size,
            pilot_alpha,
            max_rounds,
            synthetic_n,
            synthetic_contamination,
        } => {
            let opts = TuneOptions {
                grid_size,
                pilot_alpha,
                max_rounds,
                synthetic: synthetic_n.map(|n| SyntheticData {
                    n,
                    contamination: synthetic_contamination,
                }),
            };
            let mut cfg = base_config(Command::Tune, c);
            if opts.synthetic.is_some() {
                cfg.seed.get_or_insert(42);
            }
            let cfg = cfg.with_options(&opts)?;
            finish(cmd_tune(&cfg, &opts)?, c, started)
        }
        Sub::Reldiff { full, clean } => {
            let opts = RelDiffOptions { full, clean };
            let cfg = base_config(Command::Reldiff, c).with_options(&opts)?;
            finish(cmd_reldiff(&cfg, &opts)?, c, started)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
