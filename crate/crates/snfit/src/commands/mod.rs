//! One function per subcommand. Each takes the echoed [`RunConfig`] plus its own
//! typed options and returns a [`Report`].

mod estimate;
mod studies;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, LoadedData};
use crate::output::{Format, Report};
use crate::CliError;

pub use estimate::{cmd_fit, cmd_qq, cmd_reldiff, cmd_test, qq_points, AlphaFit, AlphaTests, FitReport, ParamRow, QqReport, RelDiffOptions, RelDiffReport, RelDiffRow, TestReport};
pub use studies::{
    cmd_are, cmd_influence, cmd_simulate, cmd_tune, AreOptions, AreReport, CurveEntry, IfKind, InfluenceOptions,
    InfluenceReport, SimDesign, SimulateOptions, SyntheticData, TuneOptions, TuneReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fit,
    Test,
    Are,
    Influence,
    Simulate,
    Tune,
    Qq,
    Reldiff,
}

/// Echo of everything a run was asked to do; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub response_column: Option<String>,
    pub covariate_columns: Vec<String>,
    pub intercept: bool,
    pub alphas: Vec<f64>,
    pub hypothesis: Vec<String>,
    pub level: f64,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Format,
    /// Subcommand-specific options.
    pub options: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input_path: None,
            response_column: None,
            covariate_columns: Vec::new(),
            intercept: true,
            alphas: Vec::new(),
            hypothesis: Vec::new(),
            level: 0.05,
            seed: None,
            output_path: None,
            output_format: Format::Json,
            options: serde_json::Value::Null,
        }
    }

    pub fn with_options<T: Serialize>(mut self, options: &T) -> Result<Self, CliError> {
        self.options = serde_json::to_value(options)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && **a <= snfit_core::dpd_fit::MAX_ALPHA)) {
            return Err(CliError::Config(format!("α = {a} is outside [0, 2]")));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!("level {} is outside (0, 1)", self.level)));
        }
        Ok(())
    }

    fn require_alphas(&self) -> Result<(), CliError> {
        if self.alphas.is_empty() {
            return Err(CliError::Config("no α values given".into()));
        }
        Ok(())
    }

    /// Loads the configured input file.
    pub fn load(&self) -> Result<LoadedData, CliError> {
        let path = self
            .input_path
            .as_ref()
            .ok_or_else(|| CliError::Config("--input is required".into()))?;
        let response = self
            .response_column
            .as_ref()
            .ok_or_else(|| CliError::Config("--response is required".into()))?;
        load_csv(path, response, &self.covariate_columns, self.intercept)
    }
}

pub(crate) fn param_names(column_names: &[String]) -> Vec<String> {
    let mut v = column_names.to_vec();
    v.push("sigma".into());
    v.push("gamma".into());
    v
}

pub(crate) fn status_of(partial: bool) -> crate::Status {
    if partial {
        crate::Status::Partial
    } else {
        crate::Status::Ok
    }
}

pub(crate) fn report<T>(cfg: &RunConfig, partial: bool, result: T) -> Report<T> {
    Report::new(cfg, status_of(partial), result)
}
