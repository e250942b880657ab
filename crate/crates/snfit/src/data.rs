//! CSV ingestion with listwise deletion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use snfit_core::RegressionData;

use crate::CliError;

/// Name given to the column of ones.
pub const INTERCEPT_NAME: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub data: RegressionData,
    /// Rows dropped because a used field was blank or not a number.
    pub dropped: usize,
}

/// Reads `path` (RFC 4180, header row) into a regression design.
///
/// Rows with a missing or non-numeric value in any used column are dropped and
/// counted; a column of ones named `(Intercept)` is prepended when `intercept`.
/// Fails with a data error when fewer than `p + 3` rows survive, `p` counting the
/// intercept.
pub fn load_csv(path: &Path, response: &str, covariates: &[String], intercept: bool) -> Result<LoadedData, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let loaded = load_csv_from_reader(file, response, covariates, intercept)?;
    if loaded.dropped > 0 {
        log::warn!(
            "{}: dropped {} row(s) with missing or non-numeric values in the model columns",
            path.display(),
            loaded.dropped
        );
    }
    check_usable(&loaded)?;
    Ok(loaded)
}

/// Model-size check applied by [`load_csv`].
pub fn check_usable(loaded: &LoadedData) -> Result<(), CliError> {
    let (n, p) = (loaded.data.n(), loaded.data.p());
    if n < p + 3 {
        return Err(CliError::Data(format!(
            "{n} usable row(s) after dropping {}; need at least p + 3 = {}",
            loaded.dropped,
            p + 3
        )));
    }
    Ok(())
}

/// Parses and cleans like [`load_csv`] without the minimum-size check or logging.
pub fn load_csv_from_reader<R: Read>(
    reader: R,
    response: &str,
    covariates: &[String],
    intercept: bool,
) -> Result<LoadedData, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("column `{name}` not found in the header")))
    };
    let y_col = find(response)?;
    let x_cols = covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    if covariates.iter().any(|c| c == response) {
        return Err(CliError::Config(format!("`{response}` is both the response and a covariate")));
    }

    let parse = |rec: &csv::StringRecord, col: usize| -> Option<f64> {
        rec.get(col)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let yi = parse(&rec, y_col);
        let xi: Option<Vec<f64>> = x_cols.iter().map(|&c| parse(&rec, c)).collect();
        match (yi, xi) {
            (Some(yi), Some(mut xi)) => {
                if intercept {
                    xi.insert(0, 1.0);
                }
                rows.push(xi);
                y.push(yi);
            }
            _ => dropped += 1,
        }
    }

    let mut names = Vec::with_capacity(covariates.len() + 1);
    if intercept {
        names.push(INTERCEPT_NAME.to_string());
    }
    names.extend(covariates.iter().cloned());
    let p = names.len();
    if p == 0 {
        return Err(CliError::Config("the model has no columns (no covariates and no intercept)".into()));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("no usable rows (dropped {dropped})")));
    }
    let data = RegressionData::from_rows(&rows, y, names)?;
    Ok(LoadedData { data, dropped })
}
