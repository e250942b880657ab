use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use snfit::commands::{
    cmd_are, cmd_fit, cmd_influence, cmd_qq, cmd_tune, qq_points, AreOptions, FitReport, InfluenceOptions,
    SyntheticData, TuneOptions,
};
use snfit::output::{to_json, Tabular};
use snfit::{load_csv, load_csv_from_reader, CliError, Command, Report, RunConfig, Status};
use snfit_core::dpd_fit::RegressionData;
use snfit_core::numerics::RngStream;
use snfit_core::simulate::{generate_dataset, SimConfig};
use snfit_core::sn_dist::sn_draw;
use snfit_core::{FitResult, ParamVector, SnParams};
use tempfile::TempDir;

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn write_csv(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// `y, x1, x2` from the simulation design (intercept dropped).
fn data_csv(data: &RegressionData) -> String {
    let mut s = String::from("y,x1,x2\n");
    for i in 0..data.n() {
        writeln!(s, "{},{},{}", data.y[i], data.x[(i, 1)], data.x[(i, 2)]).unwrap();
    }
    s
}

fn fit_config(path: &Path, alphas: &[f64]) -> RunConfig {
    let mut cfg = RunConfig::new(Command::Fit);
    cfg.input_path = Some(path.to_path_buf());
    cfg.response_column = Some("y".into());
    cfg.covariate_columns = strings(&["x1", "x2"]);
    cfg.alphas = alphas.to_vec();
    cfg
}

#[test]
fn three_row_file_gets_an_intercept_column() {
    let text = "y,x\n1.5,0.2\n2.0,0.4\n0.1,-1\n";
    let loaded = load_csv_from_reader(text.as_bytes(), "y", &strings(&["x"]), true).unwrap();
    let d = &loaded.data;
    assert_eq!((d.n(), d.p()), (3, 2));
    assert!(d.x.column(0).iter().all(|v| *v == 1.0));
    assert_eq!(d.x[(2, 1)], -1.0);
    assert_eq!(d.column_names, strings(&["(Intercept)", "x"]));
}

#[test]
fn blank_response_cell_drops_the_row() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("y,x\n");
    for i in 0..10 {
        if i == 4 {
            text.push_str(",0.5\n");
        } else {
            writeln!(text, "{},{}", 0.3 * i as f64 + (i * i % 7) as f64, i).unwrap();
        }
    }
    let path = write_csv(&dir, "blank.csv", &text);
    let loaded = load_csv(&path, "y", &strings(&["x"]), true).unwrap();
    assert_eq!(loaded.data.n(), 9);
    assert_eq!(loaded.dropped, 1);
}

#[test]
fn ais_shaped_file() {
    let dir = TempDir::new().unwrap();
    let mut rng = RngStream::new(5, 0);
    let mut text = String::from("Fe,BMI,LBM\n");
    for _ in 0..207 {
        let bmi = rng.normal(23.0, 3.0);
        let lbm = rng.normal(65.0, 13.0);
        let fe = 10.0 + 2.0 * bmi + 0.5 * lbm + rng.normal(0.0, 20.0);
        writeln!(text, "{fe:.2},{bmi:.2},{lbm:.2}").unwrap();
    }
    let path = write_csv(&dir, "ais.csv", &text);
    let loaded = load_csv(&path, "Fe", &strings(&["BMI", "LBM"]), true).unwrap();
    assert_eq!((loaded.data.n(), loaded.data.p()), (207, 3));
}

#[test]
fn missing_column_is_a_config_error() {
    let text = "y,x\n1,2\n";
    let err = load_csv_from_reader(text.as_bytes(), "y", &strings(&["z"]), true).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
}

#[test]
fn too_few_rows_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let path = write_csv(&dir, "small.csv", "y,x\n1,2\n2,3\n3,5\n4,4\n");
    let err = load_csv(&path, "y", &strings(&["x"]), true).unwrap_err();
    assert!(matches!(err, CliError::Data(_)), "{err}");
}

#[test]
fn fit_report_shape_and_json_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = generate_dataset(&SimConfig::table2(80, 1, 0.0, 11), 0).unwrap();
    let path = write_csv(&dir, "sim.csv", &data_csv(&data));
    let cfg = fit_config(&path, &[0.0, 0.5, 1.0]);
    let report = cmd_fit(&cfg).unwrap();
    assert_eq!(report.status, Status::Ok);
    let cells: Vec<f64> = report.result.fits.iter().flat_map(|f| f.rows.iter().map(|r| r.estimate)).collect();
    assert_eq!(cells.len(), 3 * 5);
    assert!(cells.iter().all(|v| v.is_finite()));
    for f in &report.result.fits {
        assert!(f.rows.iter().all(|r| r.se.is_some_and(|s| s.is_finite() && s > 0.0)));
    }
    assert_eq!(report.result.table().rows.len(), 15);

    let text = to_json(&report).unwrap();
    let back: Report<FitReport> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(to_json(&back).unwrap(), text);
}

// With an intercept the model is singular at γ = 0 (the γ score is proportional to
// the intercept score), so the regular case is checked: no intercept.
#[test]
fn symmetric_errors_rarely_reject_symmetry() {
    let dir = TempDir::new().unwrap();
    let mut accepted = 0;
    for seed in 0..50 {
        let mut sc = SimConfig::table2(100, 1, 0.0, 1000 + seed);
        sc.gamma_true = 0.0;
        sc.beta_true[0] = 0.0;
        let data = generate_dataset(&sc, 0).unwrap();
        let path = write_csv(&dir, "sym.csv", &data_csv(&data));
        let mut cfg = fit_config(&path, &[0.3]);
        cfg.intercept = false;
        let report = cmd_fit(&cfg).unwrap();
        let fit = &report.result.fits[0];
        let sym = fit.tests.last().expect("symmetry test present");
        if sym.p_value > 0.05 {
            accepted += 1;
        }
    }
    assert!(accepted >= 45, "symmetry accepted in {accepted}/50 runs");
}

fn fake_fit(residuals: Vec<f64>, law: SnParams) -> FitResult {
    FitResult {
        theta_hat: ParamVector::new(vec![0.0], law.sigma, law.gamma).unwrap(),
        alpha: 0.0,
        objective: 0.0,
        converged: true,
        n_iter: 0,
        grad_norm: 0.0,
        gamma_at_bound: false,
        se: None,
        residuals,
    }
}

#[test]
fn qq_of_model_residuals_is_the_identity_line() {
    let law = SnParams::new(0.0, 1.5, 3.0).unwrap();
    let mut rng = RngStream::new(17, 0);
    let r: Vec<f64> = (0..10_000).map(|_| sn_draw(law, &mut rng)).collect();
    let pts = qq_points(&fake_fit(r, law)).unwrap();
    assert_eq!(pts.len(), 10_000);
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((0.98..=1.02).contains(&slope), "slope {slope}");
    assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
}

#[test]
fn qq_single_residual() {
    let pts = qq_points(&fake_fit(vec![0.3], SnParams::standard(0.0))).unwrap();
    assert_eq!(pts, vec![(0.0, 0.3)]);
}

#[test]
fn qq_command_row_count() {
    let dir = TempDir::new().unwrap();
    let data = generate_dataset(&SimConfig::table2(60, 1, 0.0, 3), 0).unwrap();
    let path = write_csv(&dir, "qq.csv", &data_csv(&data));
    let mut cfg = fit_config(&path, &[0.5]);
    cfg.command = Command::Qq;
    let rep = cmd_qq(&cfg).unwrap();
    assert_eq!(rep.result.table().rows.len(), 60);
    cfg.alphas = vec![0.1, 0.5];
    assert!(cmd_qq(&cfg).is_err());
}

#[test]
fn are_scale_invariance_column() {
    let mut cfg = RunConfig::new(Command::Are);
    cfg.alphas = vec![0.0, 0.1, 0.3, 0.5, 0.7, 1.0];
    let rep = cmd_are(&cfg, &AreOptions::default()).unwrap();
    let t = &rep.result.tables;
    assert_eq!((t[0].error.sigma, t[1].error.sigma), (1.0, 4.0));
    for k in 0..6 {
        assert!((t[0].beta[k] - t[1].beta[k]).abs() < 1e-6);
        assert!((t[0].sigma[k] - t[1].sigma[k]).abs() < 1e-6);
        assert!((t[0].gamma[k] - t[1].gamma[k]).abs() < 1e-6);
    }
}

#[test]
fn influence_curves_have_400_points_per_parameter() {
    let mut cfg = RunConfig::new(Command::Influence);
    cfg.alphas = vec![0.0, 0.5];
    let opts = InfluenceOptions {
        theta: Some(vec![3.0, 2.0, 2.0]),
        ..InfluenceOptions::default()
    };
    let rep = cmd_influence(&cfg, &opts).unwrap();
    assert_eq!(rep.status, Status::Ok);
    for c in &rep.result.curves {
        assert_eq!(c.curve.as_ref().unwrap().values.len(), 400);
        assert_eq!(c.components.len(), 3);
    }
    assert_eq!(rep.result.table().rows.len(), 2 * 3 * 400);
    assert!(rep.result.curves[0].tail_limit.is_none());
    assert!(rep.result.curves[1].tail_limit.is_some());
}

#[test]
fn influence_without_theta_or_input_is_rejected() {
    let mut cfg = RunConfig::new(Command::Influence);
    cfg.alphas = vec![0.5];
    assert!(matches!(
        cmd_influence(&cfg, &InfluenceOptions::default()),
        Err(CliError::Config(_))
    ));
}

#[test]
fn tune_converges_on_contaminated_data() {
    let mut cfg = RunConfig::new(Command::Tune);
    cfg.seed = Some(8);
    let opts = TuneOptions {
        synthetic: Some(SyntheticData {
            n: 100,
            contamination: 0.1,
        }),
        ..TuneOptions::default()
    };
    let rep = cmd_tune(&cfg, &opts).unwrap();
    let trace = &rep.result.trace;
    assert!(trace.converged);
    assert!(trace.chosen_alpha_per_iter.len() <= 20);
    assert_eq!(rep.result.table().rows.len(), 21 * trace.amse_values.len());
}
