//! Command implementations and their file outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ddsvr::data::{read_csv, read_feature_csv};
use ddsvr::evaluation::{run_benchmark, train_method, MethodId, MethodRun};
use ddsvr::kernel::KernelSpec;
use ddsvr::likelihood;
use ddsvr::model_io::{load_model, save_model};
use ddsvr::simulation::{run_table, CellReport, ModelSpec, SimSpec};
use ddsvr::solver::{solve_svr, SvrConfig};

use crate::config;

/// Errors split by exit status: validation problems exit 2, computation
/// problems exit 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Computation(m) => m,
        }
    }
}

impl From<ddsvr::Error> for CliError {
    fn from(e: ddsvr::Error) -> Self {
        use ddsvr::Error::*;
        match e {
            NonConvergence { .. } | DegenerateResiduals | NoRoot { .. } => {
                CliError::Computation(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}-summary.{ext}"))
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.txt");
    PathBuf::from(name)
}

pub fn parse_methods(raw: &str) -> CliResult<Vec<MethodId>> {
    let methods: Vec<MethodId> = raw
        .split(',')
        .map(|m| match m.trim() {
            "tuning" => Ok(MethodId::Tuning),
            "cm" => Ok(MethodId::Cm),
            "kcv" => Ok(MethodId::kcv_default()),
            "dd" => Ok(MethodId::Dd),
            other => Err(CliError::Validation(format!("unknown method '{other}'"))),
        })
        .collect::<CliResult<_>>()?;
    if methods.is_empty() {
        return Err(CliError::Validation("method list is empty".into()));
    }
    Ok(methods)
}

pub fn build_kernel(kernel: &str, gamma: Option<f64>, n_features: usize) -> CliResult<KernelSpec> {
    match kernel {
        "linear" => Ok(KernelSpec::linear()),
        "rbf" => match gamma {
            Some(g) => KernelSpec::rbf(g).map_err(CliError::from),
            None => Ok(KernelSpec::rbf_default(n_features)),
        },
        other => Err(CliError::Validation(format!("unknown kernel '{other}'"))),
    }
}

fn cell_id(spec: &SimSpec) -> String {
    let (model, param) = match spec.model {
        ModelSpec::Sinc { .. } => ("sinc", spec.noise.family.parameter()),
        ModelSpec::Linear { .. } => ("linear", spec.noise.family.parameter()),
    };
    format!(
        "{model}-{}-n{}-s{}-p{}",
        spec.noise.family.label(),
        spec.n,
        spec.noise.scale,
        param
    )
}

fn write_report_csv(reports: &[CellReport]) -> String {
    let mut out = String::from(
        "experiment_id,model,noise,n,scale,noise_param,rep,method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed\n",
    );
    for report in reports {
        let id = cell_id(&report.spec);
        let spec = &report.spec;
        for record in &report.records {
            let r = &record.run;
            writeln!(
                out,
                "{id},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                spec.model.label(),
                spec.noise.family.label(),
                spec.n,
                spec.noise.scale,
                spec.noise.family.parameter(),
                record.rep,
                r.method,
                r.report.mae,
                r.report.rmse,
                opt(r.report.ratio_mae),
                opt(r.report.ratio_rmse),
                r.epsilon_used,
                r.s_hat,
                record.seed,
            )
            .unwrap();
        }
    }
    out
}

fn write_summary_csv(reports: &[CellReport], master_seed: u64) -> String {
    let mut out = String::from(
        "experiment_id,model,noise,n,scale,noise_param,method,reps_ok,reps_failed,mean_mae,mean_rmse,mean_ratio_mae,mean_ratio_rmse,mean_epsilon_used,mean_s_hat,master_seed\n",
    );
    for report in reports {
        let id = cell_id(&report.spec);
        let spec = &report.spec;
        for s in &report.summaries {
            writeln!(
                out,
                "{id},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{master_seed}",
                spec.model.label(),
                spec.noise.family.label(),
                spec.n,
                spec.noise.scale,
                spec.noise.family.parameter(),
                s.method,
                s.reps,
                report.failures.len(),
                s.mean_mae,
                s.mean_rmse,
                s.mean_ratio_mae,
                s.mean_ratio_rmse,
                s.mean_epsilon_used,
                s.mean_s_hat,
            )
            .unwrap();
        }
    }
    out
}

/// `simulate`: run the configured grid, write the per-repetition report,
/// the per-cell summary, and a metadata sidecar.
pub fn simulate(config_path: &Path, out: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config_path.display())))?;
    let config = config::parse(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    let started = std::time::Instant::now();
    let reports = run_table(&config.cells, &config.methods, config.kernel, config.c);
    let elapsed = started.elapsed();

    std::fs::write(out, write_report_csv(&reports))?;
    std::fs::write(summary_path(out), write_summary_csv(&reports, config.seed))?;

    let mut meta = String::new();
    writeln!(meta, "tool ddsvr {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(meta, "schema {}", config::SCHEMA).unwrap();
    writeln!(meta, "config {}", config_path.display()).unwrap();
    writeln!(meta, "master_seed {}", config.seed).unwrap();
    writeln!(meta, "cells {}", config.cells.len()).unwrap();
    writeln!(
        meta,
        "methods {}",
        config.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(",")
    )
    .unwrap();
    for note in &config.notes {
        writeln!(meta, "note {note}").unwrap();
    }
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    writeln!(meta, "failed_repetitions {failures}").unwrap();
    for report in &reports {
        for (rep, message) in &report.failures {
            writeln!(meta, "failure {} rep {rep}: {message}", cell_id(&report.spec)).unwrap();
        }
    }
    writeln!(meta, "elapsed_ms {}", elapsed.as_millis()).unwrap();
    std::fs::write(meta_path(out), meta)?;

    println!(
        "simulate: {} cells x {} methods -> {} ({} failed repetitions)",
        reports.len(),
        config.methods.len(),
        out.display(),
        failures
    );
    Ok(())
}

/// `fit`: train one method on a whole CSV and persist the model.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    data_path: &Path,
    target: Option<&str>,
    method: &str,
    kernel: &str,
    gamma: Option<f64>,
    c: f64,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let method = &parse_methods(method)?[0];
    let raw = read_csv(data_path, target)?;
    let kernel = build_kernel(kernel, gamma, raw.n_features())?;
    let train = raw.standardize_features();
    let stats = train.standardization().expect("just standardized").clone();
    let trained = train_method(method, &train, kernel, c, seed)?;
    save_model(out, &trained.model, Some(&stats))?;
    println!(
        "fit: method={} epsilon={} s_hat={} support_vectors={} -> {}",
        method.label(),
        trained.epsilon_used,
        trained.s_hat,
        trained.model.n_support(),
        out.display()
    );
    Ok(())
}

/// `predict`: load a model, apply its stored feature standardization to the
/// input rows, write one prediction per row.
pub fn predict(model_path: &Path, data_path: &Path, out: &Path) -> CliResult<()> {
    let (model, stats) = load_model(model_path)?;
    let d = model.train_ref.ncols();
    let features = read_feature_csv(data_path, d)?;
    let features = match &stats {
        Some(stats) => {
            let mut scaled = features;
            for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|v| (v - stats.means[j]) / stats.stds[j]);
            }
            scaled
        }
        None => features,
    };
    let mut out_text = String::from("prediction\n");
    for row in features.rows() {
        let value = model.predict(row)?;
        writeln!(out_text, "{value}").unwrap();
    }
    std::fs::write(out, out_text)?;
    println!("predict: {} rows -> {}", features.nrows(), out.display());
    Ok(())
}

/// `bench`: the case-study protocol on a local CSV.
#[allow(clippy::too_many_arguments)]
pub fn bench(
    data_path: &Path,
    target: Option<&str>,
    methods: &str,
    reps: usize,
    split: f64,
    seed: u64,
    kernel: &str,
    gamma: Option<f64>,
    c: f64,
    out: &Path,
) -> CliResult<()> {
    if reps == 0 {
        return Err(CliError::Validation("reps must be >= 1".into()));
    }
    let methods = parse_methods(methods)?;
    let data = read_csv(data_path, target)?;
    let kernel = build_kernel(kernel, gamma, data.n_features())?;
    let dataset_id = data_path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();

    let started = std::time::Instant::now();
    let (bench_reps, failures) = run_benchmark(&data, &methods, reps, split, kernel, c, seed);
    let elapsed = started.elapsed();

    let mut report = String::from(
        "experiment_id,method,rep,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed\n",
    );
    for rep in &bench_reps {
        for run in &rep.runs {
            writeln!(
                report,
                "{dataset_id},{},{},{},{},{},{},{},{},{}",
                run.method,
                rep.rep,
                run.report.mae,
                run.report.rmse,
                opt(run.report.ratio_mae),
                opt(run.report.ratio_rmse),
                run.epsilon_used,
                run.s_hat,
                rep.split_seed,
            )
            .unwrap();
        }
    }
    std::fs::write(out, report)?;

    let mut summary = String::from(
        "experiment_id,method,reps_ok,reps_failed,mean_mae,mean_rmse,mean_ratio_mae,mean_ratio_rmse,mean_epsilon_used,mean_s_hat,master_seed\n",
    );
    for method in &methods {
        let label = method.label();
        let runs: Vec<&MethodRun> = bench_reps
            .iter()
            .flat_map(|r| r.runs.iter())
            .filter(|r| r.method == label)
            .collect();
        let denom = runs.len().max(1) as f64;
        let mean = |f: &dyn Fn(&MethodRun) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / denom;
        writeln!(
            summary,
            "{dataset_id},{label},{},{},{},{},{},{},{},{},{seed}",
            runs.len(),
            failures.len(),
            mean(&|r| r.report.mae),
            mean(&|r| r.report.rmse),
            mean(&|r| r.report.ratio_mae.unwrap_or(f64::NAN)),
            mean(&|r| r.report.ratio_rmse.unwrap_or(f64::NAN)),
            mean(&|r| r.epsilon_used),
            mean(&|r| r.s_hat),
        )
        .unwrap();
    }
    std::fs::write(summary_path(out), summary)?;

    let mut meta = String::new();
    writeln!(meta, "tool ddsvr {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(meta, "data {}", data_path.display()).unwrap();
    writeln!(meta, "rows {} features {}", data.n_samples(), data.n_features()).unwrap();
    writeln!(meta, "master_seed {seed} reps {reps} split {split}").unwrap();
    for (rep, message) in &failures {
        writeln!(meta, "failure rep {rep}: {message}").unwrap();
    }
    writeln!(meta, "elapsed_ms {}", elapsed.as_millis()).unwrap();
    std::fs::write(meta_path(out), meta)?;

    println!(
        "bench: {dataset_id} {} reps ({} failed) -> {}",
        reps,
        failures.len(),
        out.display()
    );
    Ok(())
}

/// Residuals for `curve`: either a one-column CSV, or pilot residuals from
/// a dataset (epsilon = 0 fit on standardized features and targets,
/// residuals rescaled to original units).
#[allow(clippy::too_many_arguments)]
pub fn curve(
    residuals_path: Option<&Path>,
    data_path: Option<&Path>,
    target: Option<&str>,
    kernel: &str,
    gamma: Option<f64>,
    c: f64,
    eps_range: (Option<f64>, Option<f64>, usize),
    s_range: (Option<f64>, Option<f64>, usize),
    out: &Path,
) -> CliResult<()> {
    let residuals: Vec<f64> = match (residuals_path, data_path) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let mut values = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if idx == 0 {
                    if line.trim().parse::<f64>().is_ok() {
                        return Err(CliError::Validation(
                            "residual csv needs a header line".into(),
                        ));
                    }
                    continue;
                }
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let value: f64 = trimmed.parse().map_err(|_| {
                    CliError::Validation(format!("line {}: '{trimmed}' is not a number", idx + 1))
                })?;
                values.push(value);
            }
            values
        }
        (None, Some(path)) => {
            let raw = read_csv(path, target)?;
            let kernel = build_kernel(kernel, gamma, raw.n_features())?;
            let train = raw.standardize_features();
            let n = train.n_samples() as f64;
            let ymean = train.targets().sum() / n;
            let yvar = train
                .targets()
                .iter()
                .map(|y| (y - ymean) * (y - ymean))
                .sum::<f64>()
                / (n - 1.0);
            let sigma_y = if yvar > 0.0 { yvar.sqrt() } else { 1.0 };
            let scaled = train.with_targets(train.targets().mapv(|y| y / sigma_y))?;
            let pilot_config = SvrConfig::new(kernel).with_c(c).with_epsilon(0.0);
            let pilot = solve_svr(&scaled, &pilot_config)?;
            let fitted = pilot.predict_batch(scaled.features())?;
            scaled
                .targets()
                .iter()
                .zip(fitted.iter())
                .map(|(y, p)| (y - p) * sigma_y)
                .collect()
        }
        _ => {
            return Err(CliError::Validation(
                "exactly one of --residuals or --data is required".into(),
            ))
        }
    };
    if residuals.is_empty() {
        return Err(CliError::Validation("no residuals found".into()));
    }

    let fit = likelihood::estimate(&residuals)?;
    let (eps_min, eps_max, eps_steps) = eps_range;
    let (s_min, s_max, s_steps) = s_range;
    if eps_steps == 0 || s_steps == 0 {
        return Err(CliError::Validation("grid steps must be >= 1".into()));
    }
    let eps_min = eps_min.unwrap_or(0.0);
    let eps_max = eps_max.unwrap_or_else(|| (2.0 * fit.epsilon_hat).max(1.0));
    let s_min = s_min.unwrap_or(fit.s_hat / 4.0).max(likelihood::S_FLOOR);
    let s_max = s_max.unwrap_or(fit.s_hat * 4.0);
    if eps_min < 0.0 || s_min <= 0.0 || eps_max < eps_min || s_max < s_min {
        return Err(CliError::Validation("invalid grid bounds".into()));
    }

    let lin = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
        if steps == 1 {
            return vec![lo];
        }
        (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
    };
    let log = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
        if steps == 1 {
            return vec![lo];
        }
        (0..steps).map(|i| lo * (hi / lo).powf(i as f64 / (steps - 1) as f64)).collect()
    };
    let eps_grid = lin(eps_min, eps_max, eps_steps);
    let s_grid = log(s_min, s_max, s_steps);

    let rows = likelihood::curve(&residuals, &eps_grid, &s_grid);
    let mut text = String::from("epsilon,s,neg_log_lik\n");
    for (eps, s, nll) in &rows {
        writeln!(text, "{eps},{s},{nll}").unwrap();
    }
    std::fs::write(out, text)?;
    println!(
        "curve: {} rows -> {} (estimate: epsilon_hat={} s_hat={} neg_log_lik={})",
        rows.len(),
        out.display(),
        fit.epsilon_hat,
        fit.s_hat,
        fit.neg_log_lik
    );
    Ok(())
}
