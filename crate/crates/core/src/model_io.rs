//! Model persistence: a versioned flat text format.
//!
//! ```text
//! ddsvr-model v1
//! kernel rbf
//! gamma 0.125
//! c 1
//! epsilon 0.05
//! tol_kkt 0.001
//! max_passes auto
//! target_scale 1
//! bias 0.25
//! n 3
//! d 2
//! feature_means 1.5 2 ]        (optional pair of lines; omitted when the
//! feature_stds 0.5 1 ]         model was trained on raw features)
//! <beta> <x_1> ... <x_d>       (n rows)
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! loaded model reproduces predictions bit-identically on the same
//! platform.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec, DEFAULT_CACHE_BYTES};
use crate::solver::{SvrConfig, SvrModel, MAX_PASSES_AUTO};

const MAGIC: &str = "ddsvr-model v1";

/// Serialize a model (and the feature standardization it expects, if any).
pub fn save_model(
    path: &Path,
    model: &SvrModel,
    standardization: Option<&Standardization>,
) -> Result<()> {
    let mut out = String::new();
    let n = model.beta.len();
    let d = model.train_ref.ncols();
    out.push_str(MAGIC);
    out.push('\n');
    let family = match model.config.kernel.family {
        KernelFamily::Linear => "linear",
        KernelFamily::Rbf => "rbf",
    };
    writeln!(out, "kernel {family}").unwrap();
    writeln!(out, "gamma {}", model.config.kernel.gamma).unwrap();
    writeln!(out, "c {}", model.config.c).unwrap();
    writeln!(out, "epsilon {}", model.config.epsilon).unwrap();
    writeln!(out, "tol_kkt {}", model.config.tol_kkt).unwrap();
    if model.config.max_passes == MAX_PASSES_AUTO {
        writeln!(out, "max_passes auto").unwrap();
    } else {
        writeln!(out, "max_passes {}", model.config.max_passes).unwrap();
    }
    writeln!(out, "target_scale {}", model.target_scale).unwrap();
    writeln!(out, "bias {}", model.bias).unwrap();
    writeln!(out, "n {n}").unwrap();
    writeln!(out, "d {d}").unwrap();
    if let Some(stats) = standardization {
        let means: Vec<String> = stats.means.iter().map(|v| v.to_string()).collect();
        let stds: Vec<String> = stats.stds.iter().map(|v| v.to_string()).collect();
        writeln!(out, "feature_means {}", means.join(" ")).unwrap();
        writeln!(out, "feature_stds {}", stds.join(" ")).unwrap();
    }
    for i in 0..n {
        let mut row = model.beta[i].to_string();
        for j in 0..d {
            row.push(' ');
            row.push_str(&model.train_ref[(i, j)].to_string());
        }
        out.push_str(&row);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::ModelFormat(format!("unexpected end of file at line {}", self.line_no)))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| {
                Error::ModelFormat(format!("line {}: expected '{key} <value>', got '{line}'", self.line_no))
            })
    }

    fn float(&mut self, key: &str) -> Result<f64> {
        let raw = self.field(key)?;
        raw.parse()
            .map_err(|_| Error::ModelFormat(format!("line {}: bad number '{raw}'", self.line_no)))
    }
}

/// Load a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<(SvrModel, Option<Standardization>)> {
    let text = std::fs::read_to_string(path)?;
    let mut reader = LineReader { lines: text.lines(), line_no: 0 };
    let magic = reader.next()?;
    if magic != MAGIC {
        return Err(Error::ModelFormat(format!("expected header '{MAGIC}', got '{magic}'")));
    }
    let family = match reader.field("kernel")? {
        "linear" => KernelFamily::Linear,
        "rbf" => KernelFamily::Rbf,
        other => return Err(Error::ModelFormat(format!("unknown kernel '{other}'"))),
    };
    let gamma = reader.float("gamma")?;
    let c = reader.float("c")?;
    let epsilon = reader.float("epsilon")?;
    let tol_kkt = reader.float("tol_kkt")?;
    let max_passes = match reader.field("max_passes")? {
        "auto" => MAX_PASSES_AUTO,
        raw => raw
            .parse()
            .map_err(|_| Error::ModelFormat(format!("bad max_passes '{raw}'")))?,
    };
    let target_scale = reader.float("target_scale")?;
    let bias = reader.float("bias")?;
    let n = reader.float("n")? as usize;
    let d = reader.float("d")? as usize;

    let mut beta = Vec::with_capacity(n);
    let mut train_ref = Array2::zeros((n, d));
    let mut standardization = None;
    let mut first_row: Option<&str> = None;
    let line = reader.next()?;
    if let Some(rest) = line.strip_prefix("feature_means ") {
        let means = parse_floats(rest, d, reader.line_no)?;
        let stds_line = reader.field("feature_stds")?;
        let stds = parse_floats(stds_line, d, reader.line_no)?;
        standardization = Some(Standardization { means, stds });
    } else {
        first_row = Some(line);
    }
    for i in 0..n {
        let line = match first_row.take() {
            Some(l) => l,
            None => reader.next()?,
        };
        let values = parse_floats(line, d + 1, reader.line_no)?;
        beta.push(values[0]);
        for j in 0..d {
            train_ref[(i, j)] = values[j + 1];
        }
    }

    let kernel = KernelSpec { family, gamma };
    let support_indices = (0..n).filter(|&i| beta[i] != 0.0).collect();
    Ok((
        SvrModel {
            beta,
            bias,
            support_indices,
            config: SvrConfig {
                c,
                epsilon,
                kernel,
                tol_kkt,
                max_passes,
                cache_bytes: DEFAULT_CACHE_BYTES,
            },
            train_ref,
            target_scale,
        },
        standardization,
    ))
}

fn parse_floats(raw: &str, expected: usize, line_no: usize) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        raw.split_whitespace().map(str::parse).collect();
    let values =
        values.map_err(|_| Error::ModelFormat(format!("line {line_no}: bad number in '{raw}'")))?;
    if values.len() != expected {
        return Err(Error::ModelFormat(format!(
            "line {line_no}: expected {expected} numbers, got {}",
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::rng::RngStream;
    use crate::solver::solve_svr;
    use ndarray::{Array1, Array2};

    #[test]
    fn round_trip_reproduces_predictions_bit_identically() {
        let mut rng = RngStream::new(123, 0);
        let n = 20;
        let mut features = Array2::zeros((n, 2));
        let mut targets = Array1::zeros(n);
        for i in 0..n {
            features[(i, 0)] = rng.uniform(-2.0, 2.0);
            features[(i, 1)] = rng.uniform(-2.0, 2.0);
            targets[i] = features[(i, 0)].sin() + 0.2 * rng.normal();
        }
        let data = Dataset::new(features, targets).unwrap();
        let std_data = data.standardize_features();
        let stats = std_data.standardization().unwrap().clone();
        let config = SvrConfig::new(KernelSpec::rbf(0.5).unwrap()).with_epsilon(0.05);
        let model = solve_svr(&std_data, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&path, &model, Some(&stats)).unwrap();
        let (loaded, loaded_stats) = load_model(&path).unwrap();

        assert_eq!(loaded_stats.as_ref(), Some(&stats));
        assert_eq!(loaded.beta, model.beta);
        assert_eq!(loaded.bias.to_bits(), model.bias.to_bits());
        let mut probe = RngStream::new(9, 9);
        for _ in 0..50 {
            let x = ndarray::array![probe.uniform(-2.0, 2.0), probe.uniform(-2.0, 2.0)];
            let a = model.predict(x.view()).unwrap();
            let b = loaded.predict(x.view()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reports_malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "not a model\n").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }
}
