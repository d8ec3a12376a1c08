//! Parser for the simulation grid config.
//!
//! The format is line-based `key = value` text with `#` comments and a
//! versioned schema line first:
//!
//! ```text
//! ddsvr-sim v1
//! seed = 42
//! model = sinc                 # sinc | linear
//! noise = eps-laplacian        # eps-laplacian | normal | uniform
//! n = 200, 400, 1000           # grid list
//! scale = 0.8, 1.0, 1.2        # grid list: the noise scale s
//! noise-param = 0.2            # grid list: epsilon / sigma / b
//! repetitions = 20
//! methods = tuning, cm, kcv, dd
//! amplitude = 5                # optional (sinc); default by noise family
//! beta0 = 1                    # optional (linear)
//! beta1 = 2                    # optional (linear); default by noise family
//! kernel = rbf                 # optional; default by model
//! gamma = 1.0                  # optional; default 1/d
//! c = 1.0                      # optional pilot regularization
//! ```
//!
//! The grid is the cross product of `n` x `scale` x `noise-param`, expanded
//! in that nesting order. Each cell gets a seed derived from the master
//! seed and its grid index, so the whole run is reproducible from the
//! config alone.
//!
//! Default amplitudes follow the noise family (eps-laplacian 5, normal 4,
//! uniform 6), as do linear slopes (2, 2, 1); the defaults in force are
//! echoed into the run's metadata sidecar.

use ddsvr::evaluation::MethodId;
use ddsvr::kernel::{KernelFamily, KernelSpec};
use ddsvr::rng::RngStream;
use ddsvr::simulation::{ModelSpec, NoiseFamily, NoiseSpec, SimSpec};

pub const SCHEMA: &str = "ddsvr-sim v1";

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModelKind {
    Sinc,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NoiseKind {
    EpsLaplacian,
    Normal,
    Uniform,
}

/// A fully expanded simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub cells: Vec<SimSpec>,
    pub methods: Vec<MethodId>,
    pub kernel: Option<KernelSpec>,
    pub c: f64,
    /// Human-readable notes about defaults that were applied.
    pub notes: Vec<String>,
}

struct RawField {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

pub fn parse(text: &str) -> Result<SimConfig, ParseError> {
    let mut fields: std::collections::HashMap<String, RawField> = std::collections::HashMap::new();
    let mut schema_seen = false;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if !schema_seen {
            if line != SCHEMA {
                return Err(err(line_no, format!("expected schema line '{SCHEMA}', got '{line}'")));
            }
            schema_seen = true;
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_string();
        if fields.contains_key(&key) {
            return Err(err(line_no, format!("duplicate key '{key}'")));
        }
        fields.insert(
            key,
            RawField { line: line_no, value: value.trim().to_string(), used: std::cell::Cell::new(false) },
        );
    }
    if !schema_seen {
        return Err(err(1, format!("missing schema line '{SCHEMA}'")));
    }

    let get = |key: &str| -> Option<&RawField> {
        fields.get(key).inspect(|f| f.used.set(true))
    };
    let require = |key: &str| -> Result<&RawField, ParseError> {
        get(key).ok_or_else(|| err(0, format!("missing required key '{key}'")))
    };
    let parse_u64 = |f: &RawField| -> Result<u64, ParseError> {
        f.value.parse().map_err(|_| err(f.line, format!("'{}' is not an integer", f.value)))
    };
    let parse_f64 = |f: &RawField| -> Result<f64, ParseError> {
        f.value.parse().map_err(|_| err(f.line, format!("'{}' is not a number", f.value)))
    };
    let parse_f64_list = |f: &RawField| -> Result<Vec<f64>, ParseError> {
        f.value
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| err(f.line, format!("'{}' is not a number", v.trim())))
            })
            .collect()
    };

    let seed = parse_u64(require("seed")?)?;

    let model_field = require("model")?;
    let model_kind = match model_field.value.as_str() {
        "sinc" => ModelKind::Sinc,
        "linear" => ModelKind::Linear,
        other => return Err(err(model_field.line, format!("unknown model '{other}'"))),
    };
    let noise_field = require("noise")?;
    let noise_kind = match noise_field.value.as_str() {
        "eps-laplacian" => NoiseKind::EpsLaplacian,
        "normal" => NoiseKind::Normal,
        "uniform" => NoiseKind::Uniform,
        other => return Err(err(noise_field.line, format!("unknown noise family '{other}'"))),
    };

    let ns_field = require("n")?;
    let ns: Vec<usize> = parse_f64_list(ns_field)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 20.0 {
                Ok(v as usize)
            } else {
                Err(err(ns_field.line, format!("n must be an integer >= 20, got {v}")))
            }
        })
        .collect::<Result<_, _>>()?;
    let scales = parse_f64_list(require("scale")?)?;
    let params = parse_f64_list(require("noise-param")?)?;
    if ns.is_empty() || scales.is_empty() || params.is_empty() {
        return Err(err(0, "empty grid: n, scale, and noise-param must be non-empty"));
    }

    let reps_field = require("repetitions")?;
    let repetitions = parse_u64(reps_field)? as usize;
    if repetitions == 0 {
        return Err(err(reps_field.line, "repetitions must be >= 1"));
    }

    let methods_field = require("methods")?;
    let methods: Vec<MethodId> = methods_field
        .value
        .split(',')
        .map(|m| match m.trim() {
            "tuning" => Ok(MethodId::Tuning),
            "cm" => Ok(MethodId::Cm),
            "kcv" => Ok(MethodId::kcv_default()),
            "dd" => Ok(MethodId::Dd),
            other => Err(err(methods_field.line, format!("unknown method '{other}'"))),
        })
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(err(methods_field.line, "methods must be non-empty"));
    }

    let mut notes = Vec::new();

    let amplitude = match get("amplitude") {
        Some(f) => parse_f64(f)?,
        None => {
            let a = match noise_kind {
                NoiseKind::EpsLaplacian => 5.0,
                NoiseKind::Normal => 4.0,
                NoiseKind::Uniform => 6.0,
            };
            if model_kind == ModelKind::Sinc {
                notes.push(format!("amplitude defaulted to {a} for {} noise", noise_label(noise_kind)));
            }
            a
        }
    };
    let beta0 = match get("beta0") {
        Some(f) => parse_f64(f)?,
        None => 1.0,
    };
    let beta1 = match get("beta1") {
        Some(f) => parse_f64(f)?,
        None => {
            let b = match noise_kind {
                NoiseKind::EpsLaplacian => 2.0,
                NoiseKind::Normal => 2.0,
                NoiseKind::Uniform => 1.0,
            };
            if model_kind == ModelKind::Linear {
                notes.push(format!("beta1 defaulted to {b} for {} noise", noise_label(noise_kind)));
            }
            b
        }
    };

    let kernel = match (get("kernel"), get("gamma")) {
        (None, None) => None,
        (None, Some(g)) => {
            let gamma = parse_f64(g)?;
            Some(KernelSpec::rbf(gamma).map_err(|e| err(g.line, e.to_string()))?)
        }
        (Some(k), gamma_field) => match k.value.as_str() {
            "linear" => Some(KernelSpec::linear()),
            "rbf" => {
                let gamma = match gamma_field {
                    Some(g) => parse_f64(g)?,
                    None => 1.0,
                };
                Some(KernelSpec { family: KernelFamily::Rbf, gamma })
            }
            other => return Err(err(k.line, format!("unknown kernel '{other}'"))),
        },
    };

    let c = match get("c") {
        Some(f) => {
            let value = parse_f64(f)?;
            if value <= 0.0 {
                return Err(err(f.line, "c must be positive"));
            }
            value
        }
        None => 1.0,
    };

    for (key, field) in &fields {
        if !field.used.get() {
            return Err(err(field.line, format!("unknown key '{key}'")));
        }
    }

    let model = match model_kind {
        ModelKind::Sinc => ModelSpec::Sinc { a: amplitude },
        ModelKind::Linear => ModelSpec::Linear { beta0, beta1 },
    };
    let mut cells = Vec::new();
    let mut cell_idx = 0u64;
    for &n in &ns {
        for &scale in &scales {
            for &param in &params {
                let family = match noise_kind {
                    NoiseKind::EpsLaplacian => NoiseFamily::EpsLaplacian { epsilon: param },
                    NoiseKind::Normal => NoiseFamily::Normal { sigma: param },
                    NoiseKind::Uniform => NoiseFamily::Uniform { b: param },
                };
                let cell_seed = RngStream::new(seed, cell_idx).next_u64();
                cells.push(SimSpec {
                    model,
                    noise: NoiseSpec { family, scale },
                    n,
                    repetitions,
                    seed: cell_seed,
                });
                cell_idx += 1;
            }
        }
    }

    Ok(SimConfig { seed, cells, methods, kernel, c, notes })
}

fn noise_label(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::EpsLaplacian => "eps-laplacian",
        NoiseKind::Normal => "normal",
        NoiseKind::Uniform => "uniform",
    }
}
