//! Baseline tube-selection methods, the empirical `C` rule, and metric
//! reporting against the fixed-tuning baseline.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rng::RngStream;
use crate::solver::{fit_dd, solve_svr, SvrConfig};

/// The default epsilon candidates for k-fold cross validation.
pub const KCV_DEFAULT_CANDIDATES: [f64; 5] = [0.01, 0.05, 0.1, 0.2, 0.3];

/// Tube-selection method.
///
/// `Tuning` always trains with the fixed setting `(C, epsilon) = (1.0,
/// 0.1)` and serves as the ratio denominator for every other method.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodId {
    Tuning,
    /// Cherkassky-Ma rule `epsilon = 3 sigma sqrt(ln n / n)`, with `sigma`
    /// the standard deviation of pilot residuals at `epsilon = 0`.
    Cm,
    /// k-fold cross validation over a candidate list.
    KCv { k: usize, candidates: Vec<f64> },
    /// The data-driven working-likelihood pipeline.
    Dd,
}

impl MethodId {
    pub fn kcv_default() -> Self {
        MethodId::KCv { k: 10, candidates: KCV_DEFAULT_CANDIDATES.to_vec() }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MethodId::Tuning => "tuning",
            MethodId::Cm => "cm",
            MethodId::KCv { .. } => "kcv",
            MethodId::Dd => "dd",
        }
    }
}

/// Test-set error report. Ratios are relative to a tuning run on the same
/// split and present only once attached via [`MethodRun::attach_ratios`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    pub ratio_mae: Option<f64>,
    pub ratio_rmse: Option<f64>,
}

/// One method's outcome on one split: metrics plus the tube parameters it
/// actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: String,
    pub report: MetricReport,
    pub epsilon_used: f64,
    pub s_hat: f64,
}

impl MethodRun {
    /// Attach `ratio_X = X(tuning) / X(self)` from a tuning run on the same
    /// split.
    pub fn attach_ratios(&mut self, tuning: &MetricReport) {
        self.report.ratio_mae = Some(tuning.mae / self.report.mae);
        self.report.ratio_rmse = Some(tuning.rmse / self.report.rmse);
    }
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Cherkassky-Ma tube rule: `3 sigma sqrt(ln n / n)`.
pub fn cm_epsilon(sigma_noise: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, got: n });
    }
    if !(sigma_noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma_noise}")));
    }
    Ok(3.0 * sigma_noise * ((n as f64).ln() / n as f64).sqrt())
}

/// Empirical `C` rule: the 0.95 quantile of `|y|`, nearest-rank convention
/// (the `ceil(0.95 n)`-th order statistic).
pub fn c_cm(targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut abs: Vec<f64> = targets.iter().map(|y| y.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (0.95 * abs.len() as f64).ceil() as usize;
    Ok(abs[rank.clamp(1, abs.len()) - 1])
}

/// Sample standard deviation (divisor `n - 1`).
fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Pick the tube width minimizing mean fold RMSE under deterministic
/// (seeded) folds; ties break toward the smaller candidate, and the result
/// does not depend on candidate order.
///
/// Folds partition the shuffled rows into `k` nearly equal blocks (sizes
/// differ by at most one); each block serves as the validation set once.
pub fn kcv_select(
    train: &Dataset,
    k: usize,
    candidates: &[f64],
    kernel: KernelSpec,
    c: f64,
    seed: u64,
) -> Result<f64> {
    let n = train.n_samples();
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { k, n });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<f64> = candidates.to_vec();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    order.dedup();

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(seed, 0);
    rng.shuffle(&mut indices);
    // first (n mod k) folds take the extra row
    let base = n / k;
    let extra = n % k;
    let mut folds: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut cursor = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(indices[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let features = train.features();
    let targets = train.targets();
    let mut best: Option<(f64, f64)> = None; // (mean rmse, epsilon)
    for &eps in &order {
        let mut fold_scores = Vec::with_capacity(k);
        for fold in &folds {
            let fold_set: std::collections::HashSet<usize> = fold.iter().copied().collect();
            let train_idx: Vec<usize> = (0..n).filter(|i| !fold_set.contains(i)).collect();
            let mut tf = ndarray::Array2::zeros((train_idx.len(), train.n_features()));
            let mut ty = ndarray::Array1::zeros(train_idx.len());
            for (r, &i) in train_idx.iter().enumerate() {
                tf.row_mut(r).assign(&features.row(i));
                ty[r] = targets[i];
            }
            let sub = Dataset::new(tf, ty)?;
            let config = SvrConfig::new(kernel).with_c(c).with_epsilon(eps);
            let model = solve_svr(&sub, &config)?;
            let preds: Vec<f64> = fold
                .iter()
                .map(|&i| model.predict(features.row(i)))
                .collect::<Result<_>>()?;
            let truth: Vec<f64> = fold.iter().map(|&i| targets[i]).collect();
            fold_scores.push(rmse(&preds, &truth)?);
        }
        let mean_rmse = fold_scores.iter().sum::<f64>() / k as f64;
        match best {
            Some((score, _)) if mean_rmse >= score => {}
            _ => best = Some((mean_rmse, eps)),
        }
    }
    Ok(best.expect("candidates is non-empty").1)
}

/// A model trained by one method's rule, with the tube parameters it used.
/// The model's `target_scale` already folds in every target scaling, so
/// [`crate::solver::SvrModel::predict`] yields original-unit predictions.
#[derive(Debug, Clone)]
pub struct TrainedMethod {
    pub model: crate::solver::SvrModel,
    pub epsilon_used: f64,
    pub s_hat: f64,
}

/// Train a model per the method's rule.
///
/// Every method works on computationally standardized targets — training
/// targets divided by their sample standard deviation, with the scale
/// folded back into the model — so `(C, epsilon)` settings are scale-free.
/// The data-driven pipeline replaces that with its own statistical
/// standardization: its pilot runs on the computationally standardized
/// targets, but the refit divides by the estimated noise scale instead.
///
/// `c` is the regularization used by every method except `Tuning`, which is
/// fixed by definition. `fold_seed` seeds CV folds (`KCv` only).
pub fn train_method(
    method: &MethodId,
    train: &Dataset,
    kernel: KernelSpec,
    c: f64,
    fold_seed: u64,
) -> Result<TrainedMethod> {
    let sigma_y = {
        let s = sample_std(&train.targets().to_vec());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let scaled = train.with_targets(train.targets().mapv(|y| y / sigma_y))?;

    let (mut model, epsilon_used, s_hat) = match method {
        MethodId::Tuning => {
            let config = SvrConfig::new(kernel); // (C, epsilon) = (1, 0.1)
            (solve_svr(&scaled, &config)?, config.epsilon, 1.0)
        }
        MethodId::Cm => {
            let pilot_config = SvrConfig::new(kernel).with_c(c).with_epsilon(0.0);
            let pilot = solve_svr(&scaled, &pilot_config)?;
            let fitted = pilot.predict_batch(scaled.features())?;
            let residuals: Vec<f64> = scaled
                .targets()
                .iter()
                .zip(fitted.iter())
                .map(|(y, p)| y - p)
                .collect();
            let eps = cm_epsilon(sample_std(&residuals), train.n_samples())?;
            let config = SvrConfig::new(kernel).with_c(c).with_epsilon(eps);
            (solve_svr(&scaled, &config)?, eps, 1.0)
        }
        MethodId::KCv { k, candidates } => {
            let eps = kcv_select(&scaled, *k, candidates, kernel, c, fold_seed)?;
            let config = SvrConfig::new(kernel).with_c(c).with_epsilon(eps);
            (solve_svr(&scaled, &config)?, eps, 1.0)
        }
        MethodId::Dd => {
            let fit = fit_dd(&scaled, kernel, c)?;
            // report the scale in original target units
            let s_hat = fit.likelihood.s_hat * sigma_y;
            (fit.model, fit.likelihood.epsilon_hat, s_hat)
        }
    };
    model.target_scale *= sigma_y;
    Ok(TrainedMethod { model, epsilon_used, s_hat })
}

/// Train per the method's rule, predict the test set, compute MAE/RMSE.
///
/// Ratios are not attached here; see [`MethodRun::attach_ratios`].
pub fn run_method(
    method: &MethodId,
    train: &Dataset,
    test: &Dataset,
    kernel: KernelSpec,
    c: f64,
    fold_seed: u64,
) -> Result<MethodRun> {
    let trained = train_method(method, train, kernel, c, fold_seed)?;
    let predictions = trained.model.predict_batch(test.features())?;
    let truth = test.targets().to_vec();
    let mut run = MethodRun {
        method: method.label().to_string(),
        report: MetricReport {
            mae: mae(&predictions, &truth)?,
            rmse: rmse(&predictions, &truth)?,
            ratio_mae: None,
            ratio_rmse: None,
        },
        epsilon_used: trained.epsilon_used,
        s_hat: trained.s_hat,
    };
    if matches!(method, MethodId::Tuning) {
        run.report.ratio_mae = Some(1.0);
        run.report.ratio_rmse = Some(1.0);
    }
    Ok(run)
}

/// One repetition of a benchmark run: the split/fold seeds used and every
/// requested method's outcome (ratios attached).
#[derive(Debug, Clone)]
pub struct BenchRep {
    pub rep: usize,
    pub split_seed: u64,
    pub fold_seed: u64,
    pub runs: Vec<MethodRun>,
}

/// Case-study protocol: per repetition, a reseeded train/test split,
/// feature standardization fitted on the training half, and every method
/// run on the identical split with ratios against tuning. Repetitions run
/// in parallel; failures are excluded and reported, never retried.
pub fn run_benchmark(
    data: &Dataset,
    methods: &[MethodId],
    reps: usize,
    train_fraction: f64,
    kernel: KernelSpec,
    c: f64,
    master_seed: u64,
) -> (Vec<BenchRep>, Vec<(usize, String)>) {
    use rayon::prelude::*;
    let outcomes: Vec<std::result::Result<BenchRep, String>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = crate::rng::RngStream::new(master_seed, rep as u64);
            let split_seed = rng.next_u64();
            let fold_seed = rng.next_u64();
            let one = || -> Result<BenchRep> {
                let spec = crate::data::SplitSpec { train_fraction, seed: split_seed };
                let (train_raw, test_raw) = crate::data::split(data, &spec)?;
                let train = train_raw.standardize_features();
                let stats = train.standardization().expect("just standardized").clone();
                let test = test_raw.apply_standardization(&stats)?;
                let tuning = run_method(&MethodId::Tuning, &train, &test, kernel, c, fold_seed)?;
                let mut runs = Vec::with_capacity(methods.len());
                for method in methods {
                    if matches!(method, MethodId::Tuning) {
                        runs.push(tuning.clone());
                    } else {
                        let mut run = run_method(method, &train, &test, kernel, c, fold_seed)?;
                        run.attach_ratios(&tuning.report);
                        runs.push(run);
                    }
                }
                Ok(BenchRep { rep, split_seed, fold_seed, runs })
            };
            one().map_err(|e| e.to_string())
        })
        .collect();
    let mut reps_ok = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => reps_ok.push(r),
            Err(message) => failures.push((rep, message)),
        }
    }
    (reps_ok, failures)
}
