//! Epsilon-SVR dual solver (pairwise coordinate optimization) and the
//! four-step data-driven training pipeline.
//!
//! The dual is solved over the signed coefficients `beta_i = alpha_i -
//! alpha_i*`, which keeps the complementarity `alpha_i * alpha_i* = 0`
//! implicit: the objective is
//!
//! ```text
//! maximize  -1/2 sum_ij beta_i beta_j K_ij - eps sum |beta_i| + sum y_i beta_i
//! s.t.      sum beta_i = 0,   -C <= beta_i <= C
//! ```
//!
//! Each step picks the maximal-KKT-violating pair and transfers mass
//! `t > 0` from `beta_j` to `beta_i`, which preserves the equality
//! constraint by construction. The transfer is capped so no coefficient
//! crosses a kink of the `|beta|` term or leaves the box, making every
//! one-dimensional subproblem exactly solvable.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, KernelFamily, KernelSpec, RowCache, DEFAULT_CACHE_BYTES};
use crate::likelihood::{self, eps_loss, WorkingLikelihoodFit};

/// Default KKT tolerance.
pub const DEFAULT_TOL_KKT: f64 = 1e-3;

/// Relative duality gap enforced on every returned model.
pub const GAP_TOL: f64 = 1e-4;

/// `max_passes` value meaning "derive the budget from the problem size":
/// `min(10 n, 100_000)` pair updates.
pub const MAX_PASSES_AUTO: usize = usize::MAX;

fn auto_budget(n: usize) -> usize {
    // 10 n is far too tight for small problems: a rank-deficient Gram
    // (linear kernel) makes the first-order pair selection take many tiny
    // steps, and those problems are cheap anyway. The 100k hard cap stands.
    (10 * n).max(20_000).min(100_000)
}

/// Solver configuration: regularization `C`, tube half-width `epsilon`,
/// kernel, KKT tolerance, and the pair-update budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub tol_kkt: f64,
    /// Pair-update budget; [`MAX_PASSES_AUTO`] picks `min(10 n, 100_000)`.
    pub max_passes: usize,
    /// Byte budget of the kernel row cache.
    pub cache_bytes: usize,
}

impl SvrConfig {
    /// Defaults: `C = 1`, `epsilon = 0.1` (the fixed tuning setting),
    /// `tol_kkt = 1e-3`, automatic budget.
    pub fn new(kernel: KernelSpec) -> Self {
        SvrConfig {
            c: 1.0,
            epsilon: 0.1,
            kernel,
            tol_kkt: DEFAULT_TOL_KKT,
            max_passes: MAX_PASSES_AUTO,
            cache_bytes: DEFAULT_CACHE_BYTES,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_kkt = tol;
        self
    }

    pub fn with_max_passes(mut self, max_passes: usize) -> Self {
        self.max_passes = max_passes;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tol_kkt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol_kkt must be positive, got {}",
                self.tol_kkt
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be positive".into()));
        }
        if self.kernel.family == KernelFamily::Rbf && !(self.kernel.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rbf gamma must be positive, got {}",
                self.kernel.gamma
            )));
        }
        Ok(())
    }
}

/// Trained model: dual coefficients, bias, the retained training features
/// for the kernel expansion, and the target scale applied at prediction.
#[derive(Debug, Clone)]
pub struct SvrModel {
    /// `beta_i = alpha_i - alpha_i*`, one per training row.
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Indices with `beta_i != 0`.
    pub support_indices: Vec<usize>,
    pub config: SvrConfig,
    /// Training features retained for prediction.
    pub train_ref: ndarray::Array2<f64>,
    /// Multiplies every prediction; `s_hat` for data-driven models, 1
    /// otherwise.
    pub target_scale: f64,
}

impl SvrModel {
    /// Predict one point: `target_scale * (sum_i beta_i k(x_i, x) + bias)`,
    /// summing over support vectors in index order.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.train_ref.ncols() {
            return Err(Error::DimensionMismatch { expected: self.train_ref.ncols(), got: x.len() });
        }
        let mut acc = self.bias;
        for &i in &self.support_indices {
            acc += self.beta[i] * kernel_eval(&self.config.kernel, self.train_ref.row(i), x);
        }
        Ok(self.target_scale * acc)
    }

    pub fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        xs.rows().into_iter().map(|row| self.predict(row)).collect()
    }

    pub fn n_support(&self) -> usize {
        self.support_indices.len()
    }
}

/// Outcome of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    /// Max KKT violation is at or below the tolerance.
    Converged(f64),
    Updated,
}

struct Solver<'a> {
    data: &'a Dataset,
    y: Vec<f64>,
    c: f64,
    epsilon: f64,
    beta: Vec<f64>,
    /// Bias-free predictions `K beta`.
    f_tilde: Vec<f64>,
    diag: Vec<f64>,
    cache: RowCache,
    pair_updates: usize,
}

impl<'a> Solver<'a> {
    fn new(data: &'a Dataset, config: &SvrConfig) -> Self {
        let n = data.n_samples();
        let diag = (0..n)
            .map(|i| kernel_eval(&config.kernel, data.row(i), data.row(i)))
            .collect();
        Solver {
            data,
            y: data.targets().to_vec(),
            c: config.c,
            epsilon: config.epsilon,
            beta: vec![0.0; n],
            f_tilde: vec![0.0; n],
            diag,
            cache: RowCache::new(config.kernel, n, config.cache_bytes),
            pair_updates: 0,
        }
    }

    /// Largest lower bound the sample places on the bias (`-inf` when it
    /// places none).
    #[inline]
    fn up_val(&self, i: usize) -> f64 {
        let g = self.y[i] - self.f_tilde[i];
        if self.beta[i] < 0.0 {
            g + self.epsilon
        } else if self.beta[i] < self.c {
            g - self.epsilon
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Smallest upper bound the sample places on the bias.
    #[inline]
    fn low_val(&self, i: usize) -> f64 {
        let g = self.y[i] - self.f_tilde[i];
        if self.beta[i] > 0.0 {
            g - self.epsilon
        } else if self.beta[i] > -self.c {
            g + self.epsilon
        } else {
            f64::INFINITY
        }
    }

    /// Maximal violating pair: the sample with the largest bias lower bound
    /// and the one with the smallest upper bound.
    fn select(&self) -> (f64, usize, f64, usize) {
        let n = self.beta.len();
        let (mut m, mut i) = (f64::NEG_INFINITY, 0);
        let (mut mm, mut j) = (f64::INFINITY, 0);
        for t in 0..n {
            let up = self.up_val(t);
            if up > m {
                m = up;
                i = t;
            }
            let low = self.low_val(t);
            if low < mm {
                mm = low;
                j = t;
            }
        }
        (m, i, mm, j)
    }

    /// Partner maximizing the guaranteed objective gain against the top
    /// violator `i`. The plain maximal-violating pair zigzags badly on
    /// rank-deficient Gram matrices (one-feature linear kernels), where it
    /// can fail to reach tolerance in any reasonable budget.
    fn select_partner(&self, i: usize, m: f64, row_i: &[f64]) -> (f64, usize) {
        let n = self.beta.len();
        let (mut best_gain, mut j) = (f64::NEG_INFINITY, usize::MAX);
        let (mut mm, mut j_fallback) = (f64::INFINITY, 0);
        for t in 0..n {
            let low = self.low_val(t);
            if low < mm {
                mm = low;
                j_fallback = t;
            }
            let delta = m - low;
            if t == i || delta <= 0.0 {
                continue;
            }
            let eta = (self.diag[i] + self.diag[t] - 2.0 * row_i[t]).max(1e-12);
            let gain = delta * delta / eta;
            if gain > best_gain {
                best_gain = gain;
                j = t;
            }
        }
        if j == usize::MAX {
            (mm, j_fallback)
        } else {
            (self.low_val(j), j)
        }
    }

    fn step(&mut self, tol: f64) -> Result<Step> {
        let (m, i, mm, _) = self.select();
        if m - mm <= tol {
            return Ok(Step::Converged((m - mm).max(0.0)));
        }
        let row_i = self.cache.row(self.data, i)?;
        let (low_j, j) = self.select_partner(i, m, &row_i);
        let violation = m - low_j;
        let row_j = self.cache.row(self.data, j)?;
        let eta = (self.diag[i] + self.diag[j] - 2.0 * row_i[j]).max(1e-12);

        // room before beta_i (increasing) or beta_j (decreasing) hits the
        // box or the kink at zero
        let room_i = if self.beta[i] < 0.0 { -self.beta[i] } else { self.c - self.beta[i] };
        let room_j = if self.beta[j] > 0.0 { self.beta[j] } else { self.c + self.beta[j] };
        let t = (violation / eta).min(room_i).min(room_j);

        if t >= room_i {
            self.beta[i] = if self.beta[i] < 0.0 { 0.0 } else { self.c };
        } else {
            self.beta[i] += t;
        }
        if t >= room_j {
            self.beta[j] = if self.beta[j] > 0.0 { 0.0 } else { -self.c };
        } else {
            self.beta[j] -= t;
        }
        let row_i = &*row_i;
        let row_j = &*row_j;
        for (r, f) in self.f_tilde.iter_mut().enumerate() {
            *f += t * (row_i[r] - row_j[r]);
        }
        self.pair_updates += 1;
        Ok(Step::Updated)
    }

    /// Iterate until the max violation drops to `tol` or the budget is
    /// spent. Returns the final violation, `Err(violation)` when out of
    /// budget.
    fn run(&mut self, tol: f64, budget: usize) -> Result<std::result::Result<f64, f64>> {
        loop {
            if self.pair_updates >= budget {
                let (m, _, mm, _) = self.select();
                return Ok(Err((m - mm).max(0.0)));
            }
            match self.step(tol)? {
                Step::Converged(v) => return Ok(Ok(v)),
                Step::Updated => {}
            }
        }
    }

    fn bias(&self) -> f64 {
        let n = self.beta.len();
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        for i in 0..n {
            let b = self.beta[i];
            if b != 0.0 && b.abs() < self.c {
                let g = self.y[i] - self.f_tilde[i];
                free_sum += g - self.epsilon * b.signum();
                free_count += 1;
            }
        }
        if free_count > 0 {
            return free_sum / free_count as f64;
        }
        // midpoint of the feasible bias interval implied by the KKT
        // inequalities
        let (m, _, mm, _) = self.select();
        0.5 * (m + mm)
    }

    fn extract(&self, config: &SvrConfig) -> SvrModel {
        let support_indices: Vec<usize> =
            (0..self.beta.len()).filter(|&i| self.beta[i] != 0.0).collect();
        SvrModel {
            beta: self.beta.clone(),
            bias: self.bias(),
            support_indices,
            config: *config,
            train_ref: self.data.features().to_owned(),
            target_scale: 1.0,
        }
    }

    fn dual_objective(&self) -> f64 {
        let mut quad = 0.0;
        let mut rest = 0.0;
        for i in 0..self.beta.len() {
            quad += self.beta[i] * self.f_tilde[i];
            rest += self.y[i] * self.beta[i] - self.epsilon * self.beta[i].abs();
        }
        -0.5 * quad + rest
    }
}

/// Dual objective of a trained model, recomputed from scratch.
pub fn dual_objective(model: &SvrModel, train: &Dataset) -> f64 {
    let n = train.n_samples();
    let mut value = 0.0;
    for i in 0..n {
        if model.beta[i] == 0.0 {
            continue;
        }
        let mut fi = 0.0;
        for j in 0..n {
            if model.beta[j] != 0.0 {
                fi += model.beta[j] * kernel_eval(&model.config.kernel, train.row(i), train.row(j));
            }
        }
        value += -0.5 * model.beta[i] * fi + model.beta[i] * train.targets()[i]
            - model.config.epsilon * model.beta[i].abs();
    }
    value
}

/// Primal objective `1/2 ||w||^2 + C sum |residual|_epsilon` of a trained
/// model on its training set.
pub fn primal_objective(model: &SvrModel, train: &Dataset) -> f64 {
    let n = train.n_samples();
    let mut norm = 0.0;
    let mut loss = 0.0;
    for i in 0..n {
        let mut fi = 0.0;
        for j in 0..n {
            if model.beta[j] != 0.0 {
                fi += model.beta[j] * kernel_eval(&model.config.kernel, train.row(i), train.row(j));
            }
        }
        norm += model.beta[i] * fi;
        loss += eps_loss(train.targets()[i] - fi - model.bias, model.config.epsilon);
    }
    0.5 * norm + model.config.c * loss
}

/// Largest violation of the epsilon-KKT conditions of a trained model on
/// the dataset it was fitted to: how far the bias sits outside the interval
/// each sample's condition allows.
pub fn max_kkt_violation(model: &SvrModel, train: &Dataset) -> f64 {
    let n = train.n_samples();
    let c = model.config.c;
    let eps = model.config.epsilon;
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut fi = 0.0;
        for j in 0..n {
            if model.beta[j] != 0.0 {
                fi += model.beta[j] * kernel_eval(&model.config.kernel, train.row(i), train.row(j));
            }
        }
        let g = train.targets()[i] - fi;
        let b = model.beta[i];
        let lower = if b < 0.0 {
            g + eps
        } else if b < c {
            g - eps
        } else {
            f64::NEG_INFINITY
        };
        let upper = if b > 0.0 {
            g - eps
        } else if b > -c {
            g + eps
        } else {
            f64::INFINITY
        };
        worst = worst.max(lower - model.bias).max(model.bias - upper);
    }
    worst.max(0.0)
}

fn relative_gap(primal: f64, dual: f64) -> f64 {
    (primal - dual) / (1.0 + primal.abs() + dual.abs())
}

/// Solve the epsilon-SVR dual to `tol_kkt` KKT accuracy and a relative
/// duality gap of at most [`GAP_TOL`], tightening the working tolerance as
/// needed. Exhausting the pair-update budget returns
/// [`Error::NonConvergence`] carrying the best iterate.
pub fn solve_svr(train: &Dataset, config: &SvrConfig) -> Result<SvrModel> {
    config.validate()?;
    let n = train.n_samples();
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, got: n });
    }
    let budget =
        if config.max_passes == MAX_PASSES_AUTO { auto_budget(n) } else { config.max_passes };
    let mut solver = Solver::new(train, config);
    let mut tol = config.tol_kkt;
    loop {
        match solver.run(tol, budget)? {
            Ok(_violation) => {
                let model = solver.extract(config);
                let primal = {
                    // cheap form using the solver's f_tilde
                    let mut norm = 0.0;
                    let mut loss = 0.0;
                    for i in 0..n {
                        norm += solver.beta[i] * solver.f_tilde[i];
                        loss += eps_loss(
                            solver.y[i] - solver.f_tilde[i] - model.bias,
                            config.epsilon,
                        );
                    }
                    0.5 * norm + config.c * loss
                };
                let dual = solver.dual_objective();
                if relative_gap(primal, dual) <= GAP_TOL || tol <= 1e-12 {
                    return Ok(model);
                }
                tol *= 0.25;
            }
            Err(violation) => {
                return Err(Error::NonConvergence {
                    pair_updates: solver.pair_updates,
                    max_violation: violation,
                    best: Box::new(solver.extract(config)),
                });
            }
        }
    }
}

/// A data-driven fit: the final model, the likelihood estimate that shaped
/// it, and the pilot residuals it was estimated from.
#[derive(Debug, Clone)]
pub struct DdFit {
    pub model: SvrModel,
    pub likelihood: WorkingLikelihoodFit,
    pub pilot_residuals: Vec<f64>,
}

/// Mean pilot residuals at or below this multiple of `tol_kkt` are solver
/// noise, not data noise: the pilot interpolates and rescaling targets by
/// such a scale would collapse the refit, so the pipeline falls back to the
/// neutral `(epsilon, s) = (0, 1)`.
const NOISELESS_GUARD: f64 = 10.0;

/// Regularization rule for the data-driven refit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefitC {
    /// The empirical quantile rule `C = |y|_(0.95)` evaluated on the
    /// `s_hat`-scaled training targets. On noise-standardized targets this
    /// self-calibrates the regularization to the signal-to-noise ratio.
    CmQuantile,
    /// Reuse the pilot's `C`.
    SameAsPilot,
    Fixed(f64),
}

/// The four-step data-driven pipeline with the default refit rule
/// ([`RefitC::CmQuantile`]).
pub fn fit_dd(train: &Dataset, kernel: KernelSpec, c: f64) -> Result<DdFit> {
    fit_dd_with(train, kernel, c, RefitC::CmQuantile)
}

/// The four-step data-driven pipeline.
///
/// 1. Pilot fit with `epsilon = 0` and the given `C`; collect training
///    residuals.
/// 2. Estimate `(epsilon_hat, s_hat)` from the residuals by working
///    likelihood.
/// 3. Divide targets by `s_hat` and retrain with `epsilon = epsilon_hat`
///    and the `refit_c` rule; the model's `target_scale` undoes the
///    division at prediction.
/// 4. Predict via [`SvrModel::predict`] (the caller's step).
pub fn fit_dd_with(
    train: &Dataset,
    kernel: KernelSpec,
    c: f64,
    refit_c: RefitC,
) -> Result<DdFit> {
    let n = train.n_samples();
    if n < 10 {
        return Err(Error::InsufficientSample { min: 10, got: n });
    }
    let pilot_config = SvrConfig::new(kernel).with_c(c).with_epsilon(0.0);
    let pilot = solve_svr(train, &pilot_config)?;
    let predictions = pilot.predict_batch(train.features())?;
    let residuals: Vec<f64> = train
        .targets()
        .iter()
        .zip(predictions.iter())
        .map(|(y, p)| y - p)
        .collect();

    let mean_abs = residuals.iter().map(|u| u.abs()).sum::<f64>() / n as f64;
    let lik = if mean_abs <= NOISELESS_GUARD * pilot_config.tol_kkt {
        let s = 1.0;
        WorkingLikelihoodFit {
            epsilon_hat: 0.0,
            s_hat: s,
            neg_log_lik: likelihood::neg_log_lik(&residuals, 0.0, s),
            iterations: 0,
            converged: true,
            fixed_point_residual: (s - mean_abs).abs(),
        }
    } else {
        likelihood::estimate(&residuals)?
    };

    let scaled_targets = Array1::from_iter(train.targets().iter().map(|y| y / lik.s_hat));
    let scaled = train.with_targets(scaled_targets)?;
    let refit_c = match refit_c {
        RefitC::CmQuantile => crate::evaluation::c_cm(&scaled.targets().to_vec())?,
        RefitC::SameAsPilot => c,
        RefitC::Fixed(value) => value,
    };
    let refit_config = SvrConfig::new(kernel).with_c(refit_c).with_epsilon(lik.epsilon_hat);
    let mut model = solve_svr(&scaled, &refit_config)?;
    model.target_scale = lik.s_hat;
    Ok(DdFit { model, likelihood: lik, pilot_residuals: residuals })
}
