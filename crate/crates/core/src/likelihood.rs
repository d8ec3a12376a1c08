//! The working-likelihood machinery for the insensitive parameter.
//!
//! Residuals are modeled with the epsilon-insensitive Laplacian density
//! `g(u; e) = exp(-|u|_e) / (2 (1 + e))`, flat on `[-e, e]` with exponential
//! tails. Fitting its two parameters — the tube half-width `epsilon` and the
//! noise scale `s` — by minimizing the negative log-likelihood of observed
//! residuals yields a data-driven tube for support-vector regression, even
//! when the true noise law differs.
//!
//! At an interior optimum the estimates satisfy the coupled fixed-point
//! system
//!
//! ```text
//! epsilon = #{|U_i / s| <= epsilon} / #{|U_i / s| > epsilon}
//! s       = (1/n) * sum |U_i| * 1{|U_i / s| > epsilon}
//! ```
//!
//! i.e. `epsilon` is the odds of a residual being inside the tube, and `s`
//! is the average insensitive distance, with inside residuals counted as
//! zero.

use crate::error::{Error, Result};
use crate::integrate::adaptive_simpson;
use crate::rng::RngStream;

/// Upper bound of the epsilon search. On bounded noise the working
/// likelihood pushes epsilon toward infinity (the tube grows to swallow the
/// whole sample), so a cap is part of the estimator's definition, not just
/// a numerical guard; 10 keeps the capped tube slightly inside the noise
/// support instead of past it.
pub const EPSILON_MAX: f64 = 10.0;

/// Lower bound of the scale search.
pub const S_FLOOR: f64 = 1e-8;

/// Result of estimating `(epsilon, s)` from residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingLikelihoodFit {
    pub epsilon_hat: f64,
    pub s_hat: f64,
    /// Negative log-likelihood at the optimum.
    pub neg_log_lik: f64,
    /// Fixed-point iterations performed before the stationary-point scan.
    pub iterations: usize,
    /// True when the fixed-point system holds to 1e-6, or the optimum sits
    /// on the `epsilon = 0` boundary with one-sided stationarity. An optimum
    /// pinned at [`EPSILON_MAX`] reports `false`.
    pub converged: bool,
    /// Max absolute violation of the fixed-point system at the optimum.
    pub fixed_point_residual: f64,
}

/// Solution of the large-sample limit of the fixed-point system for a known
/// noise density.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingParams {
    pub epsilon_star: f64,
    pub s_star: f64,
    /// Largest quadrature error estimate encountered while solving.
    pub integration_error: f64,
}

/// Epsilon-insensitive loss: zero inside `[-epsilon, epsilon]`, linear
/// outside.
#[inline]
pub fn eps_loss(u: f64, epsilon: f64) -> f64 {
    debug_assert!(epsilon >= 0.0);
    (u.abs() - epsilon).max(0.0)
}

/// Density `exp(-|u|_epsilon) / (2 (1 + epsilon))`; integrates to one for
/// every `epsilon >= 0`.
#[inline]
pub fn eps_laplacian_pdf(u: f64, epsilon: f64) -> f64 {
    debug_assert!(epsilon >= 0.0);
    (-eps_loss(u, epsilon)).exp() / (2.0 * (1.0 + epsilon))
}

/// Negative log-likelihood of residuals under the epsilon-Laplacian model:
/// `n ln s + n ln(2 (1 + epsilon)) + sum |U_i / s|_epsilon`.
///
/// Panics if `s <= 0` or `epsilon < 0`.
pub fn neg_log_lik(residuals: &[f64], epsilon: f64, s: f64) -> f64 {
    assert!(s > 0.0, "scale must be positive, got {s}");
    assert!(epsilon >= 0.0, "epsilon must be non-negative, got {epsilon}");
    let n = residuals.len() as f64;
    let loss: f64 = residuals.iter().map(|u| eps_loss(u / s, epsilon)).sum();
    n * s.ln() + n * (2.0 * (1.0 + epsilon)).ln() + loss
}

/// Sorted |residuals| (descending) with prefix sums; the shared scaffolding
/// for the estimator.
struct AbsResiduals {
    /// |U| sorted descending.
    abs: Vec<f64>,
    /// prefix[m] = sum of the m largest |U|; prefix[0] = 0.
    prefix: Vec<f64>,
}

impl AbsResiduals {
    fn new(residuals: &[f64]) -> Self {
        let mut abs: Vec<f64> = residuals.iter().map(|u| u.abs()).collect();
        abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut prefix = Vec::with_capacity(abs.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &abs {
            acc += v;
            prefix.push(acc);
        }
        AbsResiduals { abs, prefix }
    }

    fn n(&self) -> usize {
        self.abs.len()
    }

    /// Number of residuals strictly outside the tube `|U| > threshold`.
    /// Residuals exactly on the boundary count as inside.
    fn count_outside(&self, threshold: f64) -> usize {
        self.abs.partition_point(|v| *v > threshold)
    }

    /// Number of residuals outside or on the tube boundary.
    fn count_outside_or_on(&self, threshold: f64) -> usize {
        self.abs.partition_point(|v| *v >= threshold)
    }

    /// Exact negative log-likelihood at `(epsilon, s)`.
    fn nll(&self, epsilon: f64, s: f64) -> f64 {
        let n = self.n() as f64;
        let m = self.count_outside(s * epsilon);
        n * s.ln() + n * (2.0 * (1.0 + epsilon)).ln() + self.prefix[m] / s
            - m as f64 * epsilon
    }

    /// Max violation of the fixed-point system at `(epsilon, s)`.
    ///
    /// When residuals sit exactly on the tube boundary the stationarity
    /// conditions become interval-valued (the two sides of the kink), so
    /// each violation is the distance to the interval spanned by the strict
    /// and non-strict outside counts; without boundary ties both intervals
    /// collapse to the plain fixed-point equations.
    fn fixed_point_residual(&self, epsilon: f64, s: f64) -> f64 {
        let n = self.n();
        let t = s * epsilon;
        let m_strict = self.count_outside(t);
        let m_loose = if epsilon == 0.0 {
            // the tube is a point; every nonzero residual is outside on
            // both sides of epsilon = 0
            m_strict
        } else {
            self.count_outside_or_on(t)
        };
        let eps_of = |m: usize| {
            if m == 0 {
                f64::INFINITY
            } else {
                (n - m) as f64 / m as f64
            }
        };
        // larger m means smaller epsilon
        let (eps_lo, eps_hi) = (eps_of(m_loose), eps_of(m_strict));
        let r_eps = if epsilon < eps_lo {
            eps_lo - epsilon
        } else if epsilon > eps_hi {
            epsilon - eps_hi
        } else {
            0.0
        };
        let (s_lo, s_hi) = (self.prefix[m_strict] / n as f64, self.prefix[m_loose] / n as f64);
        let r_s = if s < s_lo {
            s_lo - s
        } else if s > s_hi {
            s - s_hi
        } else {
            0.0
        };
        r_eps.max(r_s)
    }
}

/// Estimate `(epsilon, s)` by minimizing the working negative
/// log-likelihood.
///
/// Two phases, keeping whichever ends lower:
///
/// 1. Alternate the fixed-point updates from `(epsilon, s) = (0, mean |U|)`
///    with damping 0.5 on the scale update, at most 500 iterations.
/// 2. Enumerate every stationary candidate exactly. An optimum's outside
///    set is always the `m` largest |U|, so each `m` yields the candidate
///    `epsilon = (n - m) / m`, `s = prefix[m] / n`; boundary candidates at
///    `epsilon = 0` and at [`EPSILON_MAX`] (with `s` from its own
///    fixed-point equation) complete the pool.
///
/// Errors: all-zero residuals ([`Error::DegenerateResiduals`]); fewer than
/// 10 residuals ([`Error::InsufficientSample`]).
pub fn estimate(residuals: &[f64]) -> Result<WorkingLikelihoodFit> {
    let n = residuals.len();
    if n < 10 {
        return Err(Error::InsufficientSample { min: 10, got: n });
    }
    if residuals.iter().all(|u| *u == 0.0) {
        return Err(Error::DegenerateResiduals);
    }
    let work = AbsResiduals::new(residuals);
    let mean_abs = work.prefix[n] / n as f64;

    // phase 1: damped fixed-point iteration
    let mut eps = 0.0;
    let mut s = mean_abs.max(S_FLOOR);
    let mut iterations = 0;
    for _ in 0..500 {
        iterations += 1;
        let m = work.count_outside(s * eps);
        let eps_next = if m == 0 {
            EPSILON_MAX
        } else {
            (((n - m) as f64) / m as f64).min(EPSILON_MAX)
        };
        let s_next = (0.5 * s + 0.5 * work.prefix[m] / n as f64).max(S_FLOOR);
        let done = (eps_next - eps).abs() <= 1e-12 * (1.0 + eps) && (s_next - s).abs() <= 1e-12 * s;
        eps = eps_next;
        s = s_next;
        if done {
            break;
        }
    }
    let mut best_eps = eps;
    let mut best_s = s;
    let mut best_nll = work.nll(eps, s);
    let consider = |eps_c: f64, s_c: f64, nll: f64, best: &mut (f64, f64, f64)| {
        if nll < best.2 {
            *best = (eps_c, s_c, nll);
        }
    };
    let mut best_tuple = (best_eps, best_s, best_nll);

    // phase 2: exact candidate scan. The likelihood is smooth between the
    // creases where the tube boundary s * epsilon crosses an |U| order
    // statistic, so the minimum is a stationary point of a piece, a
    // stationary point along a crease, or sits on the epsilon = 0 or
    // epsilon = EPSILON_MAX boundary. All of those are enumerable; every
    // candidate is scored with the exact likelihood.
    for m in 1..=n {
        // two-sided stationary point of the piece whose outside set is the
        // m largest |U| (m = n doubles as the epsilon = 0 boundary)
        let eps_m = (n - m) as f64 / m as f64;
        let s_m = (work.prefix[m] / n as f64).max(S_FLOOR);
        if eps_m <= EPSILON_MAX {
            consider(eps_m, s_m, work.nll(eps_m, s_m), &mut best_tuple);
        }
        // scale-stationary point on the epsilon cap
        consider(EPSILON_MAX, s_m, work.nll(EPSILON_MAX, s_m), &mut best_tuple);

        // creases: tube boundary pinned at the m-th largest |U|
        let t = work.abs[m - 1];
        if t > 0.0 {
            // crossing point on the cap
            let s_c = (t / EPSILON_MAX).max(S_FLOOR);
            consider(EPSILON_MAX, s_c, work.nll(EPSILON_MAX, s_c), &mut best_tuple);
            // stationary point along the crease s * epsilon = t: with q the
            // piece's outside contribution T - t P, the scale solves
            // s^2 = q (s + t)
            let m_strict = work.count_outside(t);
            let q = work.prefix[m_strict] / n as f64 - t * m_strict as f64 / n as f64;
            if q > 0.0 {
                let s_c = 0.5 * (q + (q * q + 4.0 * q * t).sqrt());
                let eps_c = t / s_c;
                if (0.0..=EPSILON_MAX).contains(&eps_c) && s_c >= S_FLOOR {
                    consider(eps_c, s_c, work.nll(eps_c, s_c), &mut best_tuple);
                }
            }
        }
    }
    (best_eps, best_s, best_nll) = best_tuple;

    let fixed_point_residual = work.fixed_point_residual(best_eps, best_s);
    // epsilon = 0 is always one-sided stationary: the right derivative
    // there is the number of exactly-zero residuals, which is >= 0
    let converged = (fixed_point_residual <= 1e-6 && best_eps < EPSILON_MAX) || best_eps == 0.0;
    Ok(WorkingLikelihoodFit {
        epsilon_hat: best_eps,
        s_hat: best_s,
        neg_log_lik: best_nll,
        iterations,
        converged,
        fixed_point_residual,
    })
}

/// Evaluate the likelihood surface on a grid; rows are emitted in
/// `eps`-major order. This is the data behind likelihood-curve plots.
pub fn curve(residuals: &[f64], eps_grid: &[f64], s_grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut rows = Vec::with_capacity(eps_grid.len() * s_grid.len());
    for &eps in eps_grid {
        for &s in s_grid {
            rows.push((eps, s, neg_log_lik(residuals, eps, s)));
        }
    }
    rows
}

/// Draw `n` i.i.d. samples from the epsilon-Laplacian density by inverse
/// CDF: with probability `epsilon / (1 + epsilon)` a uniform draw on
/// `[-epsilon, epsilon]`, otherwise `epsilon` plus a unit exponential
/// excess, signed by a fair coin.
///
/// Draw counts per sample are fixed by branch: one uniform for the branch
/// choice, then one uniform (inside) or one exponential plus one uniform
/// for the sign (outside).
pub fn sample_eps_laplacian(rng: &mut RngStream, epsilon: f64, n: usize) -> Vec<f64> {
    assert!(epsilon >= 0.0);
    let inside_mass = epsilon / (1.0 + epsilon);
    (0..n)
        .map(|_| {
            if rng.next_f64() < inside_mass {
                rng.uniform(-epsilon, epsilon)
            } else {
                let excess = rng.exponential();
                let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
                sign * (epsilon + excess)
            }
        })
        .collect()
}

/// Solve the large-sample limit of the fixed-point system for a known noise
/// density `g` supported (numerically) on `[-support_bound, support_bound]`:
///
/// ```text
/// 1 / (1 + e*) = Pr(|U| > e* s*)
/// s*           = E[ |U| * 1{|U| > e* s*} ]
/// ```
///
/// The two equations reduce to one root-find in the threshold
/// `t = e* s*`; every sign change of the reduced equation is refined by
/// bisection, the `e* = 0` and `e* = EPSILON_MAX` boundary candidates are
/// added, and the candidate with the lowest asymptotic mean negative
/// log-likelihood wins.
pub fn limiting_params<F: Fn(f64) -> f64>(
    noise_pdf: F,
    support_bound: f64,
) -> Result<LimitingParams> {
    assert!(support_bound > 0.0);
    const QTOL: f64 = 1e-11;
    let b = support_bound;

    let mass = adaptive_simpson(&noise_pdf, -b, b, QTOL);
    if (mass.value - 1.0).abs() > 1e-8 {
        return Err(Error::BadDensity(mass.value));
    }
    let err_cell = std::cell::Cell::new(mass.error);

    // outside mass and outside absolute first moment at threshold t
    let p_out = |t: f64| -> f64 {
        if t >= b {
            return 0.0;
        }
        let right = adaptive_simpson(&noise_pdf, t, b, QTOL);
        let left = adaptive_simpson(&noise_pdf, -b, -t, QTOL);
        err_cell.set(err_cell.get().max(right.error).max(left.error));
        right.value + left.value
    };
    let tail_abs_mean = |t: f64| -> f64 {
        if t >= b {
            return 0.0;
        }
        let right = adaptive_simpson(|u| u * noise_pdf(u), t, b, QTOL);
        let left = adaptive_simpson(|u| -u * noise_pdf(u), -b, -t, QTOL);
        err_cell.set(err_cell.get().max(right.error).max(left.error));
        right.value + left.value
    };

    // asymptotic mean negative log-likelihood at (eps, s)
    let mean_nll = |eps: f64, s: f64| -> f64 {
        let t = eps * s;
        s.ln() + (2.0 * (1.0 + eps)).ln() + (tail_abs_mean(t) - t * p_out(t)) / s
    };

    // threshold where epsilon(t) hits the cap: P(t) = 1 / (1 + cap)
    let cap_mass = 1.0 / (1.0 + EPSILON_MAX);
    let t_hi = {
        let (mut lo, mut hi) = (0.0, b);
        if p_out(0.0) <= cap_mass {
            0.0
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p_out(mid) > cap_mass {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };

    // candidates: epsilon = 0 boundary
    let s0 = tail_abs_mean(0.0).max(S_FLOOR);
    let mut best = (0.0, s0, mean_nll(0.0, s0));

    // interior roots of F(t) = (1/P(t) - 1) * T(t) - t over (0, t_hi)
    if t_hi > 0.0 {
        let reduced = |t: f64| -> f64 {
            let p = p_out(t);
            (1.0 / p - 1.0) * tail_abs_mean(t) - t
        };
        let grid = 256;
        let mut prev_t = t_hi / grid as f64;
        let mut prev_f = reduced(prev_t);
        for k in 2..=grid {
            let t = t_hi * k as f64 / grid as f64;
            let f = reduced(t);
            if prev_f == 0.0 || prev_f.signum() != f.signum() {
                let (mut lo, mut hi, mut flo) = (prev_t, t, prev_f);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let fmid = reduced(mid);
                    if fmid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if flo.signum() == fmid.signum() {
                        lo = mid;
                        flo = fmid;
                    } else {
                        hi = mid;
                    }
                }
                let t_root = 0.5 * (lo + hi);
                let p = p_out(t_root);
                if p > 0.0 {
                    let eps_star = (1.0 / p - 1.0).clamp(0.0, EPSILON_MAX);
                    let s_star = tail_abs_mean(t_root).max(S_FLOOR);
                    let nll = mean_nll(eps_star, s_star);
                    if nll < best.2 {
                        best = (eps_star, s_star, nll);
                    }
                }
            }
            prev_t = t;
            prev_f = f;
        }
    }

    // cap boundary: epsilon fixed at EPSILON_MAX, s from s = T(cap * s)
    {
        let h = |s: f64| tail_abs_mean(EPSILON_MAX * s) - s;
        let (mut lo, mut hi) = (S_FLOOR, s0.max(2.0 * S_FLOOR));
        let (flo, fhi) = (h(lo), h(hi));
        if flo > 0.0 && fhi < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s_cap = 0.5 * (lo + hi);
            let nll = mean_nll(EPSILON_MAX, s_cap);
            if nll < best.2 {
                best = (EPSILON_MAX, s_cap, nll);
            }
        } else if flo <= 0.0 {
            // scale equation has no mass to work with; only possible for a
            // density degenerate at zero, which BadDensity screening and the
            // epsilon = 0 candidate already cover
            return Err(Error::NoRoot { lo, hi, flo, fhi });
        }
    }

    Ok(LimitingParams {
        epsilon_star: best.0,
        s_star: best.1,
        integration_error: err_cell.get(),
    })
}
