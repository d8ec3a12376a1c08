//! Shared test oracles: a dense brute-force solver for the epsilon-SVR
//! dual, independent of the SMO implementation path.

use ddsvr::data::Dataset;
use ddsvr::kernel::{gram_row, KernelSpec};

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is numerically singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Dual objective `-1/2 b' K b - eps sum |b| + y' b`.
pub fn dual_value(k: &[Vec<f64>], y: &[f64], beta: &[f64], eps: f64) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    let mut rest = 0.0;
    for i in 0..n {
        let mut ki = 0.0;
        for j in 0..n {
            ki += k[i][j] * beta[j];
        }
        quad += beta[i] * ki;
        rest += y[i] * beta[i] - eps * beta[i].abs();
    }
    -0.5 * quad + rest
}

/// Brute-force global maximizer of the epsilon-SVR dual for n <= 6:
/// enumerate every per-coordinate activity pattern (at -C, at 0, at +C,
/// free positive, free negative), solve the equality-constrained
/// stationarity system of each pattern's free block, keep feasible
/// candidates, and return the best by dual objective.
pub fn brute_force_qp(data: &Dataset, kernel: &KernelSpec, c: f64, eps: f64) -> Vec<f64> {
    let n = data.n_samples();
    assert!(n <= 6, "oracle is exponential in n");
    let k: Vec<Vec<f64>> = (0..n).map(|i| gram_row(kernel, data, i).unwrap()).collect();
    let y: Vec<f64> = data.targets().to_vec();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 5usize.pow(n as u32);
    for pattern in 0..patterns {
        let mut state = Vec::with_capacity(n);
        let mut code = pattern;
        for _ in 0..n {
            state.push(code % 5);
            code /= 5;
        }
        // states: 0 fixed zero, 1 fixed +C, 2 fixed -C, 3 free (0, C),
        // 4 free (-C, 0)
        let mut beta = vec![0.0; n];
        let mut free = Vec::new();
        let mut signs = Vec::new();
        for i in 0..n {
            match state[i] {
                0 => beta[i] = 0.0,
                1 => beta[i] = c,
                2 => beta[i] = -c,
                3 => {
                    free.push(i);
                    signs.push(1.0);
                }
                4 => {
                    free.push(i);
                    signs.push(-1.0);
                }
                _ => unreachable!(),
            }
        }
        let fixed_sum: f64 = beta.iter().sum();
        if free.is_empty() {
            if fixed_sum.abs() <= 1e-9 {
                let value = dual_value(&k, &y, &beta, eps);
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, beta));
                }
            }
            continue;
        }
        // stationarity of the free block plus the equality constraint:
        // K_FF beta_F + lambda 1 = y_F - eps * sign_F - K_FB beta_B
        let f = free.len();
        let mut a = vec![vec![0.0; f + 1]; f + 1];
        let mut rhs = vec![0.0; f + 1];
        for (r, &i) in free.iter().enumerate() {
            for (col, &j) in free.iter().enumerate() {
                a[r][col] = k[i][j];
            }
            a[r][f] = 1.0;
            let mut fixed_term = 0.0;
            for j in 0..n {
                if !free.contains(&j) {
                    fixed_term += k[i][j] * beta[j];
                }
            }
            rhs[r] = y[i] - eps * signs[r] - fixed_term;
        }
        for col in 0..f {
            a[f][col] = 1.0;
        }
        rhs[f] = -fixed_sum;
        let Some(solution) = solve_dense(&a, &rhs) else { continue };
        let mut feasible = true;
        for (r, &i) in free.iter().enumerate() {
            beta[i] = solution[r];
            let signed = signs[r] * beta[i];
            if !(signed >= -1e-10 && signed <= c + 1e-10) {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let value = dual_value(&k, &y, &beta, eps);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, beta));
        }
    }
    best.expect("the all-zero pattern is always feasible").1
}
