//! Kernel functions, Gram-row evaluation, and the solver's row cache.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::ArrayView1;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Kernel family. The linear kernel is the plain dot product; the RBF kernel
/// is `exp(-gamma * ||a - b||^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Linear,
    Rbf,
}

/// Kernel choice plus the RBF width. `gamma` is ignored for `Linear`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec { family: KernelFamily::Linear, gamma: 1.0 }
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("rbf gamma must be positive, got {gamma}")));
        }
        Ok(KernelSpec { family: KernelFamily::Rbf, gamma })
    }

    /// RBF with the conventional default width `gamma = 1 / d`.
    pub fn rbf_default(n_features: usize) -> Self {
        KernelSpec { family: KernelFamily::Rbf, gamma: 1.0 / n_features.max(1) as f64 }
    }
}

/// Evaluate the kernel on two feature vectors. Symmetric in `(a, b)`.
///
/// Panics if the vectors differ in length; callers validate external input
/// once at the API boundary.
pub fn kernel_eval(spec: &KernelSpec, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "kernel_eval: dimension mismatch");
    match spec.family {
        KernelFamily::Linear => a.dot(&b),
        KernelFamily::Rbf => {
            let mut sq = 0.0;
            for (x, y) in a.iter().zip(b.iter()) {
                let d = x - y;
                sq += d * d;
            }
            (-spec.gamma * sq).exp()
        }
    }
}

/// Row `i` of the Gram matrix: entry `j` equals `k(x_i, x_j)`.
pub fn gram_row(spec: &KernelSpec, data: &Dataset, i: usize) -> Result<Vec<f64>> {
    let n = data.n_samples();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let xi = data.row(i);
    Ok((0..n).map(|j| kernel_eval(spec, xi, data.row(j))).collect())
}

/// Least-recently-used cache of Gram rows, bounded by a byte budget
/// (default 64 MiB). One cache is owned by one solver instance; `gram_row`
/// itself is pure and safe to call concurrently.
pub struct RowCache {
    spec: KernelSpec,
    rows: HashMap<usize, (Arc<Vec<f64>>, u64)>,
    max_rows: usize,
    tick: u64,
    pub hits: u64,
    pub misses: u64,
}

pub const DEFAULT_CACHE_BYTES: usize = 64 * 1024 * 1024;

impl RowCache {
    pub fn new(spec: KernelSpec, n: usize, budget_bytes: usize) -> Self {
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        // always keep room for the two working rows of an SMO step
        let max_rows = (budget_bytes / row_bytes).max(2);
        RowCache { spec, rows: HashMap::new(), max_rows, tick: 0, hits: 0, misses: 0 }
    }

    /// Fetch row `i`, computing and caching it on a miss.
    pub fn row(&mut self, data: &Dataset, i: usize) -> Result<Arc<Vec<f64>>> {
        self.tick += 1;
        if let Some((row, stamp)) = self.rows.get_mut(&i) {
            *stamp = self.tick;
            self.hits += 1;
            return Ok(Arc::clone(row));
        }
        self.misses += 1;
        let row = Arc::new(gram_row(&self.spec, data, i)?);
        if self.rows.len() >= self.max_rows {
            if let Some((&oldest, _)) = self.rows.iter().min_by_key(|(_, (_, stamp))| *stamp) {
                self.rows.remove(&oldest);
            }
        }
        self.rows.insert(i, (Arc::clone(&row), self.tick));
        Ok(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};

    use crate::rng::RngStream;

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let n = rows.len();
        let d = rows[0].len();
        let mut features = Array2::zeros((n, d));
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                features[(i, j)] = *v;
            }
        }
        Dataset::new(features, Array1::zeros(n)).unwrap()
    }

    #[test]
    fn linear_dot_product() {
        let spec = KernelSpec::linear();
        let a = array![1.0, 2.0];
        assert_abs_diff_eq!(kernel_eval(&spec, a.view(), a.view()), 5.0);
    }

    #[test]
    fn rbf_zero_distance_is_one() {
        let spec = KernelSpec::rbf(3.7).unwrap();
        let a = array![0.2, -1.4, 9.0];
        assert_abs_diff_eq!(kernel_eval(&spec, a.view(), a.view()), 1.0);
    }

    #[test]
    fn rbf_direct_formula() {
        let spec = KernelSpec::rbf(0.5).unwrap();
        let a = array![0.0, 0.0];
        let b = array![1.0, 1.0];
        assert_abs_diff_eq!(kernel_eval(&spec, a.view(), b.view()), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn gram_row_identity_like() {
        let data = dataset(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let row = gram_row(&KernelSpec::linear(), &data, 0).unwrap();
        assert_eq!(row, vec![1.0, 0.0]);
    }

    #[test]
    fn gram_row_rbf_diagonal_is_one() {
        let mut rng = RngStream::new(4, 0);
        let data = dataset((0..6).map(|_| vec![rng.normal(), rng.normal()]).collect());
        let spec = KernelSpec::rbf(0.8).unwrap();
        for i in 0..6 {
            let row = gram_row(&spec, &data, i).unwrap();
            assert_abs_diff_eq!(row[i], 1.0);
        }
    }

    #[test]
    fn gram_row_matches_elementwise_eval() {
        let mut rng = RngStream::new(77, 0);
        let data = dataset((0..5).map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect());
        let spec = KernelSpec::rbf(0.35).unwrap();
        for i in 0..5 {
            let row = gram_row(&spec, &data, i).unwrap();
            for j in 0..5 {
                assert_eq!(row[j], kernel_eval(&spec, data.row(i), data.row(j)));
            }
        }
    }

    #[test]
    fn gram_row_index_out_of_range() {
        let data = dataset(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            gram_row(&KernelSpec::linear(), &data, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn symmetry_over_random_pairs() {
        let mut rng = RngStream::new(2024, 0);
        for spec in [KernelSpec::linear(), KernelSpec::rbf(1.3).unwrap()] {
            for _ in 0..1000 {
                let a = array![rng.normal(), rng.normal(), rng.normal()];
                let b = array![rng.normal(), rng.normal(), rng.normal()];
                let kab = kernel_eval(&spec, a.view(), b.view());
                let kba = kernel_eval(&spec, b.view(), a.view());
                assert!((kab - kba).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gram_matrix_is_psd_on_small_random_data() {
        let mut rng = RngStream::new(31, 0);
        for trial in 0..20 {
            let n = 3 + (trial % 6);
            let data = dataset(
                (0..n).map(|_| (0..2).map(|_| rng.uniform(-3.0, 3.0)).collect()).collect(),
            );
            let spec = if trial % 2 == 0 {
                KernelSpec::rbf(0.7).unwrap()
            } else {
                KernelSpec::linear()
            };
            let mut gram = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                let row = gram_row(&spec, &data, i).unwrap();
                for j in 0..n {
                    gram[(i, j)] = row[j];
                }
            }
            let eig = gram.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "min eigenvalue {min}");
        }
    }

    #[test]
    fn cache_returns_correct_rows_under_eviction() {
        let mut rng = RngStream::new(8, 0);
        let data = dataset((0..10).map(|_| vec![rng.normal(), rng.normal()]).collect());
        let spec = KernelSpec::rbf(0.5).unwrap();
        // budget of 3 rows forces evictions
        let mut cache = RowCache::new(spec, 10, 3 * 10 * 8);
        for pass in 0..3 {
            for i in 0..10 {
                let cached = cache.row(&data, i).unwrap();
                let fresh = gram_row(&spec, &data, i).unwrap();
                assert_eq!(*cached, fresh, "pass {pass}, row {i}");
            }
        }
        assert!(cache.misses > 10, "eviction should force recomputation");
    }
}
