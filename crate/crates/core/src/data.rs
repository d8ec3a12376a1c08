//! Dataset container, feature standardization, train/test splitting, and CSV
//! ingestion.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-column statistics recorded when a training set is standardized.
///
/// Standard deviation uses the sample convention (divisor `n - 1`). A
/// constant column gets `std = 1` so it maps to zeros instead of dividing
/// by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    fn from_features(features: &ArrayView2<f64>) -> Self {
        let n = features.nrows() as f64;
        let mut means = Vec::with_capacity(features.ncols());
        let mut stds = Vec::with_capacity(features.ncols());
        for col in features.columns() {
            let mean = col.sum() / n;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            let std = (ss / (n - 1.0)).sqrt();
            means.push(mean);
            stds.push(if std == 0.0 { 1.0 } else { std });
        }
        Standardization { means, stds }
    }
}

/// Feature matrix and target vector, with the standardization that produced
/// the features (if any) so test rows can be transformed with training
/// statistics.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array1<f64>,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Build a dataset, rejecting non-finite entries and degenerate shapes.
    pub fn new(features: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if features.nrows() < 2 {
            return Err(Error::TooFewRows { min: 2, got: features.nrows() });
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidParameter("need at least one feature column".into()));
        }
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: targets.len(),
            });
        }
        for (i, row) in features.rows().into_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i + 1, column: format!("feature {j}") });
                }
            }
            if !targets[i].is_finite() {
                return Err(Error::NonFinite { row: i + 1, column: "target".into() });
            }
        }
        Ok(Dataset { features, targets, standardization: None })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> ArrayView1<'_, f64> {
        self.targets.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Replace the targets, keeping features and standardization.
    pub fn with_targets(&self, targets: Array1<f64>) -> Result<Self> {
        if targets.len() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: self.n_samples(),
                got: targets.len(),
            });
        }
        Ok(Dataset { features: self.features.clone(), targets, standardization: self.standardization.clone() })
    }

    /// Center and scale each feature column, recording the statistics.
    ///
    /// Targets are left untouched; target scaling belongs to the data-driven
    /// training pipeline.
    pub fn standardize_features(&self) -> Dataset {
        let stats = Standardization::from_features(&self.features.view());
        self.apply_standardization(&stats)
            .expect("column count matches by construction")
    }

    /// Transform rows with previously recorded (training) statistics.
    pub fn apply_standardization(&self, stats: &Standardization) -> Result<Dataset> {
        if stats.means.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: stats.means.len(),
            });
        }
        let mut features = self.features.clone();
        for (j, mut col) in features.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - stats.means[j]) / stats.stds[j]);
        }
        Ok(Dataset {
            features,
            targets: self.targets.clone(),
            standardization: Some(stats.clone()),
        })
    }

    /// Undo the recorded standardization, recovering raw features.
    pub fn invert_standardization(&self) -> Result<Dataset> {
        let stats = self
            .standardization
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("dataset is not standardized".into()))?;
        let mut features = self.features.clone();
        for (j, mut col) in features.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * stats.stds[j] + stats.means[j]);
        }
        Ok(Dataset { features, targets: self.targets.clone(), standardization: None })
    }

    fn take_rows(&self, indices: &[usize], standardization: Option<Standardization>) -> Dataset {
        let d = self.n_features();
        let mut features = Array2::zeros((indices.len(), d));
        let mut targets = Array1::zeros(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            features.row_mut(k).assign(&self.features.row(i));
            targets[k] = self.targets[i];
        }
        Dataset { features, targets, standardization }
    }
}

/// Train/test split protocol: fraction of rows assigned to the training set
/// and the seed that fixes the shuffle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Split into disjoint train/test sets covering all rows.
///
/// Row indices are shuffled with `RngStream::new(seed, 0)`, the first
/// `round(n * train_fraction)` go to the training set, and both index sets
/// are then sorted so row order is reproducible. The same seed yields the
/// identical partition on every run and platform.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::BadTrainFraction(spec.train_fraction));
    }
    let n = data.n_samples();
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    let n_test = n - n_train;
    if n_train < 2 || n_test < 1 {
        return Err(Error::DegenerateSplit { train: n_train, test: n_test });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(spec.seed, 0);
    rng.shuffle(&mut indices);
    let mut train_idx = indices[..n_train].to_vec();
    let mut test_idx = indices[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.take_rows(&train_idx, None), data.take_rows(&test_idx, None)))
}

/// Same split, returning the sorted index sets instead of materialized rows.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::BadTrainFraction(spec.train_fraction));
    }
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    let n_test = n - n_train;
    if n_train < 2 || n_test < 1 {
        return Err(Error::DegenerateSplit { train: n_train, test: n_test });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(spec.seed, 0);
    rng.shuffle(&mut indices);
    let mut train_idx = indices[..n_train].to_vec();
    let mut test_idx = indices[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((train_idx, test_idx))
}

/// Read a dataset from CSV: header row required, all columns numeric,
/// comma-delimited, decimal point. The last column is the target unless
/// `target` names another column. Rows with missing fields are rejected
/// with their row number.
pub fn read_csv(path: &Path, target: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::Csv("empty file".into()));
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Csv(
            "first row parses entirely as numbers; a header row is required".into(),
        ));
    }
    let target_col = match target {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("target column '{name}' not found in header")))?,
        None => headers.len() - 1,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2; // 1-based, counting the header line
        let record = record.map_err(|e| Error::CsvRow { row: row_no, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(Error::CsvRow {
                row: row_no,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut feat = Vec::with_capacity(headers.len() - 1);
        for (j, field) in record.iter().enumerate() {
            let trimmed = field.trim();
            if trimmed.is_empty() {
                return Err(Error::CsvRow {
                    row: row_no,
                    message: format!("missing value in column '{}'", headers[j]),
                });
            }
            let value: f64 = trimmed.parse().map_err(|_| Error::CsvRow {
                row: row_no,
                message: format!("'{trimmed}' in column '{}' is not numeric", headers[j]),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row: row_no, column: headers[j].clone() });
            }
            if j == target_col {
                targets.push(value);
            } else {
                feat.push(value);
            }
        }
        rows.push(feat);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = rows[0].len();
    let mut features = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            features[(i, j)] = *v;
        }
    }
    Dataset::new(features, Array1::from_vec(targets))
}

/// Read a feature-only matrix for prediction. Accepts either exactly `d`
/// columns, or `d + 1` columns (training schema) in which case the last
/// column is dropped as the target.
pub fn read_feature_csv(path: &Path, d: usize) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv(e.to_string()))?;
    let width = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.len();
    let keep = if width == d {
        d
    } else if width == d + 1 {
        d
    } else {
        return Err(Error::DimensionMismatch { expected: d, got: width });
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2;
        let record = record.map_err(|e| Error::CsvRow { row: row_no, message: e.to_string() })?;
        if record.len() != width {
            return Err(Error::CsvRow {
                row: row_no,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut feat = Vec::with_capacity(keep);
        for (j, field) in record.iter().take(keep).enumerate() {
            let trimmed = field.trim();
            let value: f64 = trimmed.parse().map_err(|_| Error::CsvRow {
                row: row_no,
                message: format!("'{trimmed}' in column {j} is not numeric"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row: row_no, column: format!("column {j}") });
            }
            feat.push(value);
        }
        rows.push(feat);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut features = Array2::zeros((rows.len(), keep));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            features[(i, j)] = *v;
        }
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::io::Write;

    fn ds(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let n = cols[0].len();
        let d = cols.len();
        let mut features = Array2::zeros((n, d));
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                features[(i, j)] = *v;
            }
        }
        Dataset::new(features, Array1::from_vec(y)).unwrap()
    }

    #[test]
    fn standardize_symmetric_three_points() {
        let data = ds(vec![vec![1.0, 2.0, 3.0]], vec![0.0; 3]);
        let std = data.standardize_features();
        let stats = std.standardization().unwrap();
        assert_abs_diff_eq!(stats.means[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.stds[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(std.features()[(0, 0)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(std.features()[(1, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(std.features()[(2, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_constant_column() {
        let data = ds(vec![vec![5.0, 5.0, 5.0]], vec![0.0; 3]);
        let std = data.standardize_features();
        assert_eq!(std.standardization().unwrap().stds[0], 1.0);
        assert!(std.features().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn standardize_two_points_sample_convention() {
        // sample std of [0, 10] is sqrt(50); 5/sqrt(50) = 0.7071...
        let data = ds(vec![vec![0.0, 10.0]], vec![0.0; 2]);
        let std = data.standardize_features();
        assert_abs_diff_eq!(std.features()[(0, 0)], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(std.features()[(1, 0)], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_std() {
        let mut rng = RngStream::new(123, 0);
        let n = 64;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.uniform(-5.0, 17.0)).collect())
            .collect();
        let data = ds(cols, vec![0.0; n]);
        let std = data.standardize_features();
        for col in std.features().columns() {
            let mean = col.sum() / n as f64;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_round_trip() {
        let mut rng = RngStream::new(9, 1);
        let n = 40;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.uniform(-100.0, 100.0)).collect())
            .collect();
        let data = ds(cols, vec![1.0; n]);
        let restored = data.standardize_features().invert_standardization().unwrap();
        for (a, b) in data.features().iter().zip(restored.features().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let features = array![[1.0, 2.0], [f64::NAN, 3.0]];
        let err = Dataset::new(features, array![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 2, .. }));
    }

    #[test]
    fn split_cardinality_and_partition() {
        let data = ds(vec![(0..10).map(|i| i as f64).collect()], (0..10).map(|i| i as f64).collect());
        let (train, test) = split(&data, &SplitSpec { train_fraction: 0.5, seed: 7 }).unwrap();
        assert_eq!(train.n_samples(), 5);
        assert_eq!(test.n_samples(), 5);
        let mut all: Vec<f64> = train.targets().iter().chain(test.targets().iter()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_boston_sizes() {
        // round(506 * 0.7) = 354
        let (train_idx, test_idx) = split_indices(506, &SplitSpec { train_fraction: 0.7, seed: 1 }).unwrap();
        assert_eq!(train_idx.len(), 354);
        assert_eq!(test_idx.len(), 152);
    }

    #[test]
    fn split_deterministic_over_seeds() {
        for seed in 0..100 {
            let a = split_indices(37, &SplitSpec { train_fraction: 0.6, seed }).unwrap();
            let b = split_indices(37, &SplitSpec { train_fraction: 0.6, seed }).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = ds(vec![vec![1.0, 2.0, 3.0]], vec![0.0; 3]);
        assert!(split(&data, &SplitSpec { train_fraction: 0.0, seed: 0 }).is_err());
        assert!(split(&data, &SplitSpec { train_fraction: 1.0, seed: 0 }).is_err());
    }

    #[test]
    fn csv_round_trip_and_target_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "a,b,y").unwrap();
        writeln!(f, "1.0,2.0,3.0").unwrap();
        writeln!(f, "4.0,5.0,6.0").unwrap();
        drop(f);

        let data = read_csv(&path, None).unwrap();
        assert_eq!(data.n_features(), 2);
        assert_eq!(data.targets().to_vec(), vec![3.0, 6.0]);

        let data = read_csv(&path, Some("a")).unwrap();
        assert_eq!(data.targets().to_vec(), vec![1.0, 4.0]);
        assert_eq!(data.features()[(0, 0)], 2.0);
    }

    #[test]
    fn csv_missing_field_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n3.0\n").unwrap();
        let err = read_csv(&path, None).unwrap_err();
        match err {
            Error::CsvRow { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_headerless_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,4.0\n").unwrap();
        assert!(matches!(read_csv(&path, None), Err(Error::Csv(_))));
    }
}
