//! Synthetic instance generation and CSV ingestion.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::derive_seed;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::regression::Dataset;

/// The target span below which min-max normalization is considered degenerate.
const MIN_TARGET_SPAN: f64 = 1e-12;

/// Samples a synthetic dataset: coefficients uniform on [-1,1]^(d+1), feature
/// entries i.i.d. standard normal with an appended constant-1 column,
/// responses `beta . x + noise` min-max normalized to [0,1]. All agents are
/// marked strategic (callers reassign the strategic set as needed).
///
/// Deterministic given the seed. A degenerate normalization (all responses
/// equal) triggers regeneration with an incremented sub-seed, at most 10
/// times.
pub fn generate_synthetic(n: usize, d: usize, noise_sd: f64, seed: u64) -> Result<Dataset<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and d >= 1".into()));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::InvalidParameter("noise_sd must be finite and >= 0".into()));
    }

    for attempt in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6E57, attempt));
        // Draw order is fixed: coefficients, then features row-major, then noise.
        let beta: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            row.push(1.0);
            rows.push(row);
        }
        let noise: Vec<f64> = (0..n)
            .map(|_| noise_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let raw: Vec<f64> = rows
            .iter()
            .zip(&noise)
            .map(|(row, eps)| row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + eps)
            .collect();
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max - min < MIN_TARGET_SPAN {
            continue;
        }
        let span = max - min;
        let responses: Vec<f64> = raw.iter().map(|&y| ((y - min) / span).clamp(0.0, 1.0)).collect();
        let features = Matrix::from_rows(rows)?;
        return Dataset::new(features, responses, 0..n);
    }
    Err(Error::DegenerateData(format!(
        "normalization degenerate after 10 attempts (n={n}, d={d}, noise_sd={noise_sd})"
    )))
}

/// A parsed CSV dataset plus ingestion bookkeeping.
#[derive(Clone, Debug)]
pub struct IngestReport {
    pub dataset: Dataset<f64>,
    /// Rows dropped because a referenced cell was empty.
    pub rows_dropped: usize,
}

/// Reads a comma-separated file (header row required, UTF-8, decimal point),
/// selecting the named feature columns plus an appended constant column, and
/// min-max normalizing the target to [0,1]. Rows with missing (empty) cells
/// in any referenced column are dropped and counted; non-numeric content is
/// an error carrying the row index. All agents are marked strategic.
///
/// `feature_columns` may be empty: the dataset then consists of the constant
/// column alone (the facility-location shape).
pub fn ingest_csv(
    path: impl AsRef<Path>,
    feature_columns: &[String],
    target_column: &str,
) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_idx: Vec<usize> = feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let target_idx = find(target_column)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets: Vec<f64> = Vec::new();
    let mut rows_dropped = 0usize;

    for (row_number, record) in reader.records().enumerate() {
        let record = record?;
        let fetch = |idx: usize| record.get(idx).unwrap_or("");
        let referenced: Vec<(usize, &str)> = feature_idx
            .iter()
            .chain(std::iter::once(&target_idx))
            .map(|&idx| (idx, fetch(idx)))
            .collect();
        if referenced.iter().any(|(_, cell)| cell.is_empty()) {
            rows_dropped += 1;
            continue;
        }
        let mut parsed = Vec::with_capacity(referenced.len());
        for (idx, cell) in referenced {
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row: row_number,
                column: headers.get(idx).unwrap_or("?").to_string(),
                value: cell.to_string(),
            })?;
            parsed.push(value);
        }
        let target = parsed.pop().expect("target cell present");
        parsed.push(1.0);
        rows.push(parsed);
        raw_targets.push(target);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset(
            "no usable rows after dropping missing values".into(),
        ));
    }

    let min = raw_targets.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw_targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min < MIN_TARGET_SPAN {
        return Err(Error::DegenerateData("target column is constant".into()));
    }
    let span = max - min;
    let responses: Vec<f64> = raw_targets
        .iter()
        .map(|&y| ((y - min) / span).clamp(0.0, 1.0))
        .collect();

    let n = rows.len();
    let features = Matrix::from_rows(rows)?;
    let dataset = Dataset::new(features, responses, 0..n)?;
    Ok(IngestReport { dataset, rows_dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::ols_fit;
    use std::io::Write;

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = generate_synthetic(25, 3, 0.5, 42).unwrap();
        let b = generate_synthetic(25, 3, 0.5, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(25, 3, 0.5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_interpolates_without_noise_when_wide() {
        // d+1 >= n and zero noise: OLS residuals vanish (normalization is
        // affine, so they vanish in normalized space too).
        let ds = generate_synthetic(4, 5, 0.0, 7).unwrap();
        let hyp = ols_fit(&ds, ds.true_responses());
        let hyp = match hyp {
            Ok(h) => h,
            // Wide design: X'X singular; the iterative fit still interpolates.
            Err(_) => crate::regression::fit(
                &ds,
                ds.true_responses(),
                &crate::regression::RegressionConfig::new(2.0).unwrap(),
            )
            .unwrap(),
        };
        assert!(hyp.residuals.iter().all(|&r| r <= 1e-8));
    }

    #[test]
    fn synthetic_moments_close_to_standard_normal() {
        let ds = generate_synthetic(10_000, 3, 0.5, 99).unwrap();
        let n = ds.n() as f64;
        for j in 0..3 {
            let mean: f64 = (0..ds.n()).map(|i| ds.features().get(i, j)).sum::<f64>() / n;
            let var: f64 = (0..ds.n())
                .map(|i| (ds.features().get(i, j) - mean).powi(2))
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 0.05, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "column {j} variance {var}");
        }
    }

    #[test]
    fn synthetic_degenerate_errors_out() {
        // Single point: the span is always zero.
        assert!(matches!(
            generate_synthetic(1, 2, 0.0, 5),
            Err(Error::DegenerateData(_))
        ));
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingest_known_three_rows() {
        let f = write_csv("a,b,price\n1.0,2.0,10\n3.0,4.0,20\n5.0,6.0,30\n");
        let report = ingest_csv(
            f.path(),
            &["a".to_string(), "b".to_string()],
            "price",
        )
        .unwrap();
        let ds = &report.dataset;
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.dim(), 3);
        assert_eq!(report.rows_dropped, 0);
        assert_eq!(ds.features().row(1), &[3.0, 4.0, 1.0]);
        assert_eq!(ds.true_responses(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn ingest_target_already_unit_interval_is_identity() {
        let f = write_csv("x,y\n0.5,0.0\n1.5,0.25\n2.5,1.0\n");
        let report = ingest_csv(f.path(), &["x".to_string()], "y").unwrap();
        assert_eq!(report.dataset.true_responses(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn ingest_drops_rows_with_missing_cells() {
        let f = write_csv("x,y\n1,0.1\n,0.2\n3,\n4,0.9\n");
        let report = ingest_csv(f.path(), &["x".to_string()], "y").unwrap();
        assert_eq!(report.dataset.n(), 2);
        assert_eq!(report.rows_dropped, 2);
    }

    #[test]
    fn ingest_missing_column_is_an_error() {
        let f = write_csv("x,y\n1,2\n");
        assert!(matches!(
            ingest_csv(f.path(), &["z".to_string()], "y"),
            Err(Error::MissingColumn(c)) if c == "z"
        ));
    }

    #[test]
    fn ingest_non_numeric_cell_carries_row_index() {
        let f = write_csv("x,y\n1,2\n2,oops\n3,4\n");
        match ingest_csv(f.path(), &["x".to_string()], "y") {
            Err(Error::NonNumericCell { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "y");
            }
            other => panic!("expected NonNumericCell, got {other:?}"),
        }
    }

    #[test]
    fn ingest_empty_result_is_an_error() {
        let f = write_csv("x,y\n,1\n,2\n");
        assert!(matches!(
            ingest_csv(f.path(), &["x".to_string()], "y"),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn ingest_real_estate_shaped_file() {
        // Shaped like the UCI real-estate valuation table: ~400 rows, 6
        // feature columns plus the target.
        let mut content = String::from(
            "transaction_date,house_age,mrt_distance,stores,latitude,longitude,unit_price\n",
        );
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..407 {
            let row = format!(
                "{:.3},{:.1},{:.2},{},{:.5},{:.5},{:.1}\n",
                2012.0 + next(),
                40.0 * next(),
                6000.0 * next(),
                (10.0 * next()) as u32,
                24.9 + 0.1 * next(),
                121.5 + 0.1 * next(),
                20.0 + 100.0 * next(),
            );
            content.push_str(&row);
        }
        let f = write_csv(&content);
        let cols: Vec<String> = [
            "transaction_date",
            "house_age",
            "mrt_distance",
            "stores",
            "latitude",
            "longitude",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let report = ingest_csv(f.path(), &cols, "unit_price").unwrap();
        assert_eq!(report.dataset.n(), 407);
        assert_eq!(report.dataset.dim(), 7);
    }
}
