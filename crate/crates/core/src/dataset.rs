//! Traffic matrices, per-flow noise scales, decomposition triples, and their
//! on-disk forms.
//!
//! The canonical interchange format is CSV (one row per time sample, no
//! header by default, optional header row carrying flow ids). A raw binary
//! format — 8-byte header of `T`, `P` as little-endian `u32`, then `T·P`
//! little-endian `f64` values in column-major order — is offered for speed.
//! Floats are written in shortest round-trip form, so save → load is
//! bit-identical.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: cannot parse {text:?} as a finite number")]
    BadEntry { row: usize, col: usize, text: String },
    #[error("matrix must be at least 2×1 (got {rows}×{cols})")]
    TooSmall { rows: usize, cols: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("flow ids must be distinct (duplicate {0:?})")]
    DuplicateFlowId(String),
    #[error("expected {expected} flow ids, found {found}")]
    FlowIdCount { expected: usize, found: usize },
    #[error("interval_seconds must be positive")]
    BadInterval,
    #[error("noise scales carry {found} entries but the matrix has {expected} flows")]
    ScaleCount { expected: usize, found: usize },
    #[error("noise scale {index} must be positive and finite (got {value})")]
    BadScale { index: usize, value: f64 },
    #[error("need at least 3 time samples to estimate noise scales (got {0})")]
    TooFewSamples(usize),
    #[error("{path}: {reason}")]
    BinaryFormat { path: String, reason: String },
    #[error("component matrices must share one shape")]
    ShapeMismatch,
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), source }
}

/// A `T×P` matrix of traffic volumes: rows are time samples at a fixed
/// interval, columns are origin–destination flows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    pub data: DMatrix<f64>,
    pub interval_seconds: u32,
    pub flow_ids: Vec<String>,
}

impl TrafficMatrix {
    /// Validating constructor. `flow_ids = None` generates `flow_1..flow_P`.
    pub fn new(
        data: DMatrix<f64>,
        interval_seconds: u32,
        flow_ids: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        if data.nrows() < 2 || data.ncols() < 1 {
            return Err(DatasetError::TooSmall { rows: data.nrows(), cols: data.ncols() });
        }
        if interval_seconds == 0 {
            return Err(DatasetError::BadInterval);
        }
        check_finite(&data)?;
        let flow_ids = match flow_ids {
            Some(ids) => {
                if ids.len() != data.ncols() {
                    return Err(DatasetError::FlowIdCount {
                        expected: data.ncols(),
                        found: ids.len(),
                    });
                }
                let mut seen = std::collections::BTreeSet::new();
                for id in &ids {
                    if !seen.insert(id.clone()) {
                        return Err(DatasetError::DuplicateFlowId(id.clone()));
                    }
                }
                ids
            }
            None => default_flow_ids(data.ncols()),
        };
        Ok(TrafficMatrix { data, interval_seconds, flow_ids })
    }

    pub fn t_len(&self) -> usize {
        self.data.nrows()
    }

    pub fn p_len(&self) -> usize {
        self.data.ncols()
    }
}

pub(crate) fn default_flow_ids(p_len: usize) -> Vec<String> {
    (1..=p_len).map(|j| format!("flow_{j}")).collect()
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), DatasetError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(DatasetError::NonFinite { row: i + 1, col: j + 1 });
            }
        }
    }
    Ok(())
}

/// Estimated per-flow noise standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    pub sigma: Vec<f64>,
    /// 0-based indices of flows whose estimate collapsed and was clamped to
    /// the floor (constant or near-constant flows).
    pub floored: Vec<usize>,
}

/// Relative floor applied to degenerate noise-scale estimates.
pub const SIGMA_FLOOR_FACTOR: f64 = 1e-8;

const MAD_TO_SIGMA: f64 = 0.674_489_750_196_081_7; // Φ⁻¹(0.75)

/// Estimate each flow's noise standard deviation from the median absolute
/// deviation of its first differences.
///
/// The deterministic traffic varies slowly, so differences are dominated by
/// noise, and the median-based scale shrugs off sparse anomaly spikes. For
/// white noise with deviation σ the differences have deviation √2·σ, hence
/// the estimate `MAD(ΔX_j) / (√2 · 0.6745)`. Estimates below
/// `floor_factor·max|X_j|` are clamped to that floor and reported in
/// [`NoiseScales::floored`].
pub fn estimate_noise_scales(x: &TrafficMatrix) -> Result<NoiseScales, DatasetError> {
    estimate_noise_scales_with_floor(x, SIGMA_FLOOR_FACTOR)
}

pub fn estimate_noise_scales_with_floor(
    x: &TrafficMatrix,
    floor_factor: f64,
) -> Result<NoiseScales, DatasetError> {
    let t_len = x.t_len();
    if t_len < 3 {
        return Err(DatasetError::TooFewSamples(t_len));
    }
    let mut sigma = Vec::with_capacity(x.p_len());
    let mut floored = Vec::new();
    for j in 0..x.p_len() {
        let col = x.data.column(j);
        let mut diffs: Vec<f64> = (1..t_len).map(|i| col[i] - col[i - 1]).collect();
        let med = median_in_place(&mut diffs);
        let mut abs_dev: Vec<f64> = diffs.iter().map(|d| (d - med).abs()).collect();
        let mad = median_in_place(&mut abs_dev);
        let mut s = mad / (std::f64::consts::SQRT_2 * MAD_TO_SIGMA);
        let max_abs = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let floor = floor_factor * if max_abs > 0.0 { max_abs } else { 1.0 };
        if s < floor {
            log::warn!("flow {} ({}): noise estimate {s} clamped to floor {floor}", j + 1, x.flow_ids[j]);
            s = floor;
            floored.push(j);
        }
        sigma.push(s);
    }
    Ok(NoiseScales { sigma, floored })
}

/// Median of a scratch slice; averages the middle pair for even lengths.
fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Divide each flow by its noise scale, giving unit noise variance per
/// column.
pub fn normalize(x: &TrafficMatrix, s: &NoiseScales) -> Result<TrafficMatrix, DatasetError> {
    scale_columns(x, s, |value, sigma| value / sigma)
}

/// Multiply each flow back by its noise scale (inverse of [`normalize`]).
pub fn denormalize(x: &TrafficMatrix, s: &NoiseScales) -> Result<TrafficMatrix, DatasetError> {
    scale_columns(x, s, |value, sigma| value * sigma)
}

fn scale_columns(
    x: &TrafficMatrix,
    s: &NoiseScales,
    op: impl Fn(f64, f64) -> f64,
) -> Result<TrafficMatrix, DatasetError> {
    if s.sigma.len() != x.p_len() {
        return Err(DatasetError::ScaleCount { expected: x.p_len(), found: s.sigma.len() });
    }
    for (j, &sig) in s.sigma.iter().enumerate() {
        if !(sig > 0.0 && sig.is_finite()) {
            return Err(DatasetError::BadScale { index: j, value: sig });
        }
    }
    let mut data = x.data.clone();
    for (j, &sig) in s.sigma.iter().enumerate() {
        for v in data.column_mut(j).iter_mut() {
            *v = op(*v, sig);
        }
    }
    Ok(TrafficMatrix {
        data,
        interval_seconds: x.interval_seconds,
        flow_ids: x.flow_ids.clone(),
    })
}

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

/// Load a traffic matrix with the default 5-minute sampling interval.
pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<TrafficMatrix, DatasetError> {
    load_matrix_with_interval(path, format, 300)
}

pub fn load_matrix_with_interval(
    path: impl AsRef<Path>,
    format: MatrixFormat,
    interval_seconds: u32,
) -> Result<TrafficMatrix, DatasetError> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => {
            let (data, header) = read_csv_matrix(path)?;
            if data.nrows() < 2 || data.ncols() < 1 {
                return Err(DatasetError::TooSmall { rows: data.nrows(), cols: data.ncols() });
            }
            TrafficMatrix::new(data, interval_seconds, header)
        }
        MatrixFormat::Binary => {
            let data = read_binary_matrix(path)?;
            TrafficMatrix::new(data, interval_seconds, None)
        }
    }
}

/// Save a traffic matrix. CSV output carries no header row; use
/// [`save_matrix_with_header`] to record flow ids.
pub fn save_matrix(
    x: &TrafficMatrix,
    path: impl AsRef<Path>,
    format: MatrixFormat,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => write_csv_matrix(&x.data, path),
        MatrixFormat::Binary => write_binary_matrix(&x.data, path),
    }
}

pub fn save_matrix_with_header(x: &TrafficMatrix, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut text = x.flow_ids.join(",");
    text.push('\n');
    text.push_str(&matrix_to_csv(&x.data));
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Read a bare numeric CSV matrix. Returns the parsed matrix and, when the
/// first row fails numeric parsing, that row's fields as flow-id labels.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Option<Vec<String>>), DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv_matrix(&text)
}

pub(crate) fn parse_csv_matrix(text: &str) -> Result<(DMatrix<f64>, Option<Vec<String>>), DatasetError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if let Some(expected) = width {
            if fields.len() != expected {
                return Err(DatasetError::RaggedRow {
                    row: line_idx + 1,
                    expected,
                    found: fields.len(),
                });
            }
        }
        let mut parsed = Vec::with_capacity(fields.len());
        let mut failed: Option<(usize, String)> = None;
        for (col_idx, field) in fields.iter().enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                _ => {
                    failed = Some((col_idx + 1, field.trim().to_string()));
                    break;
                }
            }
        }
        match failed {
            None => {
                width.get_or_insert(fields.len());
                rows.push(parsed);
            }
            Some((col, text)) => {
                // A non-numeric first row doubles as the header.
                if rows.is_empty() && header.is_none() {
                    header = Some(fields.iter().map(|f| f.trim().to_string()).collect());
                    width.get_or_insert(fields.len());
                } else {
                    return Err(DatasetError::BadEntry { row: line_idx + 1, col, text });
                }
            }
        }
    }
    let t_len = rows.len();
    let p_len = width.unwrap_or(0);
    if t_len == 0 || p_len == 0 {
        return Err(DatasetError::TooSmall { rows: t_len, cols: p_len });
    }
    let data = DMatrix::from_fn(t_len, p_len, |i, j| rows[i][j]);
    Ok((data, header))
}

/// Write a bare numeric CSV matrix (shortest round-trip float form).
pub fn write_csv_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(m)).map_err(|e| io_err(path, e))
}

pub(crate) fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(i, j)]).expect("string write");
        }
        out.push('\n');
    }
    out
}

fn read_binary_matrix(path: &Path) -> Result<DMatrix<f64>, DatasetError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let fail = |reason: &str| DatasetError::BinaryFormat {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 8 {
        return Err(fail("shorter than the 8-byte header"));
    }
    let t_len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let p_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + t_len
        .checked_mul(p_len)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail("header dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(fail(&format!(
            "size mismatch: header says {t_len}×{p_len} ({expected} bytes), file has {}",
            bytes.len()
        )));
    }
    let mut data = DMatrix::zeros(t_len, p_len);
    for j in 0..p_len {
        for i in 0..t_len {
            let base = 8 + (j * t_len + i) * 8;
            let v = f64::from_le_bytes(bytes[base..base + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(DatasetError::NonFinite { row: i + 1, col: j + 1 });
            }
            data[(i, j)] = v;
        }
    }
    Ok(data)
}

fn write_binary_matrix(m: &DMatrix<f64>, path: &Path) -> Result<(), DatasetError> {
    let mut bytes = Vec::with_capacity(8 + m.len() * 8);
    bytes.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Solver run summary stored alongside a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub final_mu: f64,
    /// Relative reconstruction residual `‖A+E+N−X‖_F / ‖X‖_F` at the
    /// returned iterate.
    pub residual_fro: f64,
    /// Objective values per iteration, all evaluated at the final smoothing
    /// parameter so the sequence is comparable across the continuation.
    pub objective_trace: Vec<f64>,
    pub mu_trace: Vec<f64>,
}

impl Diagnostics {
    /// Neutral diagnostics for triples that did not come out of a solver run
    /// (synthetic ground truth).
    pub fn ground_truth() -> Self {
        Diagnostics {
            iterations: 0,
            converged: true,
            final_mu: 0.0,
            residual_fro: 0.0,
            objective_trace: Vec::new(),
            mu_trace: Vec::new(),
        }
    }
}

/// A decomposition triple: deterministic `A`, anomaly `E`, noise `N`, with
/// the diagnostics of the run that produced it. `A + E + N` reproduces the
/// decomposed matrix up to the solver's achieved residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub a: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub diagnostics: Diagnostics,
}

impl Decomposition {
    pub fn new(
        a: DMatrix<f64>,
        e: DMatrix<f64>,
        n: DMatrix<f64>,
        diagnostics: Diagnostics,
    ) -> Result<Self, DatasetError> {
        if a.shape() != e.shape() || a.shape() != n.shape() {
            return Err(DatasetError::ShapeMismatch);
        }
        check_finite(&a)?;
        check_finite(&e)?;
        check_finite(&n)?;
        Ok(Decomposition { a, e, n, diagnostics })
    }

    pub fn t_len(&self) -> usize {
        self.a.nrows()
    }

    pub fn p_len(&self) -> usize {
        self.a.ncols()
    }

    /// Component sum, which approximates the decomposed matrix.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        &self.a + &self.e + &self.n
    }
}

/// Write `A.csv`, `E.csv`, `N.csv` and `diagnostics.json` into `dir`
/// (created if missing).
pub fn save_decomposition(d: &Decomposition, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_csv_matrix(&d.a, dir.join("A.csv"))?;
    write_csv_matrix(&d.e, dir.join("E.csv"))?;
    write_csv_matrix(&d.n, dir.join("N.csv"))?;
    let diag_path = dir.join("diagnostics.json");
    let json = serde_json::to_string_pretty(&d.diagnostics)
        .map_err(|e| DatasetError::Json { path: diag_path.display().to_string(), source: e })?;
    fs::write(&diag_path, json).map_err(|e| io_err(&diag_path, e))
}

/// Load a decomposition written by [`save_decomposition`].
pub fn load_decomposition(dir: impl AsRef<Path>) -> Result<Decomposition, DatasetError> {
    let dir = dir.as_ref();
    let (a, _) = read_csv_matrix(dir.join("A.csv"))?;
    let (e, _) = read_csv_matrix(dir.join("E.csv"))?;
    let (n, _) = read_csv_matrix(dir.join("N.csv"))?;
    let diag_path = dir.join("diagnostics.json");
    let text = fs::read_to_string(&diag_path).map_err(|e| io_err(&diag_path, e))?;
    let diagnostics = serde_json::from_str(&text)
        .map_err(|e| DatasetError::Json { path: diag_path.display().to_string(), source: e })?;
    Decomposition::new(a, e, n, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, uniform_in, TestRng};
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::SeedableRng;

    fn matrix_from_rows(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn write_temp(content: &[u8]) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f
    }

    #[test]
    fn parses_plain_csv() {
        let f = write_temp(b"1,2\n3,4\n5,6\n");
        let x = load_matrix(f.path(), MatrixFormat::Csv).unwrap();
        assert_eq!(x.t_len(), 3);
        assert_eq!(x.p_len(), 2);
        assert_eq!(x.data, matrix_from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
        assert_eq!(x.flow_ids, vec!["flow_1", "flow_2"]);
    }

    #[test]
    fn reports_nan_cell() {
        let f = write_temp(b"1,2\n3,NaN\n5,6\n");
        let err = load_matrix(f.path(), MatrixFormat::Csv).unwrap_err();
        match err {
            DatasetError::BadEntry { row, col, text } => {
                assert_eq!((row, col), (2, 2));
                assert_eq!(text, "NaN");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reports_ragged_row() {
        let f = write_temp(b"1,2\n3\n");
        let err = load_matrix(f.path(), MatrixFormat::Csv).unwrap_err();
        assert!(matches!(err, DatasetError::RaggedRow { row: 2, expected: 2, found: 1 }));
    }

    #[test]
    fn header_row_becomes_flow_ids() {
        let f = write_temp(b"ny-chi,ny-la\n1,2\n3,4\n");
        let x = load_matrix(f.path(), MatrixFormat::Csv).unwrap();
        assert_eq!(x.flow_ids, vec!["ny-chi", "ny-la"]);
        assert_eq!(x.t_len(), 2);
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let mut rng = TestRng::seed_from_u64(11);
        let data = DMatrix::from_fn(5, 3, |_, _| standard_normal(&mut rng) * 1e3);
        let x = TrafficMatrix::new(data, 300, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        save_matrix(&x, &path, MatrixFormat::Csv).unwrap();
        let back = load_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(back.data, x.data);

        let with_header = dir.path().join("xh.csv");
        save_matrix_with_header(&x, &with_header).unwrap();
        let back = load_matrix(&with_header, MatrixFormat::Csv).unwrap();
        assert_eq!(back.data, x.data);
        assert_eq!(back.flow_ids, x.flow_ids);
    }

    #[test]
    fn binary_round_trip_is_bit_identical() {
        let mut rng = TestRng::seed_from_u64(12);
        let data = DMatrix::from_fn(7, 2, |_, _| uniform_in(&mut rng, -1e6, 1e6));
        let x = TrafficMatrix::new(data, 60, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        save_matrix(&x, &path, MatrixFormat::Binary).unwrap();
        let back = load_matrix_with_interval(&path, MatrixFormat::Binary, 60).unwrap();
        assert_eq!(back.data, x.data);
        assert_eq!(back.interval_seconds, 60);
    }

    #[test]
    fn loader_rejects_malformed_inputs_without_panicking() {
        let csv_corpus: &[&[u8]] = &[
            b"",
            b"\n\n",
            b"1,2\n3\n",
            b"1,2\n3,inf\n",
            b"1,2\n3,-inf\n",
            b"1,2\nx,4\n",
            b"1,2\n3,\n",
            b"1,2,3\n4,5\n6,7,8\n",
            b"head,er\nalso,text\n",
            b"1,2\n",             // only one sample
            b"nan,nan\nnan,nan\n", // header sniff then bad rows
        ];
        for (i, content) in csv_corpus.iter().enumerate() {
            let f = write_temp(content);
            assert!(
                load_matrix(f.path(), MatrixFormat::Csv).is_err(),
                "csv corpus case {i} unexpectedly parsed"
            );
        }
        let bin_corpus: &[&[u8]] = &[
            b"",
            b"\x01\x02\x03",
            &[0u8; 8],                        // 0×0
            &[2, 0, 0, 0, 1, 0, 0, 0, 9, 9], // truncated payload
            {
                // 2×1 with a NaN payload
                let mut v = vec![2, 0, 0, 0, 1, 0, 0, 0];
                v.extend_from_slice(&f64::NAN.to_le_bytes());
                v.extend_from_slice(&1.0f64.to_le_bytes());
                Box::leak(v.into_boxed_slice())
            },
        ];
        for (i, content) in bin_corpus.iter().enumerate() {
            let f = write_temp(content);
            assert!(
                load_matrix(f.path(), MatrixFormat::Binary).is_err(),
                "binary corpus case {i} unexpectedly parsed"
            );
        }
        assert!(load_matrix("/definitely/not/here.csv", MatrixFormat::Csv).is_err());
    }

    #[test]
    fn noise_estimate_recovers_unit_sigma() {
        let t_len = 2016;
        let mut estimates = Vec::new();
        for seed in 0..100u64 {
            let mut rng = TestRng::seed_from_u64(1000 + seed);
            let data = DMatrix::from_fn(t_len, 1, |_, _| standard_normal(&mut rng));
            let x = TrafficMatrix::new(data, 300, None).unwrap();
            let s = estimate_noise_scales(&x).unwrap();
            estimates.push(s.sigma[0]);
        }
        estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (estimates[49] + estimates[50]) / 2.0;
        assert!((median - 1.0).abs() < 0.1, "median estimate {median}");
    }

    #[test]
    fn noise_estimate_is_scale_equivariant() {
        // Integer-valued data keeps the differences and medians exact, so
        // scaling commutes with the whole estimate: bitwise for a power of
        // two, to the final rounding for any other factor.
        let mut rng = TestRng::seed_from_u64(21);
        let data = DMatrix::from_fn(64, 2, |_, _| uniform_in(&mut rng, 0.0, 64.0).floor());
        let x = TrafficMatrix::new(data.clone(), 300, None).unwrap();
        let s = estimate_noise_scales(&x).unwrap();
        let s4 = estimate_noise_scales(
            &TrafficMatrix::new(data.map(|v| 4.0 * v), 300, None).unwrap(),
        )
        .unwrap();
        let s5 = estimate_noise_scales(
            &TrafficMatrix::new(data.map(|v| 5.0 * v), 300, None).unwrap(),
        )
        .unwrap();
        for j in 0..2 {
            assert_eq!(4.0 * s.sigma[j], s4.sigma[j]);
            assert_relative_eq!(5.0 * s.sigma[j], s5.sigma[j], max_relative = f64::EPSILON);
        }
    }

    #[test]
    fn noise_estimate_is_permutation_equivariant() {
        let mut rng = TestRng::seed_from_u64(22);
        let data = DMatrix::from_fn(50, 4, |_, _| standard_normal(&mut rng));
        let x = TrafficMatrix::new(data.clone(), 300, None).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permuted_data = DMatrix::from_fn(50, 4, |i, j| data[(i, perm[j])]);
        let permuted = TrafficMatrix::new(permuted_data, 300, None).unwrap();
        let s = estimate_noise_scales(&x).unwrap();
        let sp = estimate_noise_scales(&permuted).unwrap();
        for j in 0..4 {
            assert_eq!(sp.sigma[j], s.sigma[perm[j]]);
        }
    }

    #[test]
    fn constant_flow_hits_floor() {
        let digits = [0.0, 5.0, 2.0, 8.0, 1.0, 9.0, 3.0, 7.0, 4.0, 6.0];
        let data = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 7.0 } else { digits[i] });
        let x = TrafficMatrix::new(data, 300, None).unwrap();
        let s = estimate_noise_scales(&x).unwrap();
        assert_eq!(s.floored, vec![0]);
        assert_relative_eq!(s.sigma[0], SIGMA_FLOOR_FACTOR * 7.0, epsilon = 1e-20);
        assert!(s.sigma[1] > s.sigma[0]);

        let zeros = TrafficMatrix::new(DMatrix::zeros(10, 1), 300, None).unwrap();
        let s = estimate_noise_scales(&zeros).unwrap();
        assert_relative_eq!(s.sigma[0], SIGMA_FLOOR_FACTOR, epsilon = 1e-20);
    }

    #[test]
    fn noise_estimate_needs_three_samples() {
        let x = TrafficMatrix::new(matrix_from_rows(&[&[1.0], &[2.0]]), 300, None).unwrap();
        assert!(matches!(estimate_noise_scales(&x), Err(DatasetError::TooFewSamples(2))));
    }

    #[test]
    fn normalize_divides_columns() {
        let x = TrafficMatrix::new(
            matrix_from_rows(&[&[2.0, 4.0], &[2.0, 4.0], &[2.0, 4.0]]),
            300,
            None,
        )
        .unwrap();
        let s = NoiseScales { sigma: vec![2.0, 4.0], floored: vec![] };
        let normalized = normalize(&x, &s).unwrap();
        assert!(normalized.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unit_scales_are_identity() {
        let mut rng = TestRng::seed_from_u64(31);
        let data = DMatrix::from_fn(6, 3, |_, _| standard_normal(&mut rng));
        let x = TrafficMatrix::new(data, 300, None).unwrap();
        let s = NoiseScales { sigma: vec![1.0; 3], floored: vec![] };
        assert_eq!(normalize(&x, &s).unwrap().data, x.data);
    }

    #[test]
    fn normalize_then_denormalize_round_trips() {
        let mut rng = TestRng::seed_from_u64(32);
        let data = DMatrix::from_fn(40, 5, |_, _| uniform_in(&mut rng, 1.0, 100.0));
        let x = TrafficMatrix::new(data, 300, None).unwrap();
        let s = estimate_noise_scales(&x).unwrap();
        let back = denormalize(&normalize(&x, &s).unwrap(), &s).unwrap();
        let rel = (&back.data - &x.data).norm() / x.data.norm();
        assert!(rel < 1e-12, "round-trip residual {rel}");
    }

    #[test]
    fn scale_length_mismatch_is_rejected() {
        let x = TrafficMatrix::new(matrix_from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]), 300, None).unwrap();
        let s = NoiseScales { sigma: vec![1.0], floored: vec![] };
        assert!(matches!(normalize(&x, &s), Err(DatasetError::ScaleCount { .. })));
    }

    #[test]
    fn decomposition_round_trips_through_dir() {
        let mut rng = TestRng::seed_from_u64(41);
        let shape = (6, 2);
        let mk = |rng: &mut TestRng| DMatrix::from_fn(shape.0, shape.1, |_, _| standard_normal(rng));
        let d = Decomposition::new(
            mk(&mut rng),
            mk(&mut rng),
            mk(&mut rng),
            Diagnostics {
                iterations: 17,
                converged: true,
                final_mu: 1e-4,
                residual_fro: 3e-3,
                objective_trace: vec![10.0, 5.0, 4.5],
                mu_trace: vec![1.0, 0.9, 0.81],
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_decomposition(&d, dir.path()).unwrap();
        let back = load_decomposition(dir.path()).unwrap();
        assert_eq!(back, d);
        // Stored schedule never increases.
        assert!(back.diagnostics.mu_trace.windows(2).all(|w| w[1] <= w[0]));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap())
                .unwrap();
        for key in ["iterations", "converged", "final_mu", "residual_fro", "objective_trace"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn zero_decomposition_writes_zero_files() {
        let d = Decomposition::new(
            DMatrix::zeros(3, 2),
            DMatrix::zeros(3, 2),
            DMatrix::zeros(3, 2),
            Diagnostics::ground_truth(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_decomposition(&d, dir.path()).unwrap();
        for name in ["A.csv", "E.csv", "N.csv"] {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(text, "0,0\n0,0\n0,0\n");
        }
    }

    #[test]
    fn traffic_matrix_validation() {
        assert!(TrafficMatrix::new(DMatrix::zeros(1, 1), 300, None).is_err());
        assert!(TrafficMatrix::new(DMatrix::zeros(2, 1), 0, None).is_err());
        let dup = TrafficMatrix::new(
            DMatrix::zeros(2, 2),
            300,
            Some(vec!["a".into(), "a".into()]),
        );
        assert!(matches!(dup, Err(DatasetError::DuplicateFlowId(_))));
        let wrong = TrafficMatrix::new(DMatrix::zeros(2, 2), 300, Some(vec!["a".into()]));
        assert!(matches!(wrong, Err(DatasetError::FlowIdCount { .. })));
        let mut data = DMatrix::zeros(2, 2);
        data[(1, 1)] = f64::INFINITY;
        assert!(matches!(
            TrafficMatrix::new(data, 300, None),
            Err(DatasetError::NonFinite { row: 2, col: 2 })
        ));
    }
}
