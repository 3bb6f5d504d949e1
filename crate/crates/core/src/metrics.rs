//! Evaluation of decomposition quality: numerical rank of the deterministic
//! part, Frobenius norms, per-flow correlation between the deterministic and
//! noise series, and spectral flatness of the recovered noise.

use crate::dataset::Decomposition;
use crate::spectral::{aggregate_density, SpectralDensity};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("reports cover different flow counts: {left} vs {right}")]
    ReportMismatch { left: usize, right: usize },
}

/// Default relative tolerance for [`numerical_rank`]: thresholded spectra
/// carry exact zeros, so any reasonable value agrees; the knob matters only
/// for matrices that did not come out of a thresholding step.
pub const NUMERICAL_RANK_REL_TOL: f64 = 1e-8;

/// Count of singular values above `rel_tol` times the largest one; 0 for the
/// zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &v| a.max(v));
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Absolute Pearson correlation, clamped to `[0, 1]`. A constant vector has
/// no correlation; the value is defined as 0 and flagged.
pub fn pearson_abs_flagged(a: &[f64], b: &[f64]) -> Result<(f64, bool), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let len = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / len;
    let mean_b = b.iter().sum::<f64>() / len;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok((0.0, true));
    }
    let corr = (cov / (var_a.sqrt() * var_b.sqrt())).abs().min(1.0);
    Ok((corr, false))
}

/// [`pearson_abs_flagged`] without the degeneracy flag.
pub fn pearson_abs(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    pearson_abs_flagged(a, b).map(|(v, _)| v)
}

/// Wiener-entropy flatness of a spectral density: geometric over arithmetic
/// mean, 1 for a perfectly flat spectrum. DC is excluded by default since a
/// finite sample of zero-mean noise still carries a mean residue. An
/// all-zero density is defined as flat (1).
pub fn spectral_flatness(phi: &SpectralDensity, exclude_dc: bool) -> f64 {
    let values = if exclude_dc && !phi.phi.is_empty() { &phi.phi[1..] } else { &phi.phi[..] };
    if values.is_empty() {
        return 1.0;
    }
    let arithmetic = values.iter().sum::<f64>() / values.len() as f64;
    if arithmetic == 0.0 {
        return 1.0;
    }
    if values.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let log_mean = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    (log_mean.exp() / arithmetic).min(1.0)
}

/// Evaluation summary of one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rank_a: usize,
    pub fro_a: f64,
    pub fro_e: f64,
    pub fro_n: f64,
    /// Per-flow `|corr(A_j, N_j)|`.
    pub pearson_abs: Vec<f64>,
    /// Flows whose correlation was undefined (constant series).
    pub degenerate_pearson: Vec<usize>,
    pub spectral_flatness_n: f64,
    /// Aggregate noise spectrum at the penalized positions.
    pub peak_spectra: BTreeMap<usize, f64>,
}

/// Evaluate a decomposition; `s1` lists the 1-based positions whose noise
/// spectra should be reported individually.
pub fn evaluate(d: &Decomposition, s1: &BTreeSet<usize>) -> EvalReport {
    let p_len = d.p_len();
    let mut pearson = Vec::with_capacity(p_len);
    let mut degenerate = Vec::new();
    for j in 0..p_len {
        let a_col: Vec<f64> = d.a.column(j).iter().copied().collect();
        let n_col: Vec<f64> = d.n.column(j).iter().copied().collect();
        let (value, flag) = pearson_abs_flagged(&a_col, &n_col).expect("equal column lengths");
        pearson.push(value);
        if flag {
            degenerate.push(j);
        }
    }
    let phi_n = aggregate_density(&d.n);
    let peak_spectra = s1
        .iter()
        .filter(|&&t| t >= 1 && t <= phi_n.len())
        .map(|&t| (t, phi_n.phi[t - 1]))
        .collect();
    EvalReport {
        rank_a: numerical_rank(&d.a, NUMERICAL_RANK_REL_TOL),
        fro_a: d.a.norm(),
        fro_e: d.e.norm(),
        fro_n: d.n.norm(),
        pearson_abs: pearson,
        degenerate_pearson: degenerate,
        spectral_flatness_n: spectral_flatness(&phi_n, true),
        peak_spectra,
    }
}

/// Per-metric deltas between a frequency-regularized run and a plain run on
/// the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub flatness_fdr: f64,
    pub flatness_spcp: f64,
    pub flatness_gain: f64,
    pub rank_fdr: usize,
    pub rank_spcp: usize,
    /// `rank_fdr / rank_spcp`; `None` when the plain rank is 0 (1 when both
    /// are 0).
    pub rank_ratio: Option<f64>,
    /// `‖A_fdr‖_F / ‖A_spcp‖_F`; `None` when the denominator is 0.
    pub fro_ratio_a: Option<f64>,
    /// Fraction of flows whose `|corr(A_j, N_j)|` strictly decreased.
    pub pearson_decreased_fraction: f64,
    /// Noise spectrum ratio fdr/spcp at each shared penalized position.
    pub peak_spectra_ratio: BTreeMap<usize, f64>,
}

/// Compare two reports computed from the same input matrix.
pub fn compare_reports(fdr: &EvalReport, spcp: &EvalReport) -> Result<ComparisonSummary, MetricsError> {
    if fdr.pearson_abs.len() != spcp.pearson_abs.len() {
        return Err(MetricsError::ReportMismatch {
            left: fdr.pearson_abs.len(),
            right: spcp.pearson_abs.len(),
        });
    }
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            Some(num / den)
        } else if num == 0.0 {
            Some(1.0)
        } else {
            None
        }
    };
    let decreased = fdr
        .pearson_abs
        .iter()
        .zip(&spcp.pearson_abs)
        .filter(|(f, s)| f < s)
        .count();
    let peak_spectra_ratio = fdr
        .peak_spectra
        .iter()
        .filter_map(|(t, num)| {
            spcp.peak_spectra.get(t).and_then(|den| ratio(*num, *den).map(|r| (*t, r)))
        })
        .collect();
    Ok(ComparisonSummary {
        flatness_fdr: fdr.spectral_flatness_n,
        flatness_spcp: spcp.spectral_flatness_n,
        flatness_gain: fdr.spectral_flatness_n - spcp.spectral_flatness_n,
        rank_fdr: fdr.rank_a,
        rank_spcp: spcp.rank_a,
        rank_ratio: ratio(fdr.rank_a as f64, spcp.rank_a as f64),
        fro_ratio_a: ratio(fdr.fro_a, spcp.fro_a),
        pearson_decreased_fraction: decreased as f64 / fdr.pearson_abs.len().max(1) as f64,
        peak_spectra_ratio,
    })
}

impl fmt::Display for ComparisonSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "noise flatness: {:.4} -> {:.4} (gain {:+.4})",
            self.flatness_spcp, self.flatness_fdr, self.flatness_gain
        )?;
        match self.rank_ratio {
            Some(r) => writeln!(f, "rank(A): {} -> {} (ratio {:.2})", self.rank_spcp, self.rank_fdr, r)?,
            None => writeln!(f, "rank(A): {} -> {}", self.rank_spcp, self.rank_fdr)?,
        }
        match self.fro_ratio_a {
            Some(r) => writeln!(f, "|A_fdr|_F / |A_spcp|_F = {r:.4}")?,
            None => writeln!(f, "|A_fdr|_F / |A_spcp|_F undefined (zero denominator)")?,
        }
        write!(
            f,
            "|pearson| decreased on {:.1}% of flows",
            100.0 * self.pearson_decreased_fraction
        )
    }
}
