//! Seeded synthetic traffic matrices with known ground truth, for
//! desk-scale verification of the decomposition pipeline.
//!
//! The deterministic part is a sum of `rank_r` rank-one terms: smooth time
//! profiles (an offset plus diurnal-style harmonics with random phases)
//! times nonnegative per-flow loadings. Anomalies are sparse spikes with a
//! positive skew; noise is per-flow white Gaussian. The stream of draws is
//! ChaCha8 keyed by the seed, consumed in a fixed documented order (phases
//! and offsets, loadings, anomalies column-major, noise column-major), so a
//! spec reproduces its instance bit for bit.

use crate::dataset::{Decomposition, Diagnostics, TrafficMatrix};
use crate::rng::{standard_normal, uniform_in, unit_uniform};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("rank_r must lie in [1, min(T,P)] (got {rank_r} for {t_len}×{p_len})")]
    BadRank { rank_r: usize, t_len: usize, p_len: usize },
    #[error("anomaly_density must lie in [0, 1] (got {0})")]
    BadDensity(f64),
    #[error("noise sigma must be nonnegative and finite (got {value} at flow {index})")]
    BadSigma { index: usize, value: f64 },
    #[error("noise sigma vector has {found} entries, expected {expected}")]
    SigmaCount { expected: usize, found: usize },
    #[error("harmonic {index}: period and amplitude must be positive/nonnegative")]
    BadHarmonic { index: usize },
    #[error("dimensions must satisfy T ≥ 2, P ≥ 1 (got {t_len}×{p_len})")]
    BadShape { t_len: usize, p_len: usize },
    #[error("interval_seconds must be positive")]
    BadInterval,
}

/// One periodic component of the deterministic traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub period_hours: f64,
    pub amplitude: f64,
}

/// Per-flow noise levels: one value for all flows or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Scalar(f64),
    PerFlow(Vec<f64>),
}

impl NoiseSigma {
    fn resolve(&self, p_len: usize) -> Result<Vec<f64>, SynthError> {
        let sigma = match self {
            NoiseSigma::Scalar(s) => vec![*s; p_len],
            NoiseSigma::PerFlow(v) => {
                if v.len() != p_len {
                    return Err(SynthError::SigmaCount { expected: p_len, found: v.len() });
                }
                v.clone()
            }
        };
        for (index, &value) in sigma.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(SynthError::BadSigma { index, value });
            }
        }
        Ok(sigma)
    }
}

/// Recipe for one synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t_len: usize,
    pub p_len: usize,
    /// Exact rank of the deterministic component.
    pub rank_r: usize,
    pub harmonics: Vec<Harmonic>,
    /// Expected fraction of nonzero anomaly entries.
    pub anomaly_density: f64,
    /// Spike scale; `None` uses ten times each flow's noise level (or 10 if
    /// that level is zero).
    pub anomaly_magnitude: Option<f64>,
    pub noise_sigma: NoiseSigma,
    pub seed: u64,
    pub interval_seconds: u32,
}

/// Default diurnal harmonic set: periods dividing 24 hours, amplitudes
/// decaying toward the short periods. Sized so that with unit noise the
/// deterministic part dominates the volume, as in real traffic.
pub fn default_harmonics() -> Vec<Harmonic> {
    [(24.0, 3.0), (12.0, 1.8), (6.0, 1.2), (3.0, 0.8), (1.5, 0.5), (1.0, 0.3)]
        .into_iter()
        .map(|(period_hours, amplitude)| Harmonic { period_hours, amplitude })
        .collect()
}

impl SynthSpec {
    /// A week of 5-minute samples with the default diurnal harmonics, unit
    /// noise, rank 4 and 0.5% anomalies.
    pub fn default_weekly(p_len: usize, seed: u64) -> Self {
        SynthSpec {
            t_len: 2016,
            p_len,
            rank_r: 4,
            harmonics: default_harmonics(),
            anomaly_density: 0.005,
            anomaly_magnitude: None,
            noise_sigma: NoiseSigma::Scalar(1.0),
            seed,
            interval_seconds: 300,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.t_len < 2 || self.p_len < 1 {
            return Err(SynthError::BadShape { t_len: self.t_len, p_len: self.p_len });
        }
        if self.interval_seconds == 0 {
            return Err(SynthError::BadInterval);
        }
        if self.rank_r < 1 || self.rank_r > self.t_len.min(self.p_len) {
            return Err(SynthError::BadRank {
                rank_r: self.rank_r,
                t_len: self.t_len,
                p_len: self.p_len,
            });
        }
        if !(0.0..=1.0).contains(&self.anomaly_density) {
            return Err(SynthError::BadDensity(self.anomaly_density));
        }
        for (index, h) in self.harmonics.iter().enumerate() {
            if !(h.period_hours > 0.0) || !(h.amplitude >= 0.0) || !h.amplitude.is_finite() {
                return Err(SynthError::BadHarmonic { index });
            }
        }
        self.noise_sigma.resolve(self.p_len).map(|_| ())
    }
}

/// Generate an instance: the observed matrix `X = A* + E* + N*` and the
/// ground-truth triple.
pub fn generate(spec: &SynthSpec) -> Result<(TrafficMatrix, Decomposition), SynthError> {
    spec.validate()?;
    let (t_len, p_len) = (spec.t_len, spec.p_len);
    let sigma = spec.noise_sigma.resolve(p_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Time profiles: offset plus harmonics with per-factor random phases.
    let amp_sum: f64 = spec.harmonics.iter().map(|h| h.amplitude).sum();
    let base = if amp_sum > 0.0 { amp_sum } else { 1.0 };
    let window_seconds = t_len as f64 * spec.interval_seconds as f64;
    let mut profiles: Vec<DVector<f64>> = Vec::with_capacity(spec.rank_r);
    for _ in 0..spec.rank_r {
        let phases: Vec<f64> =
            spec.harmonics.iter().map(|_| uniform_in(&mut rng, 0.0, 2.0 * std::f64::consts::PI)).collect();
        let offset = base * (1.0 + unit_uniform(&mut rng));
        profiles.push(DVector::from_fn(t_len, |k, _| {
            let mut v = offset;
            for (h, &phase) in spec.harmonics.iter().zip(&phases) {
                let cycles = window_seconds / (3600.0 * h.period_hours);
                v += h.amplitude
                    * (2.0 * std::f64::consts::PI * cycles * k as f64 / t_len as f64 + phase).sin();
            }
            v
        }));
    }
    // Nonnegative flow loadings.
    let loadings: Vec<DVector<f64>> = (0..spec.rank_r)
        .map(|_| DVector::from_fn(p_len, |_, _| uniform_in(&mut rng, 0.1, 1.0)))
        .collect();
    let mut a = DMatrix::zeros(t_len, p_len);
    for (u, v) in profiles.iter().zip(&loadings) {
        a += u * v.transpose();
    }

    // Sparse spikes, predominantly positive volume surges.
    let mut e = DMatrix::zeros(t_len, p_len);
    for j in 0..p_len {
        let magnitude = spec.anomaly_magnitude.unwrap_or_else(|| {
            10.0 * if sigma[j] > 0.0 { sigma[j] } else { 1.0 }
        });
        for i in 0..t_len {
            if unit_uniform(&mut rng) < spec.anomaly_density {
                let size = magnitude * (1.0 + standard_normal(&mut rng).abs());
                let sign = if unit_uniform(&mut rng) < 0.9 { 1.0 } else { -1.0 };
                e[(i, j)] = sign * size;
            }
        }
    }

    // Per-flow white noise.
    let mut n = DMatrix::zeros(t_len, p_len);
    for j in 0..p_len {
        for i in 0..t_len {
            n[(i, j)] = sigma[j] * standard_normal(&mut rng);
        }
    }

    let x = &a + &e + &n;
    let traffic = TrafficMatrix::new(x, spec.interval_seconds, None)
        .expect("generated matrix is finite and well shaped");
    let truth = Decomposition::new(a, e, n, Diagnostics::ground_truth())
        .expect("ground-truth components share the shape");
    Ok((traffic, truth))
}
