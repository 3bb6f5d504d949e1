//! Unitary discrete Fourier analysis of per-flow time-series.
//!
//! Positions are 1-based throughout the public interface: position `t`
//! carries frequency `t − 1` cycles per window, and for a real signal the
//! spectrum at `t ∈ [2, T]` mirrors the one at the dual position `T − t + 2`.
//! The transform is unitary (`1/√T` on both directions), so Parseval holds
//! without correction factors: `Σ_t φ(t) = ‖x‖₂²`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("position {position} out of range 1..={t_len}")]
    PositionOutOfRange { position: usize, t_len: usize },
}

/// Power per DFT position of one signal (`φ`) or summed over a matrix of
/// signals (`Φ`). Entries are nonnegative; length equals the signal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub phi: Vec<f64>,
}

impl SpectralDensity {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Total power, `Σ_t φ(t)`.
    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// Reusable forward/inverse transform plan for signals of a fixed length.
///
/// Plans are immutable once built and can be shared across threads.
#[derive(Clone)]
pub struct FourierTransform {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl FourierTransform {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "transform length must be at least 1");
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Unitary forward transform of a real signal.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(x.len(), self.len);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// In-place unitary forward transform.
    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, buf: &mut [Complex<f64>]) {
        assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

impl fmt::Debug for FourierTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierTransform").field("len", &self.len).finish()
    }
}

/// Unitary DFT of a real signal: position `t` holds
/// `(1/√T) Σ_k x(k) e^{−2πi(t−1)(k−1)/T}`.
pub fn dft(x: &[f64]) -> Vec<Complex<f64>> {
    FourierTransform::new(x.len()).forward_real(x)
}

/// Unitary inverse DFT.
pub fn idft(alpha: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let plan = FourierTransform::new(alpha.len());
    let mut buf = alpha.to_vec();
    plan.inverse(&mut buf);
    buf
}

/// Explicit unitary Fourier basis matrix: entry `(k, t)` (0-based) equals
/// `(1/√T) e^{−2πi·t·k/T}`. Quadratic in `T`; intended for small sizes and
/// for the dense reference path of the noise prox.
pub fn fourier_basis(t_len: usize) -> DMatrix<Complex<f64>> {
    let scale = 1.0 / (t_len as f64).sqrt();
    DMatrix::from_fn(t_len, t_len, |k, t| {
        let angle = -2.0 * std::f64::consts::PI * (t as f64) * (k as f64) / (t_len as f64);
        Complex::from_polar(scale, angle)
    })
}

/// Spectral density of one real signal: `φ(t) = |dft(x)(t)|²`.
pub fn spectral_density(x: &[f64]) -> SpectralDensity {
    let alpha = dft(x);
    SpectralDensity {
        phi: alpha.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Aggregate spectral density of a matrix: the entry-wise sum of every
/// column's density.
pub fn aggregate_density(m: &DMatrix<f64>) -> SpectralDensity {
    let t_len = m.nrows();
    let plan = FourierTransform::new(t_len.max(1));
    let mut phi = vec![0.0; t_len];
    let columns: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    let densities = map_columns(&columns, |col| {
        let alpha = plan.forward_real(col);
        alpha.iter().map(|a| a.norm_sqr()).collect::<Vec<f64>>()
    });
    for d in &densities {
        for (acc, v) in phi.iter_mut().zip(d) {
            *acc += v;
        }
    }
    SpectralDensity { phi }
}

#[cfg(feature = "parallel")]
pub(crate) fn map_columns<T: Send + Sync, R: Send>(
    columns: &[T],
    f: impl Fn(&T) -> R + Send + Sync,
) -> Vec<R> {
    use rayon::prelude::*;
    columns.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_columns<T, R>(columns: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    columns.iter().map(f).collect()
}

/// Mirror index of a 1-based position: `1` is its own dual (DC), and
/// `t ∈ [2, T]` pairs with `T − t + 2`.
pub fn dual_position(position: usize, t_len: usize) -> usize {
    debug_assert!(position >= 1 && position <= t_len);
    if position == 1 {
        1
    } else {
        t_len - position + 2
    }
}

/// Period of the traffic pattern captured by a spectral position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    /// Position 1: the mean level, no period.
    Dc,
    Hours(f64),
}

impl Period {
    pub fn hours(&self) -> Option<f64> {
        match self {
            Period::Dc => None,
            Period::Hours(h) => Some(*h),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Dc => write!(f, "DC"),
            Period::Hours(h) => write!(f, "{h}"),
        }
    }
}

/// Period in hours associated with a 1-based spectral position.
///
/// A position and its dual describe the same physical frequency, so both map
/// to the same period: position `t ≥ 2` carries `min(t−1, T−t+1)` cycles per
/// window of `T·interval_seconds` seconds.
pub fn position_period_hours(
    position: usize,
    t_len: usize,
    interval_seconds: u32,
) -> Result<Period, SpectralError> {
    if position < 1 || position > t_len {
        return Err(SpectralError::PositionOutOfRange { position, t_len });
    }
    if position == 1 {
        return Ok(Period::Dc);
    }
    let cycles = (position - 1).min(t_len - position + 1);
    let period_samples = t_len as f64 / cycles as f64;
    Ok(Period::Hours(period_samples * interval_seconds as f64 / 3600.0))
}
