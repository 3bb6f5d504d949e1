//! Frequency-domain weight vectors: the diagonal of the matrix `C` that the
//! SPCP-FDR noise penalty `γ‖C WᵀN‖²_F` applies per spectral position.
//!
//! The profile punishes low frequencies, with an extra bump `ρ` on the
//! positions whose periods divide 24 hours (set `S₁`, both halves of the
//! spectrum). A scaling `β` normalizes the vector so that `Σ_t c_t² = T`,
//! which keeps the penalty calibrated against the plain Frobenius one for
//! white noise. Uniform weights (`c ≡ 1`) reduce SPCP-FDR to SPCP exactly.

use crate::spectral::dual_position;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weight length must be at least 1")]
    EmptyLength,
    #[error("penalized position {position} outside [2, {max}] for T={t_len}")]
    PositionOutOfRange { position: usize, max: usize, t_len: usize },
    #[error("parameter {name} must be positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("amplitude must be nonnegative (got {0})")]
    NegativeAmplitude(f64),
    #[error("evaluation point {x} outside [1, {t_len}]")]
    PointOutOfDomain { x: f64, t_len: usize },
    #[error(
        "period {period_hours} h maps to {cycles} cycles per window, \
         not within {tolerance} of an integer position"
    )]
    PeriodNotAligned { period_hours: f64, cycles: f64, tolerance: f64 },
}

/// Positions penalized by default for week-long windows of 5-minute samples:
/// the 24, 12, 6, 3, 1.5 and 1 hour harmonics.
pub const DEFAULT_S1A: [usize; 6] = [8, 15, 29, 57, 113, 169];

/// Recipe for a weight vector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightSpec {
    pub t_len: usize,
    /// Extra-penalized positions, given in the lower half `[2, ⌊T/2⌋+1]`;
    /// dual positions are added automatically.
    pub s1a: BTreeSet<usize>,
    /// Additional penalty added to the profile on `S₁` positions.
    pub rho: f64,
    /// e-folding length of the low-frequency decay, in positions.
    pub decay_scale: f64,
    /// Height of the decaying term at position 1.
    pub amplitude: f64,
    /// Floor of the profile far from DC.
    pub offset: f64,
}

impl WeightSpec {
    /// Default parameters for a window of `t_len` samples. The harmonic set
    /// is populated only for `t_len = 2016` (a week of 5-minute samples);
    /// for other lengths use [`position_for_period_hours`] to fill `s1a`.
    pub fn default_for(t_len: usize) -> Self {
        let s1a = if t_len == 2016 {
            DEFAULT_S1A.iter().copied().collect()
        } else {
            BTreeSet::new()
        };
        WeightSpec {
            t_len,
            s1a,
            rho: 2.0,
            decay_scale: 200.0,
            amplitude: 4.0,
            offset: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        if self.t_len < 1 {
            return Err(WeightsError::EmptyLength);
        }
        let max = self.t_len / 2 + 1;
        for &pos in &self.s1a {
            if pos < 2 || pos > max {
                return Err(WeightsError::PositionOutOfRange { position: pos, max, t_len: self.t_len });
            }
        }
        for (name, value) in [
            ("rho", self.rho),
            ("decay_scale", self.decay_scale),
            ("offset", self.offset),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(WeightsError::NonPositiveParameter { name, value });
            }
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(WeightsError::NegativeAmplitude(self.amplitude));
        }
        Ok(())
    }

    /// The full penalized set `S₁`: the given positions plus their duals.
    pub fn s1(&self) -> BTreeSet<usize> {
        let mut set = self.s1a.clone();
        for &pos in &self.s1a {
            set.insert(dual_position(pos, self.t_len));
        }
        set
    }
}

/// The diagonal of `C`, normalized so `Σ_t c_t² = T`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightVector {
    pub c: Vec<f64>,
    /// Scaling applied to the raw profile to meet the normalization.
    pub beta: f64,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn sum_sq(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum()
    }

    /// Largest deviation from the mirror symmetry `c_t = c_{T−t+2}`.
    pub fn symmetry_violation(&self) -> f64 {
        let t_len = self.c.len();
        (2..=t_len)
            .map(|t| (self.c[t - 1] - self.c[dual_position(t, t_len) - 1]).abs())
            .fold(0.0, f64::max)
    }
}

/// The base profile: a decaying exponential of the distance to the nearest
/// end of the spectrum, mirror-symmetric about the Nyquist position and
/// monotone nonincreasing on the lower half.
pub fn v(x: f64, spec: &WeightSpec) -> Result<f64, WeightsError> {
    if !(1.0..=spec.t_len as f64).contains(&x) {
        return Err(WeightsError::PointOutOfDomain { x, t_len: spec.t_len });
    }
    let t = spec.t_len as f64;
    let arg = if x < t / 2.0 + 1.0 { x - 1.0 } else { t - x + 1.0 };
    Ok(spec.amplitude * (-arg / spec.decay_scale).exp() + spec.offset)
}

/// Build the weight vector for a spec: raw profile `v(t) + ρ·1[t ∈ S₁]`,
/// scaled by the `β` that enforces `Σ c_t² = T`.
pub fn build_weights(spec: &WeightSpec) -> Result<WeightVector, WeightsError> {
    spec.validate()?;
    let s1 = spec.s1();
    let mut raw = Vec::with_capacity(spec.t_len);
    for t in 1..=spec.t_len {
        let mut w = v(t as f64, spec)?;
        if s1.contains(&t) {
            w += spec.rho;
        }
        raw.push(w);
    }
    let sum_sq: f64 = raw.iter().map(|w| w * w).sum();
    let beta = (spec.t_len as f64 / sum_sq).sqrt();
    Ok(WeightVector {
        c: raw.into_iter().map(|w| beta * w).collect(),
        beta,
    })
}

/// Uniform weights `c ≡ 1`, which turn the frequency-domain penalty into the
/// plain Frobenius one (the transform is unitary), i.e. plain SPCP.
pub fn uniform_weights(t_len: usize) -> WeightVector {
    WeightVector { c: vec![1.0; t_len], beta: 1.0 }
}

/// Map a period in hours to its 1-based spectral position, for filling the
/// penalized set on window lengths other than the default. The period must
/// land on an integer cycle count within `tolerance` positions.
pub fn position_for_period_hours(
    t_len: usize,
    interval_seconds: u32,
    period_hours: f64,
    tolerance: f64,
) -> Result<usize, WeightsError> {
    if !(period_hours > 0.0) {
        return Err(WeightsError::NonPositiveParameter { name: "period_hours", value: period_hours });
    }
    let cycles = t_len as f64 * interval_seconds as f64 / (3600.0 * period_hours);
    let rounded = cycles.round();
    if (cycles - rounded).abs() > tolerance || rounded < 1.0 {
        return Err(WeightsError::PeriodNotAligned { period_hours, cycles, tolerance });
    }
    let position = rounded as usize + 1;
    let max = t_len / 2 + 1;
    if position > max {
        return Err(WeightsError::PositionOutOfRange { position, max, t_len });
    }
    Ok(position)
}

/// Default alignment tolerance for [`position_for_period_hours`], in
/// fractional positions.
pub const PERIOD_ALIGNMENT_TOLERANCE: f64 = 0.01;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profile_at_origin() {
        let spec = WeightSpec::default_for(2016);
        assert_relative_eq!(v(1.0, &spec).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn profile_at_201() {
        // 4·e^{−1} + 1, one decay length from the origin.
        let spec = WeightSpec::default_for(2016);
        assert_relative_eq!(v(201.0, &spec).unwrap(), 2.471517764685769, epsilon = 1e-12);
    }

    #[test]
    fn profile_is_mirror_symmetric() {
        let spec = WeightSpec::default_for(2016);
        for t in [2usize, 9, 57, 300, 1008, 1009, 1010, 1500, 2016] {
            let here = v(t as f64, &spec).unwrap();
            let dual = v((2016 - t + 2) as f64, &spec).unwrap();
            assert_relative_eq!(here, dual, epsilon = 1e-15);
        }
    }

    #[test]
    fn profile_rejects_out_of_domain() {
        let spec = WeightSpec::default_for(16);
        assert!(v(0.5, &spec).is_err());
        assert!(v(16.5, &spec).is_err());
    }

    #[test]
    fn default_week_scaling_constant() {
        let w = build_weights(&WeightSpec::default_for(2016)).unwrap();
        // Direct high-precision summation of the profile gives
        // β = 0.48315726737724357; the published rounding is 0.4832.
        assert_relative_eq!(w.beta, 0.483_157_267_377_243_57, max_relative = 1e-12);
        assert!((w.beta - 0.4832).abs() < 5e-5);
        assert_relative_eq!(w.sum_sq(), 2016.0, max_relative = 1e-9);
    }

    #[test]
    fn normalization_and_symmetry_hold_across_specs() {
        for (t_len, s1a, rho, scale, amp, offset) in [
            (16usize, vec![2usize, 5], 1.0, 3.0, 2.0, 0.5),
            (17, vec![3, 9], 0.7, 10.0, 1.0, 1.0),
            (63, vec![], 2.0, 20.0, 4.0, 1.0),
            (64, vec![8, 33], 2.0, 20.0, 4.0, 1.0),
            (2016, DEFAULT_S1A.to_vec(), 2.0, 200.0, 4.0, 1.0),
        ] {
            let spec = WeightSpec {
                t_len,
                s1a: s1a.into_iter().collect(),
                rho,
                decay_scale: scale,
                amplitude: amp,
                offset,
            };
            let w = build_weights(&spec).unwrap();
            assert_relative_eq!(w.sum_sq(), t_len as f64, max_relative = 1e-9);
            assert!(w.c.iter().all(|&v| v > 0.0));
            assert!(w.symmetry_violation() < 1e-12, "T={t_len}");
            // Independent accumulation of the unscaled profile, summed in
            // reverse order.
            let s1 = spec.s1();
            let mut sum_sq = 0.0;
            for t in (1..=t_len).rev() {
                let mut raw = v(t as f64, &spec).unwrap();
                if s1.contains(&t) {
                    raw += rho;
                }
                sum_sq += raw * raw;
            }
            assert_relative_eq!(w.beta, (t_len as f64 / sum_sq).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn flat_profile_yields_unit_weights() {
        let spec = WeightSpec {
            t_len: 37,
            s1a: BTreeSet::new(),
            rho: 2.0,
            decay_scale: 200.0,
            amplitude: 0.0,
            offset: 1.0,
        };
        let w = build_weights(&spec).unwrap();
        assert_relative_eq!(w.beta, 1.0, epsilon = 1e-12);
        for c in &w.c {
            assert_relative_eq!(*c, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn penalized_positions_exceed_neighbors() {
        let spec = WeightSpec::default_for(2016);
        let w = build_weights(&spec).unwrap();
        for &t in DEFAULT_S1A.iter() {
            assert!(w.c[t - 1] > w.c[t - 2], "position {t} vs left neighbor");
            assert!(w.c[t - 1] > w.c[t], "position {t} vs right neighbor");
            let dual = dual_position(t, 2016);
            assert!(w.c[dual - 1] > w.c[dual - 2]);
            assert!(w.c[dual - 1] > w.c[dual]);
        }
    }

    #[test]
    fn empty_s1a_gives_monotone_symmetric_profile() {
        let spec = WeightSpec { s1a: BTreeSet::new(), ..WeightSpec::default_for(100) };
        let w = build_weights(&spec).unwrap();
        for t in 1..(100 / 2 + 1) {
            assert!(w.c[t - 1] >= w.c[t], "profile rises at {t}");
        }
        assert!(w.symmetry_violation() < 1e-12);
    }

    #[test]
    fn uniform_weights_are_exactly_one() {
        let w = uniform_weights(4);
        assert_eq!(w.c, vec![1.0; 4]);
        assert_eq!(w.sum_sq(), 4.0);
        assert_eq!(w.beta, 1.0);
    }

    #[test]
    fn spec_rejects_bad_positions() {
        let mut spec = WeightSpec::default_for(64);
        spec.s1a.insert(1);
        assert!(build_weights(&spec).is_err());
        let mut spec = WeightSpec::default_for(64);
        spec.s1a.insert(34); // beyond ⌊64/2⌋+1 = 33
        assert!(build_weights(&spec).is_err());
        let spec = WeightSpec { rho: 0.0, ..WeightSpec::default_for(2016) };
        assert!(build_weights(&spec).is_err());
    }

    #[test]
    fn odd_length_midpoint_is_well_defined() {
        let spec = WeightSpec { s1a: [3usize].into_iter().collect(), ..WeightSpec::default_for(17) };
        let w = build_weights(&spec).unwrap();
        assert_relative_eq!(w.sum_sq(), 17.0, max_relative = 1e-9);
        assert!(w.symmetry_violation() < 1e-12);
    }

    #[test]
    fn period_positions_for_week_window() {
        for (hours, pos) in [(24.0, 8usize), (12.0, 15), (6.0, 29), (3.0, 57), (1.5, 113), (1.0, 169)] {
            let got =
                position_for_period_hours(2016, 300, hours, PERIOD_ALIGNMENT_TOLERANCE).unwrap();
            assert_eq!(got, pos, "{hours} h");
        }
    }

    #[test]
    fn misaligned_period_is_rejected() {
        // 5 h over a week of 5-minute samples: 33.6 cycles, not integral.
        let err = position_for_period_hours(2016, 300, 5.0, PERIOD_ALIGNMENT_TOLERANCE);
        assert!(matches!(err, Err(WeightsError::PeriodNotAligned { .. })));
    }
}
