//! Decomposition of network traffic matrices into deterministic, anomaly and
//! noise components.
//!
//! A traffic matrix `X` holds `T` time samples of `P` origin–destination
//! flows, one flow per column. After per-flow noise normalization, `X` is
//! modeled as the sum of three parts:
//!
//! * `A` — deterministic traffic: low rank, dominated by diurnal periodicity;
//! * `E` — anomaly traffic: sparse, possibly large entries;
//! * `N` — noise traffic: dense, small, white per column.
//!
//! Two convex programs recover the triple. Plain SPCP penalizes the noise
//! with `γ‖N‖²_F`; SPCP-FDR replaces that with a frequency-weighted penalty
//! `γ‖C WᵀN‖²_F`, where `W` is the unitary DFT basis and `C` a diagonal
//! weight matrix that punishes low-frequency content (and the diurnal
//! harmonics especially), so that the recovered noise has a flat spectrum.
//! Both are solved by one accelerated proximal gradient loop ([`solver`]);
//! SPCP is the uniform-weight special case.
//!
//! Module map:
//!
//! * [`dataset`] — matrix types, noise-scale estimation, CSV/binary I/O;
//! * [`spectral`] — unitary DFT, spectral densities, period bookkeeping;
//! * [`weights`] — construction of the frequency-domain weight vector;
//! * [`prox`] — the three proximal operators (SVT, soft threshold, noise);
//! * [`solver`] — the APG outer loop with momentum and μ-continuation;
//! * [`synthgen`] — seeded synthetic instances with known ground truth;
//! * [`metrics`] — rank, correlation and spectral-flatness evaluation.

pub mod dataset;
pub mod metrics;
pub mod prox;
mod rng;
pub mod solver;
pub mod spectral;
pub mod synthgen;
pub mod weights;

pub use dataset::{
    denormalize, estimate_noise_scales, load_matrix, normalize, save_decomposition, save_matrix,
    Decomposition, Diagnostics, MatrixFormat, NoiseScales, TrafficMatrix,
};
pub use metrics::{compare_reports, evaluate, ComparisonSummary, EvalReport};
pub use solver::{solve, SolverConfig};
pub use spectral::SpectralDensity;
pub use synthgen::{generate, SynthSpec};
pub use weights::{build_weights, uniform_weights, WeightSpec, WeightVector};
