//! Proximal operators for the three solver blocks: singular-value
//! thresholding for the low-rank part, entry-wise soft thresholding for the
//! sparse part, and a per-frequency shrink for the noise part.
//!
//! The noise subproblem
//! `min_N (L_f/2)‖N−G‖²_F + μγ‖C WᵀN‖²_F`
//! has the closed form `N = L_f[L_f I + 2μγ W C² Wᵀ]⁻¹ G`. Because the
//! unitary transform diagonalizes the penalty and the weights are
//! mirror-symmetric, that inverse is never formed at production scale: the
//! solve reduces to scaling each spectral coefficient by
//! `L_f/(L_f + 2μγ c_t²)`, one FFT per flow ([`noise_prox_fft`]). The dense
//! path ([`noise_prox_dense`]) performs the literal linear solve and is kept
//! as a reference for small sizes.

use crate::spectral::{fourier_basis, map_columns, FourierTransform};
use crate::weights::WeightVector;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("svt input has a non-finite entry")]
    NonFiniteInput,
    #[error("noise prox requires mirror-symmetric weights (violation {0:.3e})")]
    AsymmetricWeights(f64),
    #[error("imaginary residue {residue:.3e} exceeds {tolerance:.3e} in column {column}")]
    ImaginaryResidue { column: usize, residue: f64, tolerance: f64 },
    #[error("weight vector has length {weights}, expected {t_len}")]
    WeightLength { weights: usize, t_len: usize },
}

/// Shared parameters of one prox evaluation.
#[derive(Debug, Clone)]
pub struct ProxContext<'a> {
    /// Lipschitz constant of the coupling term; 3 for the three-block split.
    pub l_f: f64,
    /// Current smoothing parameter μ_k.
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub weights: &'a WeightVector,
}

/// Entry-wise soft threshold `sign(m)·max(|m| − eps, 0)`, the proximal
/// operator of `eps‖·‖₁`.
pub fn soft_threshold(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    debug_assert!(eps >= 0.0);
    m.map(|v| {
        let shrunk = v.abs() - eps;
        if shrunk > 0.0 {
            v.signum() * shrunk
        } else {
            0.0
        }
    })
}

/// Result of singular-value thresholding.
#[derive(Debug, Clone)]
pub struct SvtOutcome {
    pub matrix: DMatrix<f64>,
    /// Number of singular values strictly above the threshold; the rest are
    /// exact zeros in `singular_values`.
    pub rank: usize,
    /// Thresholded singular values, descending. Their sum is the nuclear
    /// norm of `matrix`.
    pub singular_values: DVector<f64>,
}

/// Singular-value thresholding: soft-threshold the spectrum of `m`, the
/// proximal operator of `eps‖·‖_*`.
pub fn svt(m: &DMatrix<f64>, eps: f64) -> Result<SvtOutcome, ProxError> {
    debug_assert!(eps >= 0.0);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ProxError::NonFiniteInput);
    }
    let svd = m.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(ProxError::SvdFailed)?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut rank = 0;
    let thresholded = svd.singular_values.map(|s| {
        if s > eps {
            rank += 1;
            s - eps
        } else {
            0.0
        }
    });
    let matrix = u * DMatrix::from_diagonal(&thresholded) * v_t;
    Ok(SvtOutcome { matrix, rank, singular_values: thresholded })
}

/// Fast noise prox: per-flow unitary transform, per-position shrink by
/// `L_f/(L_f + 2μγ c_t²)`, inverse transform. Requires mirror-symmetric
/// weights so that the result of the inverse transform is real; the
/// imaginary residue is asserted below `1e-8·‖G_j‖₂` before it is dropped.
pub fn noise_prox_fft(g: &DMatrix<f64>, ctx: &ProxContext<'_>) -> DMatrix<f64> {
    let plan = FourierTransform::new(g.nrows().max(1));
    noise_prox_fft_with(&plan, g, ctx)
}

/// [`noise_prox_fft`] with a caller-owned transform plan, for reuse across
/// solver iterations.
pub fn noise_prox_fft_with(
    plan: &FourierTransform,
    g: &DMatrix<f64>,
    ctx: &ProxContext<'_>,
) -> DMatrix<f64> {
    let t_len = g.nrows();
    assert_eq!(
        ctx.weights.len(),
        t_len,
        "weight vector length {} does not match signal length {t_len}",
        ctx.weights.len()
    );
    let factors: Vec<f64> = ctx
        .weights
        .c
        .iter()
        .map(|&c| ctx.l_f / (ctx.l_f + 2.0 * ctx.mu * ctx.gamma * c * c))
        .collect();
    let columns: Vec<Vec<f64>> = g.column_iter().map(|c| c.iter().copied().collect()).collect();
    let shrunk = map_columns(&columns, |col| {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut buf: Vec<Complex<f64>> = col.iter().map(|&v| Complex::new(v, 0.0)).collect();
        plan.forward(&mut buf);
        for (v, &f) in buf.iter_mut().zip(&factors) {
            *v *= f;
        }
        plan.inverse(&mut buf);
        let residue = buf.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(
            residue <= 1e-8 * norm.max(f64::MIN_POSITIVE),
            "imaginary residue {residue} on a column of norm {norm}"
        );
        buf.iter().map(|v| v.re).collect::<Vec<f64>>()
    });
    let mut out = DMatrix::zeros(t_len, g.ncols());
    for (j, col) in shrunk.iter().enumerate() {
        out.column_mut(j).copy_from_slice(col);
    }
    out
}

/// Reference noise prox: materialize `L_f I + 2μγ W C² Wᵀ` and solve it
/// directly. Cubic in `T`; intended for small instances and as the oracle
/// the fast path is checked against.
pub fn noise_prox_dense(g: &DMatrix<f64>, ctx: &ProxContext<'_>) -> Result<DMatrix<f64>, ProxError> {
    let t_len = g.nrows();
    if ctx.weights.len() != t_len {
        return Err(ProxError::WeightLength { weights: ctx.weights.len(), t_len });
    }
    let violation = ctx.weights.symmetry_violation();
    let scale = ctx.weights.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if violation > 1e-9 * scale.max(1.0) {
        return Err(ProxError::AsymmetricWeights(violation));
    }
    // The quadratic's gradient operator in the unitary convention: inverse
    // transform · C² · forward transform (Hermitian, real for symmetric
    // weights). Reading the transposes literally on the symmetric basis
    // matrix would yield a flipped operator that is not even the identity
    // for unit weights.
    let w = fourier_basis(t_len);
    let c_sq = DMatrix::from_diagonal(&DVector::from_iterator(
        t_len,
        ctx.weights.c.iter().map(|&c| Complex::new(c * c, 0.0)),
    ));
    let mut system = w.adjoint() * c_sq * &w * Complex::new(2.0 * ctx.mu * ctx.gamma, 0.0);
    for i in 0..t_len {
        system[(i, i)] += Complex::new(ctx.l_f, 0.0);
    }
    let rhs = g.map(|v| Complex::new(ctx.l_f * v, 0.0));
    let solution = system.lu().solve(&rhs).ok_or(ProxError::SvdFailed)?;
    let mut out = DMatrix::zeros(t_len, g.ncols());
    for j in 0..g.ncols() {
        let norm = g.column(j).norm();
        let tolerance = 1e-9 * norm.max(f64::MIN_POSITIVE);
        let residue = solution.column(j).iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if residue > tolerance {
            return Err(ProxError::ImaginaryResidue { column: j + 1, residue, tolerance });
        }
        for i in 0..t_len {
            out[(i, j)] = solution[(i, j)].re;
        }
    }
    Ok(out)
}
