//! Shared pieces of the spatial estimators.

use nalgebra::{DMatrix, DVector};

use super::logdet::{LogDet, EIGEN_MAX_N};
use super::optimize::{bracketed_root, PARAM_BOUND};
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

/// Stopping rule for the fixed-point solve of `(I − ρW) z = b`.
const SOLVE_TOL: f64 = 1e-14;
/// Root tolerance when polishing an optimum through its score.
pub(super) const SCORE_TOL: f64 = 1e-12;
/// Half-width of the window searched for a score root around a
/// golden-section optimum.
const POLISH_WINDOW: f64 = 0.01;

pub(super) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(super) fn lag_vec(w: &SpatialWeights, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(w.lag(v.as_slice()))
}

/// Solves `(I − ρW) z = b` by fixed-point iteration `z ← b + ρWz`, which
/// contracts at rate `|ρ|` for row-standardized `W`.
pub(crate) fn solve_ar(w: &SpatialWeights, rho: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    if rho == 0.0 {
        return Ok(b.clone());
    }
    let mut z = b.clone();
    for _ in 0..200_000 {
        let next = b + lag_vec(w, &z) * rho;
        let delta = (&next - &z).amax();
        z = next;
        if delta <= SOLVE_TOL * z.amax().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::numerical(format!("solving (I - {rho}W) z = b did not converge")))
}

/// `tr(V)`, `tr(V²)` and `tr(V'V)` for `V = W (I − ρW)^{-1}`.
pub(super) struct Traces {
    pub tr: f64,
    pub tr_sq: f64,
    pub tr_tv: f64,
    /// `tr(V'V)` was approximated by `tr(V²)` (exact for symmetric `W`).
    pub approximated: bool,
}

pub(super) fn traces(w: &SpatialWeights, rho: f64, logdet: &LogDet) -> Result<Traces> {
    if w.n <= EIGEN_MAX_N {
        let dense = w.to_dense();
        let a = DMatrix::identity(w.n, w.n) - &dense * rho;
        let a_inv = a
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::numerical(format!("I - {rho}W is singular")))?;
        let v = dense * a_inv;
        let tr = v.trace();
        let tr_sq = v.component_mul(&v.transpose()).sum();
        let tr_tv = v.norm_squared();
        return Ok(Traces {
            tr,
            tr_sq,
            tr_tv,
            approximated: false,
        });
    }
    let tr = -logdet_slope(logdet, rho)?;
    // tr(V²) = d tr(V)/dρ
    let h = 1e-4;
    let tr_sq = (logdet_slope(logdet, rho - h)? - logdet_slope(logdet, rho + h)?) / (2.0 * h);
    Ok(Traces {
        tr,
        tr_sq,
        tr_tv: tr_sq,
        approximated: true,
    })
}

/// `d/dρ ln|I − ρW|`, analytic on the eigenvalue route and a central
/// difference otherwise.
pub(super) fn logdet_slope(logdet: &LogDet, rho: f64) -> Result<f64> {
    if let Some(d) = logdet.derivative(rho) {
        return Ok(d);
    }
    let h = 1e-5;
    Ok((logdet.eval(rho + h)? - logdet.eval(rho - h)?) / (2.0 * h))
}

/// Refines a golden-section optimum `x` by finding a root of `score` in a
/// small window around it; keeps `x` when no sign change is found.
pub(super) fn polish(x: f64, score: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let lo = (x - POLISH_WINDOW).max(-PARAM_BOUND);
    let hi = (x + POLISH_WINDOW).min(PARAM_BOUND);
    Ok(bracketed_root(score, lo, hi, SCORE_TOL)?.unwrap_or(x))
}

/// Inverse of an information matrix; symmetric positive definite in theory,
/// so fall back to a general inverse when Cholesky fails on rounding.
pub(super) fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    super::linalg::spd_inverse(info).or_else(|_| {
        info.clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("information matrix is singular"))
    })
}
