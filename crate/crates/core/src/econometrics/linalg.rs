//! Small dense least-squares helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as collinear with
/// the columns before it.
pub const COLLINEARITY_TOL: f64 = 1e-9;

/// Names of columns that are (numerically) linear combinations of the
/// columns to their left, found by modified Gram–Schmidt.
pub fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (c, name) in names.iter().enumerate().take(x.ncols()) {
        let mut v = x.column(c).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= COLLINEARITY_TOL * norm0 {
            bad.push(name.clone());
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

pub fn ensure_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let bad = collinear_columns(x, names);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(bad))
    }
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))
}

/// Least squares `y ~ X` with `(X'X)^{-1}`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn rss(&self) -> f64 {
        self.resid.norm_squared()
    }
}

/// Solved through a thin QR factorization of `X` so the conditioning of
/// `X` is not squared; `(X'X)^{-1} = R^{-1} R^{-T}` comes from the same factor.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (q, r_inv) = thin_qr(x)?;
    let coef = &r_inv * (q.transpose() * y);
    let resid = y - x * &coef;
    Ok(LeastSquares {
        coef,
        resid,
        xtx_inv: &r_inv * r_inv.transpose(),
    })
}

/// `Q` and `R^{-1}` of the thin QR factorization.
fn thin_qr(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x.nrows() < x.ncols() {
        return Err(Error::numerical("more columns than rows"));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= COLLINEARITY_TOL * scale) {
        return Err(Error::numerical("matrix is numerically rank deficient"));
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(x.ncols(), x.ncols()))
        .ok_or_else(|| Error::numerical("triangular factor is singular"))?;
    Ok((qr.q(), r_inv))
}

/// Two-stage least squares of `y` on `z` with instrument matrix `h`.
#[derive(Debug, Clone)]
pub struct TwoStage {
    pub coef: DVector<f64>,
    /// `y - Z δ`
    pub resid: DVector<f64>,
    /// First-stage fitted regressors `P_H Z`.
    pub z_hat: DMatrix<f64>,
    /// `(Ẑ'Ẑ)^{-1}`
    pub zhzh_inv: DMatrix<f64>,
}

pub fn two_stage(z: &DMatrix<f64>, h: &DMatrix<f64>, y: &DVector<f64>) -> Result<TwoStage> {
    let (qh, _) = thin_qr(h)?;
    let z_hat = &qh * (qh.transpose() * z);
    // Ẑ'Z = Ẑ'Ẑ because P_H is idempotent, so 2SLS is least squares on Ẑ
    let (qz, r_inv) = thin_qr(&z_hat)?;
    let coef = &r_inv * (qz.transpose() * y);
    let resid = y - z * &coef;
    Ok(TwoStage {
        coef,
        resid,
        z_hat,
        zhzh_inv: &r_inv * r_inv.transpose(),
    })
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn column_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Squared Pearson correlation.
pub fn squared_correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return if saa == 0.0 && sbb == 0.0 { 1.0 } else { 0.0 };
    }
    sab * sab / (saa * sbb)
}
