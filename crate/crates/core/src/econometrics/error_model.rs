//! Spatial error model `y = Xβ + u`, `u = λWu + ε`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use super::linalg::{ensure_full_rank, least_squares, squared_correlation, LeastSquares};
use super::logdet::LogDet;
use super::ols::formula_of;
use super::optimize::{grid_golden_max, GOLDEN_TOL, PARAM_BOUND};
use super::spatial::{invert_information, lag_vec, logdet_slope, polish, traces, LN_2PI};
use super::{check_pin, check_weights, coefficients, Design, Estimator, Inference, ModelFit, Pins, R2Kind, SpatialParameter};
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

/// Regression on spatially filtered data: `(y − λWy)` on `(X − λWX)`.
pub(super) fn filtered_ls(
    y: &DVector<f64>,
    wy: &DVector<f64>,
    x: &DMatrix<f64>,
    wx: &DMatrix<f64>,
    lambda: f64,
) -> Result<LeastSquares> {
    least_squares(&(x - wx * lambda), &(y - wy * lambda))
}

/// Kelejian–Prucha moment estimate of the error autoregression.
#[derive(Debug, Clone)]
pub struct KpEstimate {
    pub lambda: f64,
    pub sigma2: f64,
    /// Negated moment criterion at each seed-grid point.
    pub trace: Vec<(f64, f64)>,
}

/// Three moment conditions on residuals `u`, solved by nonlinear least
/// squares in `(λ, σ²)` with `σ²` concentrated out.
pub fn kelejian_prucha(u: &DVector<f64>, w: &SpatialWeights) -> Result<KpEstimate> {
    let n = u.len() as f64;
    let ub = lag_vec(w, u);
    let ubb = lag_vec(w, &ub);
    let tr_wtw: f64 = w.neighbors.iter().flatten().map(|&(_, v)| v * v).sum();
    let g0 = Vector3::new(2.0 * u.dot(&ub), 2.0 * ubb.dot(&ub), u.dot(&ubb) + ub.dot(&ub)) / n;
    let g1 = -Vector3::new(ub.dot(&ub), ubb.dot(&ubb), ub.dot(&ubb)) / n;
    let g2 = Vector3::new(1.0, tr_wtw / n, 0.0);
    let g = Vector3::new(u.dot(u), ub.dot(&ub), u.dot(&ub)) / n;
    let g2n = g2.norm_squared();
    let projected = |lambda: f64| {
        let c = g - g0 * lambda - g1 * lambda * lambda;
        let s2 = c.dot(&g2) / g2n;
        (c - g2 * s2, s2)
    };
    let objective = |lambda: f64| Ok(-projected(lambda).0.norm_squared());
    let m = grid_golden_max(objective, PARAM_BOUND, GOLDEN_TOL).map_err(|e| match e {
        Error::Numerical { trace, .. } => Error::Numerical {
            message: "moment conditions have no solution inside (-1, 1)".into(),
            trace,
        },
        other => other,
    })?;
    let slope = |lambda: f64| {
        let (pc, _) = projected(lambda);
        Ok(2.0 * pc.dot(&(-g0 - g1 * (2.0 * lambda))))
    };
    let lambda = polish(m.x, slope)?;
    Ok(KpEstimate {
        lambda,
        sigma2: projected(lambda).1,
        trace: m.trace,
    })
}

struct SemProfile {
    n: f64,
    y: DVector<f64>,
    wy: DVector<f64>,
    x: DMatrix<f64>,
    wx: DMatrix<f64>,
    logdet: LogDet,
}

impl SemProfile {
    fn fit(&self, lambda: f64) -> Result<LeastSquares> {
        filtered_ls(&self.y, &self.wy, &self.x, &self.wx, lambda)
    }

    fn loglik(&self, lambda: f64) -> Result<f64> {
        let s2 = self.fit(lambda)?.rss() / self.n;
        Ok(-0.5 * self.n * (LN_2PI + 1.0 + s2.ln()) + self.logdet.eval(lambda)?)
    }

    fn score(&self, lambda: f64) -> Result<f64> {
        let ls = self.fit(lambda)?;
        // W(y − Xβ); β is profiled out so only the direct term remains
        let wu = &self.wy - &self.wx * &ls.coef;
        Ok(self.n * ls.resid.dot(&wu) / ls.rss() + logdet_slope(&self.logdet, lambda)?)
    }
}

fn error_metrics(design: &Design, beta: &DVector<f64>) -> (f64, f64) {
    let fitted = &design.x * beta;
    let mse = (&design.y - &fitted).norm_squared() / design.n() as f64;
    (mse, squared_correlation(&design.y, &fitted))
}

/// Maximum-likelihood spatial error model.
pub fn fit_sem_ml(design: &Design, w: &SpatialWeights, pins: Pins) -> Result<ModelFit> {
    check_weights(design, w)?;
    ensure_full_rank(&design.x, &design.names)?;
    let profile = SemProfile {
        n: design.n() as f64,
        y: design.y.clone(),
        wy: lag_vec(w, &design.y),
        x: design.x.clone(),
        wx: w.lag_matrix(&design.x),
        logdet: LogDet::new(w),
    };
    let (lambda, pinned) = match pins.lambda {
        Some(l) => (check_pin(l)?, true),
        None => {
            let m = grid_golden_max(|l| profile.loglik(l), PARAM_BOUND, GOLDEN_TOL)?;
            (polish(m.x, |l| profile.score(l))?, false)
        }
    };
    let n = design.n();
    let p = design.x.ncols();
    let ls = profile.fit(lambda)?;
    let sigma2 = ls.rss() / n as f64;
    let mut warnings = Vec::new();
    let lambda_se = if pinned {
        None
    } else {
        let t = traces(w, lambda, &profile.logdet)?;
        if t.approximated {
            warnings.push("tr(V'V) approximated by tr(V^2) for large n".to_string());
        }
        let info = DMatrix::from_row_slice(
            2,
            2,
            &[
                t.tr_sq + t.tr_tv,
                t.tr / sigma2,
                t.tr / sigma2,
                n as f64 / (2.0 * sigma2 * sigma2),
            ],
        );
        Some(invert_information(&info)?[(0, 0)].max(0.0).sqrt())
    };
    let (mse, r2) = error_metrics(design, &ls.coef);
    Ok(ModelFit {
        estimator: Estimator::SemMl,
        formula: formula_of(design),
        n,
        k_params: p + 1,
        coefficients: coefficients(&design.names, &ls.coef, &(&ls.xtx_inv * sigma2), Inference::Normal),
        gamma: None,
        lambda: Some(SpatialParameter::new(lambda, lambda_se)),
        sigma2,
        mse,
        r2,
        r2_kind: R2Kind::Pseudo,
        loglik: Some(profile.loglik(lambda)?),
        inference: Inference::Normal,
        group_effects: BTreeMap::new(),
        weights: Some(w.scheme.to_string()),
        panel_fingerprint: design.fingerprint.clone(),
        warnings,
    })
}

/// Moment-based spatial error model: Kelejian–Prucha `λ` from OLS
/// residuals, then feasible GLS on the filtered data.
pub fn fit_sem_gmm(design: &Design, w: &SpatialWeights, pins: Pins) -> Result<ModelFit> {
    check_weights(design, w)?;
    ensure_full_rank(&design.x, &design.names)?;
    let lambda = match pins.lambda {
        Some(l) => check_pin(l)?,
        None => {
            let ols = least_squares(&design.x, &design.y)?;
            kelejian_prucha(&ols.resid, w)?.lambda
        }
    };
    let n = design.n();
    let p = design.x.ncols();
    let wy = lag_vec(w, &design.y);
    let wx = w.lag_matrix(&design.x);
    let ls = filtered_ls(&design.y, &wy, &design.x, &wx, lambda)?;
    let sigma2 = ls.rss() / n as f64;
    let (mse, r2) = error_metrics(design, &ls.coef);
    Ok(ModelFit {
        estimator: Estimator::SemGmm,
        formula: formula_of(design),
        n,
        k_params: p + 1,
        coefficients: coefficients(&design.names, &ls.coef, &(&ls.xtx_inv * sigma2), Inference::Normal),
        gamma: None,
        lambda: Some(SpatialParameter::new(lambda, None)),
        sigma2,
        mse,
        r2,
        r2_kind: R2Kind::Pseudo,
        loglik: None,
        inference: Inference::Normal,
        group_effects: BTreeMap::new(),
        weights: Some(w.scheme.to_string()),
        panel_fingerprint: design.fingerprint.clone(),
        warnings: Vec::new(),
    })
}
