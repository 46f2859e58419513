//! Spatial lag model `y = γWy + Xβ + ε`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::linalg::{collinear_columns, column_matrix, ensure_full_rank, hstack, least_squares, squared_correlation, two_stage};
use super::logdet::LogDet;
use super::ols::formula_of;
use super::optimize::{grid_golden_max, GOLDEN_TOL, PARAM_BOUND};
use super::spatial::{invert_information, lag_vec, logdet_slope, polish, solve_ar, traces, LN_2PI};
use super::{check_pin, check_weights, coefficients, Design, Estimator, Inference, ModelFit, Pins, R2Kind, SpatialParameter};
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

/// Concentrated log-likelihood of the lag model as a function of `γ`.
pub struct SlmProfile {
    n: f64,
    e0: DVector<f64>,
    el: DVector<f64>,
    b0: DVector<f64>,
    bl: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    logdet: LogDet,
}

impl SlmProfile {
    pub fn new(design: &Design, w: &SpatialWeights) -> Result<Self> {
        check_weights(design, w)?;
        ensure_full_rank(&design.x, &design.names)?;
        let wy = lag_vec(w, &design.y);
        let ls0 = least_squares(&design.x, &design.y)?;
        let lsl = least_squares(&design.x, &wy)?;
        Ok(Self {
            n: design.n() as f64,
            e0: ls0.resid,
            el: lsl.resid,
            b0: ls0.coef,
            bl: lsl.coef,
            xtx_inv: ls0.xtx_inv,
            logdet: LogDet::new(w),
        })
    }

    fn resid(&self, gamma: f64) -> DVector<f64> {
        &self.e0 - &self.el * gamma
    }

    pub fn loglik(&self, gamma: f64) -> Result<f64> {
        let s2 = self.resid(gamma).norm_squared() / self.n;
        Ok(-0.5 * self.n * (LN_2PI + 1.0 + s2.ln()) + self.logdet.eval(gamma)?)
    }

    /// `d loglik / dγ`.
    pub fn score(&self, gamma: f64) -> Result<f64> {
        let e = self.resid(gamma);
        Ok(self.n * self.el.dot(&e) / e.norm_squared() + logdet_slope(&self.logdet, gamma)?)
    }

    pub fn beta(&self, gamma: f64) -> DVector<f64> {
        &self.b0 - &self.bl * gamma
    }
}

/// Profile of the concentrated likelihood, for diagnostics and tests.
pub fn slm_concentrated_loglik(design: &Design, w: &SpatialWeights) -> Result<SlmProfile> {
    SlmProfile::new(design, w)
}

/// Fit statistics shared by the lag-type models: pseudo R² from the
/// reduced-form prediction and MSE from the structural residual.
pub(super) struct LagMetrics {
    pub mse: f64,
    pub pseudo_r2: f64,
}

pub(super) fn lag_metrics(design: &Design, w: &SpatialWeights, gamma: f64, beta: &DVector<f64>) -> Result<LagMetrics> {
    let xb = &design.x * beta;
    let wy = lag_vec(w, &design.y);
    let e = &design.y - &wy * gamma - &xb;
    let fitted = solve_ar(w, gamma, &xb)?;
    Ok(LagMetrics {
        mse: e.norm_squared() / design.n() as f64,
        pseudo_r2: squared_correlation(&design.y, &fitted),
    })
}

/// Maximum-likelihood spatial lag model; `γ` is found by grid-seeded
/// golden-section search and refined on the score.
pub fn fit_slm_ml(design: &Design, w: &SpatialWeights, pins: Pins) -> Result<ModelFit> {
    let profile = SlmProfile::new(design, w)?;
    let (gamma, pinned) = match pins.gamma {
        Some(g) => (check_pin(g)?, true),
        None => {
            let m = grid_golden_max(|g| profile.loglik(g), PARAM_BOUND, GOLDEN_TOL)?;
            (polish(m.x, |g| profile.score(g))?, false)
        }
    };
    let n = design.n();
    let p = design.x.ncols();
    let beta = profile.beta(gamma);
    let e = profile.resid(gamma);
    let sigma2 = e.norm_squared() / n as f64;
    let mut warnings = Vec::new();

    let (cov_beta, gamma_se) = if pinned {
        (&profile.xtx_inv * sigma2, None)
    } else {
        // information matrix over (β, γ, σ²)
        let t = traces(w, gamma, &profile.logdet)?;
        if t.approximated {
            warnings.push("tr(V'V) approximated by tr(V^2) for large n".to_string());
        }
        let xb = &design.x * &beta;
        let wa_xb = lag_vec(w, &solve_ar(w, gamma, &xb)?);
        let mut info = DMatrix::zeros(p + 2, p + 2);
        info.view_mut((0, 0), (p, p)).copy_from(&(design.x.transpose() * &design.x / sigma2));
        let xg = design.x.transpose() * &wa_xb / sigma2;
        for i in 0..p {
            info[(i, p)] = xg[i];
            info[(p, i)] = xg[i];
        }
        info[(p, p)] = t.tr_sq + t.tr_tv + wa_xb.norm_squared() / sigma2;
        info[(p, p + 1)] = t.tr / sigma2;
        info[(p + 1, p)] = t.tr / sigma2;
        info[(p + 1, p + 1)] = n as f64 / (2.0 * sigma2 * sigma2);
        let cov = invert_information(&info)?;
        (cov.view((0, 0), (p, p)).into_owned(), Some(cov[(p, p)].max(0.0).sqrt()))
    };
    let metrics = lag_metrics(design, w, gamma, &beta)?;
    Ok(ModelFit {
        estimator: Estimator::SlmMl,
        formula: formula_of(design),
        n,
        k_params: p + 1,
        coefficients: coefficients(&design.names, &beta, &cov_beta, Inference::Normal),
        gamma: Some(SpatialParameter::new(gamma, gamma_se)),
        lambda: None,
        sigma2,
        mse: metrics.mse,
        r2: metrics.pseudo_r2,
        r2_kind: R2Kind::Pseudo,
        loglik: Some(profile.loglik(gamma)?),
        inference: Inference::Normal,
        group_effects: BTreeMap::new(),
        weights: Some(w.scheme.to_string()),
        panel_fingerprint: design.fingerprint.clone(),
        warnings,
    })
}

/// Instruments `[X, WX, W²X]` with columns collinear with earlier ones
/// (such as lags of the intercept) removed.
pub(super) fn lag_instruments(design: &Design, w: &SpatialWeights) -> Result<DMatrix<f64>> {
    let wx = w.lag_matrix(&design.x);
    let wwx = w.lag_matrix(&wx);
    let h = hstack(&[&design.x, &wx, &wwx]);
    let mut names = design.names.clone();
    names.extend(design.names.iter().map(|s| format!("W.{s}")));
    names.extend(design.names.iter().map(|s| format!("WW.{s}")));
    let bad = collinear_columns(&h, &names);
    let keep: Vec<usize> = (0..h.ncols()).filter(|&c| !bad.contains(&names[c])).collect();
    if keep.len() <= design.x.ncols() {
        return Err(Error::RankDeficient(
            vec!["instrument matrix has no excluded instruments for Wy".into()],
        ));
    }
    Ok(h.select_columns(&keep))
}

/// Generalized spatial two-stage least squares for the lag model, with
/// `Wy` instrumented by `[X, WX, W²X]`.
pub fn fit_slm_gs2sls(design: &Design, w: &SpatialWeights, pins: Pins) -> Result<ModelFit> {
    check_weights(design, w)?;
    ensure_full_rank(&design.x, &design.names)?;
    let n = design.n();
    let p = design.x.ncols();
    let wy = lag_vec(w, &design.y);
    let (beta, gamma, cov_beta, gamma_se, sigma2) = match pins.gamma {
        Some(g) => {
            let g = check_pin(g)?;
            let ls = least_squares(&design.x, &(&design.y - &wy * g))?;
            let s2 = ls.rss() / n as f64;
            (ls.coef, g, ls.xtx_inv * s2, None, s2)
        }
        None => {
            let h = lag_instruments(design, w)?;
            let z = hstack(&[&design.x, &column_matrix(&wy)]);
            let ts = two_stage(&z, &h, &design.y)?;
            let s2 = ts.resid.norm_squared() / n as f64;
            let cov = &ts.zhzh_inv * s2;
            (
                ts.coef.rows(0, p).into_owned(),
                ts.coef[p],
                cov.view((0, 0), (p, p)).into_owned(),
                Some(cov[(p, p)].max(0.0).sqrt()),
                s2,
            )
        }
    };
    let metrics = lag_metrics(design, w, gamma, &beta)?;
    Ok(ModelFit {
        estimator: Estimator::SlmGs2sls,
        formula: formula_of(design),
        n,
        k_params: p + 1,
        coefficients: coefficients(&design.names, &beta, &cov_beta, Inference::Normal),
        gamma: Some(SpatialParameter::new(gamma, gamma_se)),
        lambda: None,
        sigma2,
        mse: metrics.mse,
        r2: metrics.pseudo_r2,
        r2_kind: R2Kind::Pseudo,
        loglik: None,
        inference: Inference::Normal,
        group_effects: BTreeMap::new(),
        weights: Some(w.scheme.to_string()),
        panel_fingerprint: design.fingerprint.clone(),
        warnings: Vec::new(),
    })
}
