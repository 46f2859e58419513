//! Combined spatial lag and error model
//! `y = γWy + Xβ + u`, `u = λWu + ε`, estimated in three steps.

use std::collections::BTreeMap;

use nalgebra::DVector;

use super::error_model::kelejian_prucha;
use super::lag::{lag_instruments, lag_metrics};
use super::linalg::{column_matrix, ensure_full_rank, hstack, least_squares, two_stage};
use super::ols::formula_of;
use super::spatial::lag_vec;
use super::{check_pin, check_weights, coefficients, Design, Estimator, Inference, ModelFit, Pins, R2Kind, SpatialParameter};
use crate::error::Result;
use crate::weights::SpatialWeights;

/// 2SLS for `(β, γ)`, Kelejian–Prucha on its residuals for `λ`, then 2SLS
/// again on the spatially filtered outcome and regressors.
pub fn fit_selm_gmm(design: &Design, w: &SpatialWeights, pins: Pins) -> Result<ModelFit> {
    check_weights(design, w)?;
    ensure_full_rank(&design.x, &design.names)?;
    let n = design.n();
    let p = design.x.ncols();
    let y = &design.y;
    let wy = lag_vec(w, y);
    let gamma_pin = pins.gamma.map(check_pin).transpose()?;
    let lambda_pin = pins.lambda.map(check_pin).transpose()?;
    let instruments = match gamma_pin {
        Some(_) => None,
        None => Some(lag_instruments(design, w)?),
    };
    let z = hstack(&[&design.x, &column_matrix(&wy)]);

    let u: DVector<f64> = match (gamma_pin, &instruments) {
        (Some(g), _) => least_squares(&design.x, &(y - &wy * g))?.resid,
        (None, Some(h)) => two_stage(&z, h, y)?.resid,
        (None, None) => unreachable!("instruments exist when gamma is free"),
    };
    let lambda = match lambda_pin {
        Some(l) => l,
        None => kelejian_prucha(&u, w)?.lambda,
    };

    let wx = w.lag_matrix(&design.x);
    let wwy = lag_vec(w, &wy);
    let y_f = y - &wy * lambda;
    let x_f = &design.x - &wx * lambda;
    let (beta, gamma, cov_beta, gamma_se, sigma2) = match (gamma_pin, &instruments) {
        (Some(g), _) => {
            let wy_f = &wy - &wwy * lambda;
            let ls = least_squares(&x_f, &(&y_f - wy_f * g))?;
            let s2 = ls.rss() / n as f64;
            (ls.coef, g, ls.xtx_inv * s2, None, s2)
        }
        (None, Some(h)) => {
            let z_f = hstack(&[&x_f, &column_matrix(&(&wy - &wwy * lambda))]);
            let ts = two_stage(&z_f, h, &y_f)?;
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
        (None, None) => unreachable!("instruments exist when gamma is free"),
    };
    let metrics = lag_metrics(design, w, gamma, &beta)?;
    Ok(ModelFit {
        estimator: Estimator::SelmGmm,
        formula: formula_of(design),
        n,
        k_params: p + 2,
        coefficients: coefficients(&design.names, &beta, &cov_beta, Inference::Normal),
        gamma: Some(SpatialParameter::new(gamma, gamma_se)),
        lambda: Some(SpatialParameter::new(lambda, None)),
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
