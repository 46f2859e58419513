use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::linalg::{ensure_full_rank, least_squares, COLLINEARITY_TOL};
use super::{coefficients, Design, Estimator, Inference, ModelFit, R2Kind};
use crate::error::{Error, Result};

fn total_ss(y: &DVector<f64>) -> f64 {
    let m = y.mean();
    y.iter().map(|v| (v - m).powi(2)).sum()
}

fn gaussian_loglik(n: f64, rss: f64) -> Option<f64> {
    (rss > 0.0).then(|| -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (rss / n).ln() + 1.0))
}

/// Ordinary least squares with classical standard errors.
pub fn fit_ols(design: &Design) -> Result<ModelFit> {
    let (n, p) = (design.n(), design.x.ncols());
    if n <= p {
        return Err(Error::Invalid(format!("OLS needs n > k_params, got n = {n}, k = {p}")));
    }
    ensure_full_rank(&design.x, &design.names)?;
    let ls = least_squares(&design.x, &design.y)?;
    let rss = ls.rss();
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let tss = total_ss(&design.y);
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let k = p - 1;
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64;
    let inference = Inference::StudentT { df };
    Ok(ModelFit {
        estimator: Estimator::Ols,
        formula: formula_of(design),
        n,
        k_params: p,
        coefficients: coefficients(&design.names, &ls.coef, &(&ls.xtx_inv * sigma2), inference),
        gamma: None,
        lambda: None,
        sigma2,
        mse: rss / n as f64,
        r2: adj,
        r2_kind: R2Kind::Adjusted,
        loglik: gaussian_loglik(n as f64, rss),
        inference,
        group_effects: BTreeMap::new(),
        weights: None,
        panel_fingerprint: design.fingerprint.clone(),
        warnings: Vec::new(),
    })
}

pub(super) fn formula_of(design: &Design) -> String {
    format!("{} ~ {}", design.outcome, design.names[1..].join(" + "))
}

/// Within-group demeaning, in place. Returns group sizes.
fn demean(m: &mut DMatrix<f64>, groups: &[usize], g: usize) -> Vec<usize> {
    let mut counts = vec![0usize; g];
    for &gi in groups {
        counts[gi] += 1;
    }
    for c in 0..m.ncols() {
        let mut sums = vec![0.0; g];
        for (r, &gi) in groups.iter().enumerate() {
            sums[gi] += m[(r, c)];
        }
        for (r, &gi) in groups.iter().enumerate() {
            m[(r, c)] -= sums[gi] / counts[gi] as f64;
        }
    }
    counts
}

/// OLS on within-group demeaned data. Covariates that are constant within
/// every group carry no within variation and are dropped with a warning.
pub fn fit_ols_fe(design: &Design) -> Result<ModelFit> {
    let groups = design
        .groups
        .as_ref()
        .ok_or_else(|| Error::Invalid("fixed effects need a grouping column".into()))?;
    let g = design.group_labels.len();
    if g < 2 {
        return Err(Error::Domain("fixed effects need at least two groups".into()));
    }
    let n = design.n();
    // drop the intercept; it is absorbed by the group effects
    let raw_x = design.x.columns(1, design.x.ncols() - 1).into_owned();
    let mut xd = raw_x.clone();
    let mut yd = DMatrix::from_column_slice(n, 1, design.y.as_slice());
    let counts = demean(&mut xd, groups, g);
    demean(&mut yd, groups, g);
    if let Some(small) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Domain(format!(
            "group {} has fewer than two rows",
            design.group_labels[small]
        )));
    }
    let mut warnings = Vec::new();
    let mut keep = Vec::new();
    for c in 0..xd.ncols() {
        let before = raw_x.column(c).norm();
        if xd.column(c).norm() <= COLLINEARITY_TOL * before.max(1.0) {
            let name = &design.names[c + 1];
            log::warn!("{name} is constant within groups; dropped from the fixed-effects model");
            warnings.push(format!("dropped group-constant covariate {name}"));
        } else {
            keep.push(c);
        }
    }
    let names: Vec<String> = keep.iter().map(|&c| design.names[c + 1].clone()).collect();
    let x = xd.select_columns(&keep);
    let xr = raw_x.select_columns(&keep);
    let k = keep.len();
    if n <= g + k {
        return Err(Error::Invalid(format!(
            "fixed effects need n > groups + k, got n = {n}, groups = {g}, k = {k}"
        )));
    }
    let y = yd.column(0).into_owned();
    let (coef, resid, xtx_inv) = if k == 0 {
        (DVector::zeros(0), y.clone(), DMatrix::zeros(0, 0))
    } else {
        ensure_full_rank(&x, &names)?;
        let ls = least_squares(&x, &y)?;
        (ls.coef, ls.resid, ls.xtx_inv)
    };
    let rss = resid.norm_squared();
    let df = (n - g - k) as f64;
    let sigma2 = rss / df;
    let tss = total_ss(&design.y);
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - g) as f64;

    let mut ysum = vec![0.0; g];
    let mut xbsum = vec![0.0; g];
    let fitted_raw = &xr * &coef;
    for (r, &gi) in groups.iter().enumerate() {
        ysum[gi] += design.y[r];
        xbsum[gi] += fitted_raw[r];
    }
    let group_effects = design
        .group_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), (ysum[i] - xbsum[i]) / counts[i] as f64))
        .collect();
    let inference = Inference::StudentT { df };
    Ok(ModelFit {
        estimator: Estimator::OlsFe,
        formula: formula_of(design),
        n,
        k_params: k + g,
        coefficients: coefficients(&names, &coef, &(xtx_inv * sigma2), inference),
        gamma: None,
        lambda: None,
        sigma2,
        mse: rss / n as f64,
        r2: adj,
        r2_kind: R2Kind::Adjusted,
        loglik: gaussian_loglik(n as f64, rss),
        inference,
        group_effects,
        weights: None,
        panel_fingerprint: design.fingerprint.clone(),
        warnings,
    })
}
