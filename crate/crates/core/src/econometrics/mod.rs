//! Regression models of tract VMT: OLS, fixed effects, and spatial lag,
//! error and combined models estimated by ML, 2SLS and GMM.

mod error_model;
mod lag;
pub mod linalg;
pub mod logdet;
mod ols;
pub mod optimize;
pub mod panel;
mod report;
mod sarar;
pub(crate) mod spatial;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::format::json6;

pub use error_model::{fit_sem_gmm, fit_sem_ml, kelejian_prucha, KpEstimate};
pub use lag::{fit_slm_gs2sls, fit_slm_ml, slm_concentrated_loglik, SlmProfile};
pub use ols::{fit_ols, fit_ols_fe};
pub use panel::{build_design, Design, ModelSpec, TractPanel};
pub use report::{compare_models, comparison_csv, fit_table, Comparison, ComparisonRow, FailedFit};
pub use sarar::fit_selm_gmm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ols,
    OlsFe,
    SlmMl,
    SlmGs2sls,
    SemMl,
    SemGmm,
    SelmGmm,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Ols,
        Estimator::OlsFe,
        Estimator::SlmMl,
        Estimator::SlmGs2sls,
        Estimator::SemMl,
        Estimator::SemGmm,
        Estimator::SelmGmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::OlsFe => "ols_fe",
            Estimator::SlmMl => "slm_ml",
            Estimator::SlmGs2sls => "slm_gs2sls",
            Estimator::SemMl => "sem_ml",
            Estimator::SemGmm => "sem_gmm",
            Estimator::SelmGmm => "selm_gmm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ols => "OLS",
            Estimator::OlsFe => "OLS Fixed Effects",
            Estimator::SlmMl => "ML Spatial Lag",
            Estimator::SlmGs2sls => "GS2SLS Spatial Lag",
            Estimator::SemMl => "ML Spatial Error",
            Estimator::SemGmm => "GMM Spatial Error",
            Estimator::SelmGmm => "GMM Spatial Error and Lag",
        }
    }

    pub fn is_spatial(self) -> bool {
        !matches!(self, Estimator::Ols | Estimator::OlsFe)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.as_str() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Kind {
    Adjusted,
    /// Squared correlation of observed and fitted outcome.
    Pseudo,
}

/// Reference distribution for coefficient tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "dist")]
pub enum Inference {
    StudentT { df: f64 },
    Normal,
}

impl Inference {
    /// Two-sided p-value of `z = estimate / se`.
    pub fn p_value(self, estimate: f64, se: f64) -> f64 {
        if !(se > 0.0) {
            return f64::NAN;
        }
        let z = (estimate / se).abs();
        let tail = match self {
            Inference::StudentT { df } if df > 0.0 => StudentsT::new(0.0, 1.0, df)
                .map(|d| 1.0 - d.cdf(z))
                .unwrap_or(f64::NAN),
            _ => 1.0 - Normal::standard().cdf(z),
        };
        2.0 * tail
    }
}

/// `***`, `**`, `*` at the 0.01, 0.05 and 0.10 levels.
pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        _ => "",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    #[serde(serialize_with = "json6::serialize")]
    pub estimate: f64,
    #[serde(serialize_with = "json6::serialize")]
    pub std_error: f64,
    #[serde(serialize_with = "json6::serialize")]
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParameter {
    #[serde(serialize_with = "json6::serialize")]
    pub estimate: f64,
    #[serde(serialize_with = "json6::option::serialize")]
    pub std_error: Option<f64>,
    #[serde(serialize_with = "json6::option::serialize")]
    pub p_value: Option<f64>,
}

impl SpatialParameter {
    pub fn new(estimate: f64, std_error: Option<f64>) -> Self {
        let std_error = std_error.filter(|s| s.is_finite() && *s > 0.0);
        Self {
            estimate,
            std_error,
            p_value: std_error.map(|s| Inference::Normal.p_value(estimate, s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub estimator: Estimator,
    pub formula: String,
    pub n: usize,
    /// Estimated mean parameters, including spatial parameters and
    /// absorbed group effects.
    pub k_params: usize,
    pub coefficients: Vec<Coefficient>,
    pub gamma: Option<SpatialParameter>,
    pub lambda: Option<SpatialParameter>,
    #[serde(serialize_with = "json6::serialize")]
    pub sigma2: f64,
    /// In-sample mean squared residual, `RSS / n`.
    #[serde(serialize_with = "json6::serialize")]
    pub mse: f64,
    #[serde(serialize_with = "json6::serialize")]
    pub r2: f64,
    pub r2_kind: R2Kind,
    #[serde(serialize_with = "json6::option::serialize")]
    pub loglik: Option<f64>,
    pub inference: Inference,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", serialize_with = "serialize_map6")]
    pub group_effects: BTreeMap<String, f64>,
    pub weights: Option<String>,
    pub panel_fingerprint: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn serialize_map6<S: serde::Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_key(k)?;
        map.serialize_value(&crate::format::sig6(*v).parse::<f64>().unwrap_or(f64::NAN))?;
    }
    map.end()
}

impl ModelFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|c| c.estimate)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fixed spatial parameters, used to evaluate an estimator at a given
/// value instead of estimating it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Pins {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

impl Pins {
    pub fn gamma(v: f64) -> Self {
        Self {
            gamma: Some(v),
            lambda: None,
        }
    }

    pub fn lambda(v: f64) -> Self {
        Self {
            gamma: None,
            lambda: Some(v),
        }
    }

    pub fn both(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma: Some(gamma),
            lambda: Some(lambda),
        }
    }
}

fn check_pin(v: f64) -> Result<f64> {
    if v.is_finite() && v.abs() < 1.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("spatial parameter {v} must lie in (-1, 1)")))
    }
}

fn check_weights(design: &Design, w: &crate::weights::SpatialWeights) -> Result<()> {
    if w.n != design.n() {
        return Err(Error::Consistency(format!(
            "weights have n = {} but the design has {} rows",
            w.n,
            design.n()
        )));
    }
    if !w.row_standardized {
        return Err(Error::Domain("spatial models require row-standardized weights".into()));
    }
    Ok(())
}

fn coefficients(
    names: &[String],
    est: &nalgebra::DVector<f64>,
    cov: &nalgebra::DMatrix<f64>,
    inference: Inference,
) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let se = cov[(i, i)].max(0.0).sqrt();
            Coefficient {
                name: name.clone(),
                estimate: est[i],
                std_error: se,
                p_value: inference.p_value(est[i], se),
            }
        })
        .collect()
}

/// Runs one estimator by tag. Spatial estimators need `w`.
pub fn fit(
    estimator: Estimator,
    design: &Design,
    w: Option<&crate::weights::SpatialWeights>,
) -> Result<ModelFit> {
    let need_w = || {
        w.ok_or_else(|| Error::Invalid(format!("{estimator} needs spatial weights")))
    };
    match estimator {
        Estimator::Ols => fit_ols(design),
        Estimator::OlsFe => fit_ols_fe(design),
        Estimator::SlmMl => fit_slm_ml(design, need_w()?, Pins::default()),
        Estimator::SlmGs2sls => fit_slm_gs2sls(design, need_w()?, Pins::default()),
        Estimator::SemMl => fit_sem_ml(design, need_w()?, Pins::default()),
        Estimator::SemGmm => fit_sem_gmm(design, need_w()?, Pins::default()),
        Estimator::SelmGmm => fit_selm_gmm(design, need_w()?, Pins::default()),
    }
}
