//! Predicted VMT changes from covariate interventions on a fitted model.
//!
//! The outcome is log VMT, so an intervention moves it by
//! `Σ (β_col + β_col:mapc) · Δcol` and VMT by `exp(Δ) − 1`. The
//! interaction term applies only in the MAPC context. Optionally the
//! direct effect is scaled by the spatial multiplier `1 / (1 − γ)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::econometrics::panel::{MAPC_COLUMN, UNIT_INTERVAL_COLUMNS};
use crate::econometrics::{Estimator, ModelFit};
use crate::error::{Error, Result};
use crate::format::{json6, sig6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionContext {
    Mapc,
    NonMapc,
}

impl FromStr for RegionContext {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mapc" => Ok(RegionContext::Mapc),
            "non_mapc" | "nonmapc" => Ok(RegionContext::NonMapc),
            _ => Err(Error::Invalid(format!("region context {s:?}: expected mapc or non_mapc"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// Coefficient arithmetic only.
    Direct,
    /// Direct effect scaled by `1 / (1 − γ)`.
    SpatialMultiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    /// Absolute change in the covariate's own units.
    Delta(f64),
    /// Post-intervention value; needs a baseline.
    Target(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intervention {
    pub changes: Vec<(String, Change)>,
    pub region: RegionContext,
    pub effect: Effect,
}

impl Intervention {
    pub fn new(region: RegionContext) -> Self {
        Self {
            changes: Vec::new(),
            region,
            effect: Effect::Direct,
        }
    }

    pub fn delta(mut self, column: &str, delta: f64) -> Self {
        self.changes.push((column.to_string(), Change::Delta(delta)));
        self
    }

    pub fn target(mut self, column: &str, value: f64) -> Self {
        self.changes.push((column.to_string(), Change::Target(value)));
        self
    }

    pub fn with_effect(mut self, effect: Effect) -> Self {
        self.effect = effect;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub column: String,
    #[serde(serialize_with = "json6::serialize")]
    pub delta: f64,
    #[serde(serialize_with = "json6::serialize")]
    pub coefficient: f64,
    #[serde(serialize_with = "json6::option::serialize")]
    pub mapc_interaction: Option<f64>,
    /// Change in log VMT from this term, after any multiplier.
    #[serde(serialize_with = "json6::serialize")]
    pub delta_log_vmt: f64,
    /// `100 · delta_log_vmt`, the linear approximation for this term.
    #[serde(serialize_with = "json6::serialize")]
    pub linear_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub estimator: Estimator,
    pub region: RegionContext,
    pub effect: Effect,
    #[serde(serialize_with = "json6::option::serialize")]
    pub multiplier: Option<f64>,
    #[serde(serialize_with = "json6::serialize")]
    pub delta_log_vmt: f64,
    /// `100 · (exp(delta_log_vmt) − 1)`.
    #[serde(serialize_with = "json6::serialize")]
    pub pct_change_vmt: f64,
    pub contributions: Vec<Contribution>,
}

impl ScenarioResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

impl fmt::Display for ScenarioResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24}{:>12}{:>14}{:>12}", "column", "delta", "d log VMT", "linear %")?;
        for c in &self.contributions {
            writeln!(
                f,
                "{:<24}{:>12}{:>14}{:>12}",
                c.column,
                sig6(c.delta),
                sig6(c.delta_log_vmt),
                sig6(c.linear_pct)
            )?;
        }
        writeln!(f, "total d log VMT {}", sig6(self.delta_log_vmt))?;
        writeln!(f, "VMT change {}%", sig6(self.pct_change_vmt))
    }
}

fn interaction_name(column: &str) -> String {
    format!("{column}:{MAPC_COLUMN}")
}

/// Effect of absolute covariate changes. Targets are rejected here; use
/// [`composite_scenario`] with a baseline for those.
pub fn mode_shift_effect(fit: &ModelFit, intervention: &Intervention) -> Result<ScenarioResult> {
    evaluate(fit, intervention, None)
}

/// Effect of moving a baseline row to target (or shifted) values. The
/// baseline also bounds share columns to `[0, 1]` after the change.
pub fn composite_scenario(
    fit: &ModelFit,
    baseline: &BTreeMap<String, f64>,
    intervention: &Intervention,
) -> Result<ScenarioResult> {
    evaluate(fit, intervention, Some(baseline))
}

fn evaluate(
    fit: &ModelFit,
    intervention: &Intervention,
    baseline: Option<&BTreeMap<String, f64>>,
) -> Result<ScenarioResult> {
    let multiplier = match intervention.effect {
        Effect::Direct => None,
        Effect::SpatialMultiplier => {
            let g = fit.gamma.ok_or_else(|| {
                Error::Invalid(format!("{} has no spatial lag parameter for a multiplier", fit.estimator))
            })?;
            Some(1.0 / (1.0 - g.estimate))
        }
    };
    let mut seen = Vec::new();
    let mut contributions = Vec::with_capacity(intervention.changes.len());
    for (column, change) in &intervention.changes {
        if seen.contains(column) {
            return Err(Error::Invalid(format!("column {column} appears twice in the intervention")));
        }
        seen.push(column.clone());
        let coefficient = fit
            .estimate(column)
            .ok_or_else(|| Error::Invalid(format!("column {column} is not a coefficient of the {} fit", fit.estimator)))?;
        let base = baseline.and_then(|b| b.get(column)).copied();
        let delta = match (change, base) {
            (Change::Delta(d), _) => *d,
            (Change::Target(t), Some(b)) => t - b,
            (Change::Target(_), None) => {
                return Err(Error::Invalid(format!("target for {column} needs a baseline value")));
            }
        };
        if !delta.is_finite() {
            return Err(Error::Invalid(format!("change for {column} is not finite")));
        }
        if let Some(b) = base {
            let after = b + delta;
            if UNIT_INTERVAL_COLUMNS.contains(&column.as_str()) && !(0.0..=1.0).contains(&after) {
                return Err(Error::Domain(format!(
                    "{column} would move from {b} to {after}, outside [0, 1]"
                )));
            }
        }
        let mapc_interaction = match intervention.region {
            RegionContext::Mapc => fit.estimate(&interaction_name(column)),
            RegionContext::NonMapc => None,
        };
        let slope = coefficient + mapc_interaction.unwrap_or(0.0);
        let d = slope * delta * multiplier.unwrap_or(1.0);
        contributions.push(Contribution {
            column: column.clone(),
            delta,
            coefficient,
            mapc_interaction,
            delta_log_vmt: d,
            linear_pct: 100.0 * d,
        });
    }
    let delta_log_vmt: f64 = contributions.iter().map(|c| c.delta_log_vmt).sum();
    Ok(ScenarioResult {
        estimator: fit.estimator,
        region: intervention.region,
        effect: intervention.effect,
        multiplier,
        delta_log_vmt,
        pct_change_vmt: 100.0 * delta_log_vmt.exp_m1(),
        contributions,
    })
}

/// Parsed scenario file: the intervention plus any baseline values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub intervention: Intervention,
    pub baseline: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn run(&self, fit: &ModelFit) -> Result<ScenarioResult> {
        if self.baseline.is_empty() {
            mode_shift_effect(fit, &self.intervention)
        } else {
            composite_scenario(fit, &self.baseline, &self.intervention)
        }
    }
}

pub fn read_scenario(path: &Path) -> Result<ScenarioSpec> {
    parse_scenario(&crate::io::read_to_string(path)?, &path.display().to_string())
}

/// Parses `key = value` lines:
///
/// ```text
/// region = mapc
/// effect = direct            # or spatial_multiplier
/// delta.w_carpool = 0.01
/// target.w_pubtrans = 0.598
/// baseline.w_pubtrans = 0.299
/// ```
pub fn parse_scenario(text: &str, source_name: &str) -> Result<ScenarioSpec> {
    let mut region = None;
    let mut effect = Effect::Direct;
    let mut changes: Vec<(String, Change)> = Vec::new();
    let mut baseline = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            path: source_name.into(),
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let number = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("{key}: {value:?} is not a number")))
        };
        match key.split_once('.') {
            None if key == "region" => region = Some(value.parse().map_err(|e: Error| err(e.to_string()))?),
            None if key == "effect" => {
                effect = match value {
                    "direct" => Effect::Direct,
                    "spatial_multiplier" => Effect::SpatialMultiplier,
                    _ => return Err(err(format!("effect {value:?}: expected direct or spatial_multiplier"))),
                }
            }
            Some((kind @ ("delta" | "target"), col)) if !col.trim().is_empty() => {
                let col = col.trim().to_string();
                if changes.iter().any(|(c, _)| c == &col) {
                    return Err(err(format!("{col} changed twice")));
                }
                let v = number()?;
                changes.push((col, if kind == "delta" { Change::Delta(v) } else { Change::Target(v) }));
            }
            Some(("baseline", col)) if !col.trim().is_empty() => {
                baseline.insert(col.trim().to_string(), number()?);
            }
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
    }
    Ok(ScenarioSpec {
        intervention: Intervention {
            changes,
            region: region.unwrap_or(RegionContext::NonMapc),
            effect,
        },
        baseline,
    })
}
