//! Model ranking and plain-text/CSV reports.

use serde::Serialize;

use super::{stars, Estimator, ModelFit, R2Kind, SpatialParameter};
use crate::error::{Error, Result};
use crate::format::{json6, sig6};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub rank: usize,
    pub estimator: Estimator,
    #[serde(serialize_with = "json6::serialize")]
    pub mse: f64,
    #[serde(serialize_with = "json6::serialize")]
    pub r2: f64,
    pub r2_kind: R2Kind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedFit {
    pub estimator: Estimator,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub failed: Vec<FailedFit>,
}

/// Ranks fits by MSE ascending, ties broken by R² descending. All fits
/// must come from the same panel.
pub fn compare_models(fits: &[ModelFit]) -> Result<Comparison> {
    if fits.len() < 2 {
        return Err(Error::Invalid(format!("need at least two fits to compare, got {}", fits.len())));
    }
    let fp = &fits[0].panel_fingerprint;
    if let Some(other) = fits.iter().find(|f| &f.panel_fingerprint != fp || f.n != fits[0].n) {
        return Err(Error::Consistency(format!(
            "fits come from different panels ({} vs {})",
            fits[0].estimator, other.estimator
        )));
    }
    let mut order: Vec<&ModelFit> = fits.iter().collect();
    order.sort_by(|a, b| a.mse.total_cmp(&b.mse).then(b.r2.total_cmp(&a.r2)).then(a.estimator.cmp(&b.estimator)));
    Ok(Comparison {
        rows: order
            .iter()
            .enumerate()
            .map(|(i, f)| ComparisonRow {
                rank: i + 1,
                estimator: f.estimator,
                mse: f.mse,
                r2: f.r2,
                r2_kind: f.r2_kind,
            })
            .collect(),
        failed: Vec::new(),
    })
}

impl Comparison {
    pub fn with_failures(mut self, failed: Vec<FailedFit>) -> Self {
        self.failed = failed;
        self
    }
}

pub fn comparison_csv(c: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "estimator", "model", "mse", "r2", "r2_kind", "status"])?;
    for r in &c.rows {
        let kind = match r.r2_kind {
            R2Kind::Adjusted => "adjusted",
            R2Kind::Pseudo => "pseudo",
        };
        w.write_record([
            r.rank.to_string(),
            r.estimator.to_string(),
            r.estimator.label().to_string(),
            sig6(r.mse),
            sig6(r.r2),
            kind.to_string(),
            "ok".to_string(),
        ])?;
    }
    for f in &c.failed {
        w.write_record([
            String::new(),
            f.estimator.to_string(),
            f.estimator.label().to_string(),
            String::new(),
            String::new(),
            String::new(),
            format!("failed: {}", f.error),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const NAME_WIDTH: usize = 28;
const CELL_WIDTH: usize = 18;

fn cell(estimate: f64, p: Option<f64>) -> String {
    format!("{}{}", sig6(estimate), p.map_or("", stars))
}

fn spatial_cells(p: Option<&SpatialParameter>) -> (String, String) {
    match p {
        Some(s) => (
            cell(s.estimate, s.p_value),
            s.std_error.map_or(String::new(), |se| format!("({})", sig6(se))),
        ),
        None => (String::new(), String::new()),
    }
}

/// Side-by-side coefficient table: one column per fit, estimate with
/// significance stars and the standard error in parentheses beneath.
pub fn fit_table(fits: &[ModelFit]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for f in fits {
        for c in &f.coefficients {
            if !names.contains(&c.name.as_str()) {
                names.push(&c.name);
            }
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, label: &str, cells: &[String]| {
        let mut s = format!("{label:<NAME_WIDTH$}");
        for c in cells {
            s.push_str(&format!("{c:>CELL_WIDTH$}"));
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    let heads: Vec<String> = fits.iter().map(|f| f.estimator.to_string()).collect();
    line(&mut out, "", &heads);
    let width = NAME_WIDTH + CELL_WIDTH * fits.len();
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for name in &names {
        let (mut est, mut se) = (Vec::new(), Vec::new());
        for f in fits {
            match f.coefficient(name) {
                Some(c) => {
                    est.push(cell(c.estimate, Some(c.p_value)));
                    se.push(format!("({})", sig6(c.std_error)));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        line(&mut out, name, &est);
        line(&mut out, "", &se);
    }
    for (label, pick) in [
        ("gamma (W.outcome)", 0usize),
        ("lambda (W.error)", 1),
    ] {
        let params: Vec<Option<&SpatialParameter>> = fits
            .iter()
            .map(|f| if pick == 0 { f.gamma.as_ref() } else { f.lambda.as_ref() })
            .collect();
        if params.iter().all(Option::is_none) {
            continue;
        }
        let (est, se): (Vec<String>, Vec<String>) = params.into_iter().map(spatial_cells).unzip();
        line(&mut out, label, &est);
        line(&mut out, "", &se);
    }
    out.push_str(&"-".repeat(width));
    out.push('\n');
    let stat = |f: &dyn Fn(&ModelFit) -> String| fits.iter().map(f).collect::<Vec<_>>();
    line(&mut out, "Observations", &stat(&|f| f.n.to_string()));
    line(&mut out, "MSE (in-sample RSS/n)", &stat(&|f| sig6(f.mse)));
    line(
        &mut out,
        "Adjusted (Pseudo) R-squared",
        &stat(&|f| match f.r2_kind {
            R2Kind::Adjusted => sig6(f.r2),
            R2Kind::Pseudo => format!("{} (p)", sig6(f.r2)),
        }),
    );
    line(&mut out, "Log-likelihood", &stat(&|f| f.loglik.map_or(String::new(), sig6)));
    if fits.iter().any(|f| !f.group_effects.is_empty()) {
        line(
            &mut out,
            "Group effects",
            &stat(&|f| if f.group_effects.is_empty() { String::new() } else { f.group_effects.len().to_string() }),
        );
    }
    out.push_str("Significance: *** p<0.01, ** p<0.05, * p<0.10\n");
    out
}
