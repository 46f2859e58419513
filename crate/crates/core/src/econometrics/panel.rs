//! Tract regression panel, model formulas and design matrices.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::sig6;

pub const INTERCEPT: &str = "const";
pub const ID_COLUMN: &str = "tract_id";
pub const DEFAULT_GROUP_COLUMN: &str = "region_id";
pub const MAPC_COLUMN: &str = "mapc";

/// Columns constrained to `[0, 1]` when present.
pub const UNIT_INTERVAL_COLUMNS: [&str; 8] = [
    "pct_over65",
    "unemployment",
    "w_carpool",
    "w_pubtrans",
    "w_bike",
    "w_home",
    "accessindex",
    MAPC_COLUMN,
];

/// Raw per-capita income column; when present without the log columns, the
/// loader materializes `log_income` and `log_income_sq`.
pub const INCOME_COLUMN: &str = "income_per_capita";
pub const LOG_INCOME_COLUMN: &str = "log_income";
pub const LOG_INCOME_SQ_COLUMN: &str = "log_income_sq";

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Column-oriented tract table. Values are kept as text; numeric access
/// parses on demand so that grouping keys may be non-numeric.
#[derive(Debug, Clone, PartialEq)]
pub struct TractPanel {
    names: Vec<String>,
    columns: Vec<Vec<String>>,
    source_name: String,
}

impl TractPanel {
    pub fn from_columns(
        source_name: &str,
        columns: Vec<(String, Vec<String>)>,
    ) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::Invalid("panel columns differ in length".into()));
        }
        let (names, columns) = columns.into_iter().unzip();
        let mut p = Self {
            names,
            columns,
            source_name: source_name.to_string(),
        };
        p.materialize_log_income()?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_numeric(source_name: &str, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        Self::from_columns(
            source_name,
            columns
                .into_iter()
                .map(|(n, v)| (n, v.into_iter().map(|x| format!("{x:?}")).collect()))
                .collect(),
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f, &path.display().to_string())
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cols: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (c, field) in cols.iter_mut().zip(rec.iter()) {
                c.push(field.to_string());
            }
        }
        Self::from_columns(source_name, headers.into_iter().zip(cols).collect())
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn text(&self, name: &str) -> Result<&[String]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Schema {
                source_name: self.source_name.clone(),
                columns: vec![name.to_string()],
            })
    }

    /// Numeric column with missing cells as `None`.
    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>> {
        self.text(name)?
            .iter()
            .enumerate()
            .map(|(row, s)| {
                if is_missing(s) {
                    Ok(None)
                } else {
                    s.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse {
                        path: self.source_name.clone().into(),
                        line: row + 2,
                        message: format!("column {name}: {s:?} is not a number"),
                    })
                }
            })
            .collect()
    }

    pub fn ids(&self) -> Result<&[String]> {
        self.text(ID_COLUMN)
    }

    /// Appends (or replaces) a numeric column.
    pub fn set_numeric(&mut self, name: &str, values: &[f64]) -> Result<()> {
        if values.len() != self.nrows() && !self.names.is_empty() {
            return Err(Error::Invalid(format!("column {name} has the wrong length")));
        }
        let text: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = text,
            None => {
                self.names.push(name.to_string());
                self.columns.push(text);
            }
        }
        Ok(())
    }

    /// Log income and its square, the square taken of the logged value.
    fn materialize_log_income(&mut self) -> Result<()> {
        if !self.has_column(INCOME_COLUMN) || self.has_column(LOG_INCOME_COLUMN) {
            return Ok(());
        }
        let raw = self.numeric(INCOME_COLUMN)?;
        let log: Vec<String> = raw
            .iter()
            .map(|v| match v {
                Some(x) if *x > 0.0 => format!("{:?}", x.ln()),
                _ => String::new(),
            })
            .collect();
        let sq: Vec<String> = raw
            .iter()
            .map(|v| match v {
                Some(x) if *x > 0.0 => format!("{:?}", x.ln() * x.ln()),
                _ => String::new(),
            })
            .collect();
        self.names.push(LOG_INCOME_COLUMN.into());
        self.columns.push(log);
        self.names.push(LOG_INCOME_SQ_COLUMN.into());
        self.columns.push(sq);
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if let Ok(ids) = self.ids() {
            let mut seen = std::collections::BTreeSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(Error::Consistency(format!(
                    "{}: duplicate tract_id {dup}",
                    self.source_name
                )));
            }
        }
        for name in UNIT_INTERVAL_COLUMNS {
            if !self.has_column(name) {
                continue;
            }
            for (row, v) in self.numeric(name)?.iter().enumerate() {
                if let Some(x) = v {
                    if !(0.0..=1.0).contains(x) {
                        return Err(Error::Parse {
                            path: self.source_name.clone().into(),
                            line: row + 2,
                            message: format!("column {name}: {x} outside [0, 1]"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// CSV text with every numeric cell rendered through `sig6`.
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in 0..self.nrows() {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c[r].parse::<f64>() {
                    Ok(v) if !is_missing(&c[r]) => sig6(v),
                    _ => c[r].clone(),
                })
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// One right-hand-side term: a column or a product of columns (`a:b`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub factors: Vec<String>,
}

impl Term {
    pub fn name(&self) -> String {
        self.factors.join(":")
    }
}

/// `outcome ~ term + term + ...` with an implicit intercept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub outcome: String,
    pub terms: Vec<Term>,
}

impl ModelSpec {
    pub fn parse(formula: &str) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("formula {formula:?}: {m}"));
        let (lhs, rhs) = formula.split_once('~').ok_or_else(|| bad("missing '~'"))?;
        let outcome = lhs.trim();
        if outcome.is_empty() || outcome.contains(char::is_whitespace) {
            return Err(bad("outcome must be a single column name"));
        }
        let mut terms = Vec::new();
        for raw in rhs.split('+') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(bad("empty term"));
            }
            if raw == "1" {
                continue;
            }
            let factors: Vec<String> = raw.split(':').map(|f| f.trim().to_string()).collect();
            if factors.iter().any(|f| f.is_empty() || f.contains(char::is_whitespace)) {
                return Err(bad(&format!("malformed term {raw:?}")));
            }
            let t = Term { factors };
            if terms.contains(&t) {
                return Err(bad(&format!("duplicate term {raw:?}")));
            }
            terms.push(t);
        }
        if terms.is_empty() {
            return Err(bad("no regressors"));
        }
        Ok(Self {
            outcome: outcome.to_string(),
            terms,
        })
    }

    /// First non-comment, non-blank line of a model-spec file.
    pub fn from_file_text(text: &str) -> Result<Self> {
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| Error::Invalid("model spec file has no formula line".into()))?;
        Self::parse(line)
    }

    /// Every column the spec touches.
    pub fn columns(&self) -> Vec<&str> {
        let mut cols = vec![self.outcome.as_str()];
        for t in &self.terms {
            for f in &t.factors {
                if !cols.contains(&f.as_str()) {
                    cols.push(f);
                }
            }
        }
        cols
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let terms: Vec<String> = self.terms.iter().map(Term::name).collect();
        write!(f, "{} ~ {}", self.outcome, terms.join(" + "))
    }
}

/// Fitted-ready data: complete rows only, intercept first.
#[derive(Debug, Clone)]
pub struct Design {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    /// Column names of `x`, starting with [`INTERCEPT`].
    pub names: Vec<String>,
    pub outcome: String,
    /// Panel row index of every retained observation.
    pub rows: Vec<usize>,
    /// Rows dropped for missing values.
    pub dropped: usize,
    /// Group index per retained row, when a grouping column was requested.
    pub groups: Option<Vec<usize>>,
    pub group_labels: Vec<String>,
    pub fingerprint: String,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn from_matrices(y: DVector<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() || names.len() != x.ncols() {
            return Err(Error::Invalid("design dimensions disagree".into()));
        }
        let n = y.len();
        let fingerprint = fingerprint(&y, &(0..n).collect::<Vec<_>>());
        Ok(Self {
            y,
            x,
            names,
            outcome: "y".into(),
            rows: (0..n).collect(),
            dropped: 0,
            groups: None,
            group_labels: Vec::new(),
            fingerprint,
        })
    }

    pub fn with_groups(mut self, labels: &[String]) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Invalid("group labels length must equal n".into()));
        }
        let (idx, uniq) = index_groups(labels.iter().map(String::as_str));
        self.groups = Some(idx);
        self.group_labels = uniq;
        Ok(self)
    }

    /// Retained observations reordered so that new row `r` is old row `perm[r]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let y = DVector::from_iterator(perm.len(), perm.iter().map(|&i| self.y[i]));
        let x = DMatrix::from_fn(perm.len(), self.x.ncols(), |r, c| self.x[(perm[r], c)]);
        Self {
            y,
            x,
            rows: perm.iter().map(|&i| self.rows[i]).collect(),
            groups: self.groups.as_ref().map(|g| perm.iter().map(|&i| g[i]).collect()),
            ..self.clone()
        }
    }
}

fn index_groups<'a>(labels: impl Iterator<Item = &'a str>) -> (Vec<usize>, Vec<String>) {
    let labels: Vec<&str> = labels.collect();
    let mut uniq: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    uniq.sort();
    uniq.dedup();
    let lookup: BTreeMap<&str, usize> =
        uniq.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    (labels.iter().map(|l| lookup[l]).collect(), uniq)
}

/// Order-insensitive digest of the outcome vector, used to check that
/// fits being compared came from the same data.
fn fingerprint(y: &DVector<f64>, rows: &[usize]) -> String {
    let mut pairs: Vec<(usize, u64)> = rows.iter().zip(y.iter()).map(|(&r, v)| (r, v.to_bits())).collect();
    pairs.sort_unstable();
    let mut h = Sha256::new();
    for (r, bits) in pairs {
        h.update((r as u64).to_le_bytes());
        h.update(bits.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Builds `y` and `[1, terms...]` from complete rows of the panel. A
/// missing column is a schema error naming every absent column.
pub fn build_design(panel: &TractPanel, spec: &ModelSpec, group: Option<&str>) -> Result<Design> {
    let mut needed: Vec<&str> = spec.columns();
    if let Some(g) = group {
        needed.push(g);
    }
    let missing: Vec<String> = needed
        .iter()
        .filter(|c| !panel.has_column(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema {
            source_name: panel.source_name.clone(),
            columns: missing,
        });
    }
    let mut numeric: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for c in spec.columns() {
        numeric.insert(c, panel.numeric(c)?);
    }
    let group_text = group.map(|g| panel.text(g)).transpose()?;
    let n_all = panel.nrows();
    let rows: Vec<usize> = (0..n_all)
        .filter(|&r| numeric.values().all(|col| col[r].is_some_and(f64::is_finite)))
        .filter(|&r| group_text.is_none_or(|g| !is_missing(&g[r])))
        .collect();
    let n = rows.len();
    let k = spec.terms.len() + 1;
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(spec.terms.iter().map(Term::name));
    let x = DMatrix::from_fn(n, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            spec.terms[c - 1]
                .factors
                .iter()
                .map(|f| numeric[f.as_str()][rows[r]].expect("complete row"))
                .product()
        }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|&r| numeric[spec.outcome.as_str()][r].expect("complete row")));
    let (groups, group_labels) = match group_text {
        Some(g) => {
            let (idx, labels) = index_groups(rows.iter().map(|&r| g[r].as_str()));
            (Some(idx), labels)
        }
        None => (None, Vec::new()),
    };
    let dropped = n_all - n;
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} row(s) with missing values", panel.source_name);
    }
    Ok(Design {
        fingerprint: fingerprint(&y, &rows),
        y,
        x,
        names,
        outcome: spec.outcome.clone(),
        rows,
        dropped,
        groups,
        group_labels,
    })
}
