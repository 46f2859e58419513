//! Speed-bin running-exhaust emission factors and time-of-day VMT shares.
//!
//! The embedded table holds passenger-weighted CO₂e factors (g/mile) for
//! fourteen 5-mph speed bins together with the share of each period's VMT
//! driven in each bin. A weighted factor for a road with a given speed limit
//! averages the per-bin factors of every bin at or below the limit, weighted
//! by that period's VMT shares.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of every speed bin in mph.
pub const BIN_WIDTH_MPH: u32 = 5;

/// Tolerance on the column sums of a loaded share table. Published shares
/// carry two decimals of a percent over fourteen rows.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeOfDay {
    #[serde(rename = "AM")]
    Am,
    #[serde(rename = "MD")]
    Md,
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "NT")]
    Nt,
}

impl TimeOfDay {
    pub const ALL: [TimeOfDay; 4] = [TimeOfDay::Am, TimeOfDay::Md, TimeOfDay::Pm, TimeOfDay::Nt];

    pub fn index(self) -> usize {
        match self {
            TimeOfDay::Am => 0,
            TimeOfDay::Md => 1,
            TimeOfDay::Pm => 2,
            TimeOfDay::Nt => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeOfDay::Am => "AM",
            TimeOfDay::Md => "MD",
            TimeOfDay::Pm => "PM",
            TimeOfDay::Nt => "NT",
        }
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeOfDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AM" => Ok(TimeOfDay::Am),
            "MD" => Ok(TimeOfDay::Md),
            "PM" => Ok(TimeOfDay::Pm),
            "NT" => Ok(TimeOfDay::Nt),
            other => Err(Error::Domain(format!("unknown time of day {other:?}"))),
        }
    }
}

/// A half-open speed interval `[lower, upper)`; the last bin is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpeedBin {
    pub lower: u32,
    pub upper: Option<u32>,
}

impl SpeedBin {
    pub fn contains(&self, mph: f64) -> bool {
        mph >= self.lower as f64 && self.upper.is_none_or(|u| mph < u as f64)
    }
}

impl fmt::Display for SpeedBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "[{}, {})", self.lower, u),
            None => write!(f, "[{}, {}+)", self.lower, self.lower),
        }
    }
}

// Published percentages, rows ordered by bin lower bound, columns AM MD PM NT.
const DEFAULT_SHARES_PCT: [[f64; 4]; 14] = [
    [2.30, 9.13, 3.33, 3.93],
    [0.43, 0.57, 0.38, 0.20],
    [3.16, 4.47, 4.03, 1.38],
    [12.03, 15.30, 13.54, 9.23],
    [17.01, 18.92, 17.31, 13.04],
    [12.80, 12.48, 13.13, 13.20],
    [10.95, 9.16, 10.46, 13.10],
    [8.81, 7.29, 9.94, 9.23],
    [5.72, 6.65, 8.43, 4.42],
    [7.04, 4.86, 6.79, 7.89],
    [6.29, 2.43, 4.53, 7.21],
    [4.45, 4.00, 3.75, 5.55],
    [6.79, 3.47, 2.89, 7.99],
    [2.23, 1.26, 1.49, 3.62],
];

const DEFAULT_EF_W: [f64; 14] = [
    1184.21, 1184.21, 873.37, 675.03, 539.09, 446.67, 383.63, 344.23, 319.98, 308.42, 308.34,
    319.60, 340.58, 380.39,
];

/// Tolerance on the sum of the four period shares. The published period
/// shares add to 99.8%; they are used as published, not renormalized.
pub const TOD_SUM_TOLERANCE: f64 = 5e-3;

/// Share of daily VMT in each period, AM MD PM NT.
const DEFAULT_TOD_SHARE: [f64; 4] = [0.1662, 0.3266, 0.2109, 0.2943];

/// Emission-factor model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EfModel {
    bins: Vec<SpeedBin>,
    ef_by_bin: Vec<f64>,
    /// `vmt_share[bin][tod]`, each tod column summing to one.
    vmt_share: Vec<[f64; 4]>,
    tod_share: [f64; 4],
}

impl Default for EfModel {
    fn default() -> Self {
        load_default_ef_model()
    }
}

/// The embedded speed-bin table.
pub fn load_default_ef_model() -> EfModel {
    let shares = DEFAULT_SHARES_PCT
        .iter()
        .map(|row| row.map(|p| p / 100.0))
        .collect::<Vec<_>>();
    let lowers: Vec<u32> = (0..14).map(|i| i * BIN_WIDTH_MPH).collect();
    EfModel::new(&lowers, DEFAULT_EF_W.to_vec(), shares, DEFAULT_TOD_SHARE)
        .expect("embedded table is valid")
}

impl EfModel {
    /// Builds a model from bin lower bounds, per-bin factors and per-bin
    /// shares (fractions). Share columns are checked to sum to one within
    /// [`SHARE_SUM_TOLERANCE`] and then renormalized exactly.
    pub fn new(
        bin_lowers: &[u32],
        ef_by_bin: Vec<f64>,
        mut vmt_share: Vec<[f64; 4]>,
        tod_share: [f64; 4],
    ) -> Result<Self> {
        let n = bin_lowers.len();
        if n == 0 || ef_by_bin.len() != n || vmt_share.len() != n {
            return Err(Error::Invalid(format!(
                "emission-factor table needs matching non-empty rows (bins {n}, factors {}, shares {})",
                ef_by_bin.len(),
                vmt_share.len()
            )));
        }
        for (i, &lower) in bin_lowers.iter().enumerate() {
            if lower != i as u32 * BIN_WIDTH_MPH {
                return Err(Error::Invalid(format!(
                    "bin {i} has lower bound {lower}; expected contiguous {BIN_WIDTH_MPH}-mph bins from 0"
                )));
            }
        }
        if let Some((i, ef)) = ef_by_bin.iter().enumerate().find(|(_, ef)| !(**ef > 0.0)) {
            return Err(Error::Invalid(format!("bin {i}: emission factor {ef} is not positive")));
        }
        if vmt_share.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid("VMT shares must lie in [0, 1]".into()));
        }
        for tod in TimeOfDay::ALL {
            let t = tod.index();
            let sum: f64 = vmt_share.iter().map(|row| row[t]).sum();
            if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
                return Err(Error::Invalid(format!(
                    "{tod} VMT shares sum to {sum}, expected 1"
                )));
            }
            for row in vmt_share.iter_mut() {
                row[t] /= sum;
            }
        }
        let tod_sum: f64 = tod_share.iter().sum();
        if (tod_sum - 1.0).abs() > TOD_SUM_TOLERANCE || tod_share.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid(format!(
                "time-of-day shares must be proportions summing to 1 within {TOD_SUM_TOLERANCE}, got {tod_sum}"
            )));
        }
        let bins = bin_lowers
            .iter()
            .enumerate()
            .map(|(i, &lower)| SpeedBin {
                lower,
                upper: (i + 1 < n).then_some(lower + BIN_WIDTH_MPH),
            })
            .collect();
        Ok(Self {
            bins,
            ef_by_bin,
            vmt_share,
            tod_share,
        })
    }

    /// Reads an override table with columns
    /// `bin_lower, ef_w, p_am, p_md, p_pm, p_nt`. Shares may be given as
    /// fractions or as percentages; the unit is inferred from the column sums.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        const COLUMNS: [&str; 6] = ["bin_lower", "ef_w", "p_am", "p_md", "p_pm", "p_nt"];
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let idx = crate::io::column_indices(&headers, &COLUMNS, source_name)?;
        let mut lowers = Vec::new();
        let mut efs = Vec::new();
        let mut shares = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let num = |c: usize| -> Result<f64> {
                crate::io::parse_f64(&rec[idx[c]], COLUMNS[c], source_name, line)
            };
            let lower = num(0)?;
            if lower < 0.0 || lower.fract() != 0.0 {
                return Err(Error::Parse {
                    path: source_name.into(),
                    line,
                    message: format!("bin_lower {lower} is not a non-negative integer"),
                });
            }
            lowers.push(lower as u32);
            efs.push(num(1)?);
            shares.push([num(2)?, num(3)?, num(4)?, num(5)?]);
        }
        let total: f64 = shares.iter().map(|r| r[0]).sum();
        if (total - 100.0).abs() < 1.0 {
            for row in shares.iter_mut() {
                *row = row.map(|p| p / 100.0);
            }
        }
        Self::new(&lowers, efs, shares, DEFAULT_TOD_SHARE)
    }

    pub fn bins(&self) -> &[SpeedBin] {
        &self.bins
    }

    pub fn ef_by_bin(&self, bin: usize) -> f64 {
        self.ef_by_bin[bin]
    }

    pub fn vmt_share(&self, bin: usize, tod: TimeOfDay) -> f64 {
        self.vmt_share[bin][tod.index()]
    }

    pub fn tod_share(&self, tod: TimeOfDay) -> f64 {
        self.tod_share[tod.index()]
    }

    pub fn tod_shares(&self) -> [f64; 4] {
        self.tod_share
    }

    /// Number of leading bins included for a speed limit: every bin whose
    /// lower bound is at or below the snapped limit.
    pub fn included_bins(&self, speed_limit: f64) -> Result<usize> {
        let snapped = snap_speed_limit(speed_limit)?;
        Ok(self
            .bins
            .iter()
            .take_while(|b| b.lower as f64 <= snapped)
            .count())
    }

    /// VMT-share-weighted mean factor (g CO₂e/mile) over the bins at or
    /// below `speed_limit` for period `tod`.
    pub fn weighted_ef(&self, speed_limit: f64, tod: TimeOfDay) -> Result<f64> {
        let included = self.included_bins(speed_limit)?;
        let t = tod.index();
        let (num, den) = self.vmt_share[..included]
            .iter()
            .zip(&self.ef_by_bin)
            .fold((0.0, 0.0), |(num, den), (share, ef)| {
                (num + ef * share[t], den + share[t])
            });
        if den <= 0.0 {
            return Err(Error::Domain(format!(
                "no {tod} VMT share at or below {speed_limit} mph"
            )));
        }
        Ok(num / den)
    }

    /// The normalizing share sum used by [`EfModel::weighted_ef`].
    pub fn included_share(&self, speed_limit: f64, tod: TimeOfDay) -> Result<f64> {
        let included = self.included_bins(speed_limit)?;
        Ok(self.vmt_share[..included].iter().map(|r| r[tod.index()]).sum())
    }
}

/// Snaps a speed limit to the nearest multiple of 5 mph, ties upward.
pub fn snap_speed_limit(speed_limit: f64) -> Result<f64> {
    if !speed_limit.is_finite() || speed_limit <= 0.0 {
        return Err(Error::Domain(format!(
            "speed limit must be positive, got {speed_limit}"
        )));
    }
    let w = BIN_WIDTH_MPH as f64;
    Ok((speed_limit / w + 0.5).floor() * w)
}
