//! Annual passenger-vehicle CO₂e inventories per census tract.
//!
//! Two views are computed. The consumption view charges each tract for the
//! miles its registered vehicles drive (odometer-based quarterly records),
//! priced at the emission factor of the tract's average speed limit. The
//! production view charges each tract for the traffic counted on the road
//! length lying inside it, priced at each segment's own speed limit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::ef_model::{EfModel, TimeOfDay};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::geo::{FunctionalClass, RoadSegment, SegmentTractAssignment, TractSpeedLimit};

pub const DAYS_PER_YEAR: f64 = 365.0;
pub const QUARTERS_PER_YEAR: u8 = 4;
pub const GRAMS_PER_METRIC_TON: f64 = 1e6;
/// Passenger share of VMT on the four major functional classes.
pub const PASSENGER_SHARE_MAJOR_ROADS: f64 = 0.9266;

pub const VEHICLE_CENSUS_COLUMNS: [&str; 4] =
    ["tract_id", "quarter", "dvmt_per_vehicle", "vehicle_count"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractVehicleRecord {
    pub tract_id: String,
    pub quarter: u8,
    /// Average daily VMT per vehicle, miles/day.
    pub dvmt_per_vehicle: f64,
    pub vehicle_count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Method {
    Consumption,
    Production,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Consumption => "consumption",
            Method::Production => "production",
        }
    }
}

/// Data-quality markers carried on inventory rows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Flag {
    /// Fewer than four quarterly records; holds the count present.
    MissingQuarters(u8),
    /// Tract had no road length; the dataset-wide mean limit was used.
    FallbackSpeedLimit,
    /// Segment portion dropped for lacking AADT or speed limit.
    ExcludedSegment(String),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::MissingQuarters(k) => write!(f, "quarters_present={k}"),
            Flag::FallbackSpeedLimit => f.write_str("fallback_speed_limit"),
            Flag::ExcludedSegment(id) => write!(f, "excluded_segment={id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractInventory {
    pub tract_id: String,
    /// Annual VMT per period, indexed by [`TimeOfDay::index`].
    pub annual_vmt_by_tod: [f64; 4],
    pub emissions_g: f64,
    pub method: Method,
    pub flags: Vec<Flag>,
}

impl TractInventory {
    pub fn emissions_tons(&self) -> f64 {
        self.emissions_g / GRAMS_PER_METRIC_TON
    }

    pub fn total_vmt(&self) -> f64 {
        self.annual_vmt_by_tod.iter().sum()
    }
}

/// Annual VMT per period for one tract: each quarter's daily VMT per vehicle
/// times its vehicle count, split by the period shares and scaled by the
/// 365/4 days in a quarter. Missing quarters contribute nothing.
pub fn tract_annual_vmt(records: &[TractVehicleRecord], tod_share: [f64; 4]) -> Result<[f64; 4]> {
    let mut seen = [false; QUARTERS_PER_YEAR as usize];
    let days = DAYS_PER_YEAR / QUARTERS_PER_YEAR as f64;
    let mut vmt = [0.0; 4];
    for r in records {
        validate_record(r)?;
        if records[0].tract_id != r.tract_id {
            return Err(Error::Invalid(format!(
                "records for tracts {} and {} passed together",
                records[0].tract_id, r.tract_id
            )));
        }
        let q = (r.quarter - 1) as usize;
        if std::mem::replace(&mut seen[q], true) {
            return Err(Error::Invalid(format!(
                "tract {}: duplicate record for quarter {}",
                r.tract_id, r.quarter
            )));
        }
        for (slot, share) in vmt.iter_mut().zip(tod_share) {
            *slot += r.dvmt_per_vehicle * share * r.vehicle_count * days;
        }
    }
    Ok(vmt)
}

fn validate_record(r: &TractVehicleRecord) -> Result<()> {
    if !(1..=QUARTERS_PER_YEAR).contains(&r.quarter) {
        return Err(Error::Invalid(format!(
            "tract {}: quarter {} outside 1..=4",
            r.tract_id, r.quarter
        )));
    }
    if !(r.dvmt_per_vehicle >= 0.0) || !(r.vehicle_count >= 0.0) {
        return Err(Error::Invalid(format!(
            "tract {} quarter {}: dvmt_per_vehicle and vehicle_count must be non-negative",
            r.tract_id, r.quarter
        )));
    }
    Ok(())
}

fn group_records(records: &[TractVehicleRecord]) -> BTreeMap<&str, Vec<TractVehicleRecord>> {
    let mut by_tract: BTreeMap<&str, Vec<TractVehicleRecord>> = BTreeMap::new();
    for r in records {
        by_tract.entry(r.tract_id.as_str()).or_default().push(r.clone());
    }
    by_tract
}

/// Odometer-based inventory, one row per tract with records, sorted by id.
pub fn consumption_inventory(
    records: &[TractVehicleRecord],
    tract_speed_limits: &BTreeMap<String, TractSpeedLimit>,
    ef: &EfModel,
) -> Result<Vec<TractInventory>> {
    let by_tract = group_records(records);
    let missing: Vec<&str> = by_tract
        .keys()
        .copied()
        .filter(|id| !tract_speed_limits.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Consistency(format!(
            "no speed limit for tract(s) with vehicle records: {}",
            missing.join(", ")
        )));
    }
    by_tract
        .into_iter()
        .map(|(id, recs)| {
            let vmt = tract_annual_vmt(&recs, ef.tod_shares())?;
            let limit = &tract_speed_limits[id];
            let mut emissions_g = 0.0;
            for tod in TimeOfDay::ALL {
                emissions_g += ef.weighted_ef(limit.snapped_mph, tod)? * vmt[tod.index()];
            }
            let mut flags = Vec::new();
            if recs.len() < QUARTERS_PER_YEAR as usize {
                flags.push(Flag::MissingQuarters(recs.len() as u8));
            }
            if limit.fallback {
                flags.push(Flag::FallbackSpeedLimit);
            }
            Ok(TractInventory {
                tract_id: id.to_string(),
                annual_vmt_by_tod: vmt,
                emissions_g,
                method: Method::Consumption,
                flags,
            })
        })
        .collect()
}

pub fn passenger_vmt_factor(class: FunctionalClass) -> f64 {
    match class {
        FunctionalClass::Interstate
        | FunctionalClass::PrincipalArterial
        | FunctionalClass::MinorArterial
        | FunctionalClass::MajorCollector => PASSENGER_SHARE_MAJOR_ROADS,
        FunctionalClass::Other => 1.0,
    }
}

/// Traffic-count inventory over segment portions assigned to tracts.
/// Portions whose segment lacks AADT or a speed limit are dropped and the
/// tract is flagged.
pub fn production_inventory(
    segments: &[RoadSegment],
    assignments: &[SegmentTractAssignment],
    ef: &EfModel,
) -> Result<Vec<TractInventory>> {
    let by_id: BTreeMap<&str, &RoadSegment> =
        segments.iter().map(|s| (s.segment_id.as_str(), s)).collect();
    let tod = ef.tod_shares();
    let mut rows: BTreeMap<&str, TractInventory> = BTreeMap::new();
    for a in assignments {
        let seg = by_id.get(a.segment_id.as_str()).ok_or_else(|| {
            Error::Consistency(format!("assignment references unknown segment {}", a.segment_id))
        })?;
        let row = rows.entry(a.tract_id.as_str()).or_insert_with(|| TractInventory {
            tract_id: a.tract_id.clone(),
            annual_vmt_by_tod: [0.0; 4],
            emissions_g: 0.0,
            method: Method::Production,
            flags: Vec::new(),
        });
        let (Some(aadt), Some(limit)) = (seg.aadt, seg.speed_limit) else {
            row.flags.push(Flag::ExcludedSegment(seg.segment_id.clone()));
            continue;
        };
        let annual = aadt * a.clipped_length * DAYS_PER_YEAR * passenger_vmt_factor(seg.functional_class);
        for t in TimeOfDay::ALL {
            let slice = annual * tod[t.index()];
            row.annual_vmt_by_tod[t.index()] += slice;
            row.emissions_g += ef.weighted_ef(limit, t)? * slice;
        }
    }
    Ok(rows
        .into_values()
        .map(|mut r| {
            r.flags.sort();
            r.flags.dedup();
            r
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub tract_id: String,
    pub consumption_tons: f64,
    pub production_tons: f64,
    /// production minus consumption
    pub difference_tons: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventoryComparison {
    pub rows: Vec<ComparisonRow>,
    pub consumption: Summary,
    pub production: Summary,
    pub difference: Summary,
    pub consumption_only: Vec<String>,
    pub production_only: Vec<String>,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary {
            mean: f64::NAN,
            median: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    let median = if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    };
    Summary { mean, median }
}

/// Joins the two inventories on tract id (metric tons).
pub fn compare_inventories(
    consumption: &[TractInventory],
    production: &[TractInventory],
) -> Result<InventoryComparison> {
    let cons: BTreeMap<&str, f64> = consumption
        .iter()
        .map(|r| (r.tract_id.as_str(), r.emissions_tons()))
        .collect();
    let prod: BTreeMap<&str, f64> = production
        .iter()
        .map(|r| (r.tract_id.as_str(), r.emissions_tons()))
        .collect();
    let rows: Vec<ComparisonRow> = cons
        .iter()
        .filter_map(|(id, c)| {
            prod.get(id).map(|p| ComparisonRow {
                tract_id: id.to_string(),
                consumption_tons: *c,
                production_tons: *p,
                difference_tons: p - c,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Consistency(
            "consumption and production inventories share no tracts".into(),
        ));
    }
    let col = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(InventoryComparison {
        consumption: summarize(&col(|r| r.consumption_tons)),
        production: summarize(&col(|r| r.production_tons)),
        difference: summarize(&col(|r| r.difference_tons)),
        consumption_only: cons.keys().filter(|k| !prod.contains_key(*k)).map(|k| k.to_string()).collect(),
        production_only: prod.keys().filter(|k| !cons.contains_key(*k)).map(|k| k.to_string()).collect(),
        rows,
    })
}

pub fn read_vehicle_census(path: &Path) -> Result<Vec<TractVehicleRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_vehicle_census(f, &path.display().to_string())
}

pub fn parse_vehicle_census<R: std::io::Read>(
    reader: R,
    source_name: &str,
) -> Result<Vec<TractVehicleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = crate::io::column_indices(&headers, &VEHICLE_CENSUS_COLUMNS, source_name)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let num = |c: usize| crate::io::parse_f64(&rec[idx[c]], VEHICLE_CENSUS_COLUMNS[c], source_name, line);
        let quarter = num(1)?;
        if quarter.fract() != 0.0 || !(1.0..=4.0).contains(&quarter) {
            return Err(Error::Parse {
                path: source_name.into(),
                line,
                message: format!("quarter {quarter} is not 1, 2, 3 or 4"),
            });
        }
        let r = TractVehicleRecord {
            tract_id: rec[idx[0]].to_string(),
            quarter: quarter as u8,
            dvmt_per_vehicle: num(2)?,
            vehicle_count: num(3)?,
        };
        validate_record(&r).map_err(|e| Error::Parse {
            path: source_name.into(),
            line,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_vehicle_census(records: &[TractVehicleRecord]) -> String {
    let mut s = VEHICLE_CENSUS_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.tract_id,
            r.quarter,
            sig6(r.dvmt_per_vehicle),
            sig6(r.vehicle_count)
        ));
    }
    s
}

pub const INVENTORY_CSV_HEADER: &str =
    "tract_id,method,vmt_am,vmt_md,vmt_pm,vmt_nt,emissions_tons,flags";

pub fn inventory_csv(rows: &[TractInventory]) -> String {
    let mut s = String::from(INVENTORY_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let flags: Vec<String> = r.flags.iter().map(|f| f.to_string()).collect();
        let v = r.annual_vmt_by_tod;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.tract_id,
            r.method.as_str(),
            sig6(v[0]),
            sig6(v[1]),
            sig6(v[2]),
            sig6(v[3]),
            sig6(r.emissions_tons()),
            flags.join(";")
        ));
    }
    s
}

pub fn comparison_csv(c: &InventoryComparison) -> String {
    let mut s = String::from("tract_id,consumption_tons,production_tons,difference_tons\n");
    for r in &c.rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.tract_id,
            sig6(r.consumption_tons),
            sig6(r.production_tons),
            sig6(r.difference_tons)
        ));
    }
    s
}

pub fn comparison_summary_csv(c: &InventoryComparison) -> String {
    format!(
        "statistic,consumption_tons,production_tons,difference_tons\nmean,{},{},{}\nmedian,{},{},{}\n",
        sig6(c.consumption.mean),
        sig6(c.production.mean),
        sig6(c.difference.mean),
        sig6(c.consumption.median),
        sig6(c.production.median),
        sig6(c.difference.median),
    )
}
