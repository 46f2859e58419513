//! Seeded synthetic datasets: a square tract lattice with roads, vehicle
//! census records, and a covariate panel whose outcome follows a spatial
//! lag/error process with known parameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::econometrics::panel::{Design, TractPanel, INTERCEPT};
use crate::econometrics::spatial::solve_ar;
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::geo::{FunctionalClass, Point, Polygon, RoadSegment, TractGeometry};
use crate::inventory::TractVehicleRecord;
use crate::weights::{build_weights, Scheme, SpatialWeights};

pub const DEFAULT_SIDE: usize = 20;
pub const DEFAULT_SCHEME: Scheme = Scheme::Knn(8);
pub const OUTCOME: &str = "log_vmt";
/// Region whose tracts carry `mapc = 1`.
pub const MAPC_REGION: &str = "R1";

/// Covariates of the synthetic panel, in design order after the intercept.
pub const COVARIATES: [&str; 5] = ["w_carpool", "w_pubtrans", "log_pop_density", "mapc", "w_carpool:mapc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Tracts per lattice side; `n = side²`.
    pub side: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// Intercept followed by one coefficient per entry of [`COVARIATES`].
    pub beta: Vec<f64>,
    pub scheme: Scheme,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            side: DEFAULT_SIDE,
            gamma: 0.679,
            lambda: 0.0,
            sigma: 0.1,
            beta: vec![3.0, 0.8, -1.2, -0.3, 0.1, -1.0],
            scheme: DEFAULT_SCHEME,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.side < 3 {
            return Err(Error::Invalid("synthetic lattice side must be at least 3".into()));
        }
        if self.beta.len() != COVARIATES.len() + 1 {
            return Err(Error::Invalid(format!(
                "beta needs {} entries (intercept first)",
                COVARIATES.len() + 1
            )));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v.abs() < 1.0) {
                return Err(Error::Domain(format!("{name} {v} must lie in (-1, 1)")));
            }
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Domain("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters the panel was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub n: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub beta: Vec<(String, f64)>,
    pub weights: String,
    pub formula: String,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub tracts: Vec<TractGeometry>,
    pub region_of: Vec<String>,
    pub roads: Vec<RoadSegment>,
    pub census: Vec<TractVehicleRecord>,
    pub panel: TractPanel,
    pub weights: SpatialWeights,
    /// Intercept-first design matching the panel rows.
    pub design: Design,
    pub truth: Truth,
}

pub fn formula() -> String {
    format!("{OUTCOME} ~ {}", COVARIATES.join(" + "))
}

fn rounded(x: f64) -> f64 {
    sig6(x).parse().expect("sig6 output parses")
}

pub fn tract_id(row: usize, col: usize) -> String {
    format!("T{row:03}{col:03}")
}

/// Unit-square tracts, row-major from the origin, in four quadrant regions.
pub fn lattice(side: usize) -> (Vec<TractGeometry>, Vec<String>) {
    let half = side.div_ceil(2);
    let mut tracts = Vec::with_capacity(side * side);
    let mut regions = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let (x, y) = (c as f64, r as f64);
            tracts.push(TractGeometry::new(tract_id(r, c), vec![Polygon::rect(x, y, x + 1.0, y + 1.0)]));
            let q = 1 + usize::from(c >= half) + 2 * usize::from(r >= half);
            regions.push(format!("R{q}"));
        }
    }
    (tracts, regions)
}

const ROAD_CLASSES: [(FunctionalClass, f64, f64, f64); 5] = [
    (FunctionalClass::Interstate, 65.0, 40_000.0, 90_000.0),
    (FunctionalClass::PrincipalArterial, 45.0, 15_000.0, 40_000.0),
    (FunctionalClass::MinorArterial, 35.0, 8_000.0, 20_000.0),
    (FunctionalClass::MajorCollector, 30.0, 3_000.0, 10_000.0),
    (FunctionalClass::Other, 25.0, 500.0, 3_000.0),
];

/// One east-west road per lattice row and one north-south road per column,
/// through tract centers; class cycles with the index.
fn roads(side: usize, rng: &mut ChaCha8Rng) -> Vec<RoadSegment> {
    let len = side as f64;
    let mut out = Vec::with_capacity(2 * side);
    for (prefix, horizontal) in [("H", true), ("V", false)] {
        for i in 0..side {
            let (class, limit, lo, hi) = ROAD_CLASSES[i % ROAD_CLASSES.len()];
            let at = i as f64 + 0.5;
            let polyline = if horizontal {
                vec![Point::new(0.0, at), Point::new(len, at)]
            } else {
                vec![Point::new(at, 0.0), Point::new(at, len)]
            };
            out.push(RoadSegment {
                segment_id: format!("{prefix}{i:03}"),
                polyline,
                speed_limit: Some(limit),
                aadt: Some(rng.random_range(lo..hi).round()),
                functional_class: class,
                length: len,
            });
        }
    }
    out
}

fn census(tracts: &[TractGeometry], rng: &mut ChaCha8Rng) -> Vec<TractVehicleRecord> {
    let mut out = Vec::with_capacity(tracts.len() * 4);
    for t in tracts {
        let base: f64 = rng.random_range(22.0..40.0);
        let count = rng.random_range(300..2000) as f64;
        for quarter in 1..=4u8 {
            out.push(TractVehicleRecord {
                tract_id: t.tract_id.clone(),
                quarter,
                dvmt_per_vehicle: rounded(base + rng.random_range(-1.5..1.5)),
                vehicle_count: count,
            });
        }
    }
    out
}

/// Covariate matrix `[1, COVARIATES]` for the lattice tracts.
fn covariates(regions: &[String], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = regions.len();
    let carpool = Uniform::new(0.02, 0.15).expect("valid range");
    let transit = Uniform::new(0.0, 0.3).expect("valid range");
    let density = Normal::new(7.5, 1.0).expect("valid normal");
    let mut x = DMatrix::zeros(n, COVARIATES.len() + 1);
    for r in 0..n {
        let mapc = f64::from(u8::from(regions[r] == MAPC_REGION));
        let cp = rounded(carpool.sample(rng));
        x[(r, 0)] = 1.0;
        x[(r, 1)] = cp;
        x[(r, 2)] = rounded(transit.sample(rng));
        x[(r, 3)] = rounded(density.sample(rng));
        x[(r, 4)] = mapc;
        x[(r, 5)] = cp * mapc;
    }
    x
}

/// One draw of `y = (I − γW)^{-1}(Xβ + (I − λW)^{-1} ε)`, `ε ~ N(0, σ²)`.
pub fn sarar_outcome(
    w: &SpatialWeights,
    x: &DMatrix<f64>,
    beta: &[f64],
    gamma: f64,
    lambda: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let eps = DVector::from_fn(x.nrows(), |_, _| normal.sample(rng));
    let u = solve_ar(w, lambda, &eps)?;
    let xb = x * DVector::from_column_slice(beta);
    solve_ar(w, gamma, &(xb + u))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (tracts, region_of) = lattice(cfg.side);
    let roads = roads(cfg.side, &mut rng);
    let census = census(&tracts, &mut rng);
    let ids: Vec<String> = tracts.iter().map(|t| t.tract_id.clone()).collect();
    let centroids: Vec<Point> = tracts.iter().map(|t| t.centroid).collect();
    let weights = build_weights(&ids, &centroids, cfg.scheme)?;
    let x = covariates(&region_of, &mut rng);
    let y = sarar_outcome(&weights, &x, &cfg.beta, cfg.gamma, cfg.lambda, cfg.sigma, &mut rng)?
        .map(rounded);

    let n = ids.len();
    let mut columns = vec![
        ("tract_id".to_string(), ids.clone()),
        ("region_id".to_string(), region_of.clone()),
        ("centroid_x".to_string(), centroids.iter().map(|p| sig6(p.x)).collect()),
        ("centroid_y".to_string(), centroids.iter().map(|p| sig6(p.y)).collect()),
        (OUTCOME.to_string(), y.iter().map(|v| sig6(*v)).collect()),
    ];
    // the interaction is derived at design time, not stored
    for (c, name) in COVARIATES.iter().enumerate().filter(|(_, n)| !n.contains(':')) {
        columns.push((name.to_string(), (0..n).map(|r| sig6(x[(r, c + 1)])).collect()));
    }
    let panel = TractPanel::from_columns("synthetic panel", columns)?;
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(COVARIATES.iter().map(|s| s.to_string()));
    let design = Design::from_matrices(y, x, names.clone())?.with_groups(&region_of)?;
    let design = Design {
        outcome: OUTCOME.to_string(),
        ..design
    };
    let truth = Truth {
        seed: cfg.seed,
        n,
        gamma: cfg.gamma,
        lambda: cfg.lambda,
        sigma: cfg.sigma,
        beta: names.into_iter().zip(cfg.beta.iter().copied()).collect(),
        weights: cfg.scheme.to_string(),
        formula: formula(),
    };
    Ok(SynthDataset {
        tracts,
        region_of,
        roads,
        census,
        panel,
        weights,
        design,
        truth,
    })
}
