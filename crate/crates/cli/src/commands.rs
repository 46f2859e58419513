//! Subcommand bodies. Each reads its inputs through [`RunConfig`], computes,
//! then writes every output atomically.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};
use tractghg::econometrics::panel::DEFAULT_GROUP_COLUMN;
use tractghg::econometrics::{
    self, build_design, compare_models, comparison_csv, fit_table, Comparison, ComparisonRow, Design,
    Estimator, FailedFit, ModelFit, ModelSpec, TractPanel,
};
use tractghg::ef_model::{load_default_ef_model, EfModel};
use tractghg::format::sig6;
use tractghg::geo::{assign_segments, fill_roadless_tracts, tract_avg_speed_limit, Point, TractGeometry};
use tractghg::inventory::{self, TractInventory};
use tractghg::io::write_atomic;
use tractghg::scenario::read_scenario;
use tractghg::synth::{self, SynthConfig};
use tractghg::weights::{build_weights, Scheme, SpatialWeights};
use tractghg::{geo_io, Error, Result};

use crate::config::RunConfig;
use crate::InventoryMethod;

pub const DEFAULT_SCHEME: &str = "knn:8";
pub const CONFIG_FILE_NAME: &str = "tractghg.conf";

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// A number rounded to six significant digits, as JSON.
fn num6(x: f64) -> Value {
    sig6(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

fn scheme(cfg: &RunConfig) -> Result<Scheme> {
    cfg.get("weights").unwrap_or(DEFAULT_SCHEME).parse()
}

fn method(cfg: &RunConfig) -> Result<InventoryMethod> {
    match cfg.get("method").unwrap_or("both") {
        "consumption" => Ok(InventoryMethod::Consumption),
        "production" => Ok(InventoryMethod::Production),
        "both" => Ok(InventoryMethod::Both),
        other => Err(Error::Invalid(format!(
            "method {other:?}: expected consumption, production or both"
        ))),
    }
}

pub fn inventory(cfg: &RunConfig) -> Result<()> {
    let method = method(cfg)?;
    let tracts = geo_io::read_tracts(&cfg.input("tracts")?)?;
    let roads = geo_io::read_roads(&cfg.input("roads")?)?;
    let census = match method {
        InventoryMethod::Production => None,
        _ => Some(inventory::read_vehicle_census(&cfg.input("census")?)?),
    };
    let ef = match cfg.path("ef_model") {
        Some(_) => EfModel::from_csv_path(&cfg.input("ef_model")?)?,
        None => load_default_ef_model(),
    };
    let out = cfg.out_dir()?;

    let overlay = assign_segments(&tracts, &roads)?;
    for w in &overlay.warnings {
        log::warn!("{w:?}");
    }
    if !overlay.unassigned.is_empty() {
        log::warn!(
            "{} segment(s) intersect no tract: {}",
            overlay.unassigned.len(),
            overlay.unassigned.join(", ")
        );
    }
    let mut limits = tract_avg_speed_limit(&overlay.assignments, &roads)?;
    fill_roadless_tracts(&mut limits, tracts.iter().map(|t| t.tract_id.as_str()))?;

    let consumption = census
        .map(|records| inventory::consumption_inventory(&records, &limits, &ef))
        .transpose()?;
    let production = match method {
        InventoryMethod::Consumption => None,
        _ => Some(inventory::production_inventory(&roads, &overlay.assignments, &ef)?),
    };
    let comparison = match (&consumption, &production) {
        (Some(c), Some(p)) => Some(inventory::compare_inventories(c, p)?),
        _ => None,
    };

    let mut props: BTreeMap<String, Map<String, Value>> = BTreeMap::new();
    for (id, l) in &limits {
        let p = props.entry(id.clone()).or_default();
        p.insert("speed_limit_mph".into(), num6(l.snapped_mph));
        p.insert("speed_limit_fallback".into(), Value::Bool(l.fallback));
    }
    let mut add = |rows: &[TractInventory], key: &str| {
        for r in rows {
            props
                .entry(r.tract_id.clone())
                .or_default()
                .insert(key.into(), num6(r.emissions_tons()));
        }
    };
    if let Some(c) = &consumption {
        add(c, "consumption_tons");
    }
    if let Some(p) = &production {
        add(p, "production_tons");
    }

    if let Some(c) = &consumption {
        write(&out, "inventory_consumption.csv", &inventory::inventory_csv(c))?;
        println!("consumption: {} tracts, {} t", c.len(), sig6(total_tons(c)));
    }
    if let Some(p) = &production {
        write(&out, "inventory_production.csv", &inventory::inventory_csv(p))?;
        println!("production: {} tracts, {} t", p.len(), sig6(total_tons(p)));
    }
    if let Some(c) = &comparison {
        write(&out, "comparison.csv", &inventory::comparison_csv(c))?;
        write(&out, "comparison_summary.csv", &inventory::comparison_summary_csv(c))?;
        println!(
            "mean difference (production - consumption): {} t, median {} t",
            sig6(c.difference.mean),
            sig6(c.difference.median)
        );
    }
    write(&out, "inventory.geojson", &geo_io::write_tract_layer(&tracts, &props))
}

fn total_tons(rows: &[TractInventory]) -> f64 {
    rows.iter().map(TractInventory::emissions_tons).sum()
}

fn model_spec(cfg: &RunConfig) -> Result<ModelSpec> {
    if let Some(f) = cfg.get("formula") {
        return ModelSpec::parse(f);
    }
    if cfg.get("model_spec").is_some() {
        let text = tractghg::io::read_to_string(&cfg.input("model_spec")?)?;
        return ModelSpec::from_file_text(&text);
    }
    Err(Error::Invalid("no model configured (--formula or --model-spec)".into()))
}

fn estimators(cfg: &RunConfig) -> Result<Vec<Estimator>> {
    let Some(list) = cfg.get("estimators") else {
        return Ok(Estimator::ALL.to_vec());
    };
    let mut out: Vec<Estimator> = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let e: Estimator = name.parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("estimators list is empty".into()));
    }
    Ok(out)
}

/// Centroids for the given panel rows: the panel's own centroid columns
/// when present, otherwise the configured tract polygons.
fn centroids(cfg: &RunConfig, panel: &TractPanel, rows: &[usize]) -> Result<(Vec<String>, Vec<Point>)> {
    let ids: Vec<String> = rows.iter().map(|&r| panel.ids().map(|ids| ids[r].clone())).collect::<Result<_>>()?;
    if panel.has_column("centroid_x") && panel.has_column("centroid_y") {
        let xs = panel.numeric("centroid_x")?;
        let ys = panel.numeric("centroid_y")?;
        let pts = rows
            .iter()
            .map(|&r| match (xs[r], ys[r]) {
                (Some(x), Some(y)) => Ok(Point::new(x, y)),
                _ => Err(Error::Invalid(format!("tract {}: missing centroid", panel.ids()?[r]))),
            })
            .collect::<Result<_>>()?;
        return Ok((ids, pts));
    }
    if cfg.get("tracts").is_none() {
        return Err(Error::Invalid(
            "spatial weights need centroid_x/centroid_y panel columns or a tracts file".into(),
        ));
    }
    let tracts = geo_io::read_tracts(&cfg.input("tracts")?)?;
    let by_id: BTreeMap<&str, &TractGeometry> = tracts.iter().map(|t| (t.tract_id.as_str(), t)).collect();
    let pts = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|t| t.centroid)
                .ok_or_else(|| Error::Consistency(format!("panel tract {id} has no polygon in the tracts file")))
        })
        .collect::<Result<_>>()?;
    Ok((ids, pts))
}

fn weights_for(cfg: &RunConfig, panel: &TractPanel, rows: &[usize]) -> Result<SpatialWeights> {
    let (ids, pts) = centroids(cfg, panel, rows)?;
    let w = build_weights(&ids, &pts, scheme(cfg)?)?;
    if !w.islands().is_empty() {
        log::warn!("{} tract(s) have no neighbors under {}", w.islands().len(), w.scheme);
    }
    Ok(w)
}

fn comparison(fits: &[ModelFit], failed: Vec<FailedFit>) -> Result<Comparison> {
    let c = match fits {
        [] => Comparison {
            rows: Vec::new(),
            failed: Vec::new(),
        },
        [f] => Comparison {
            rows: vec![ComparisonRow {
                rank: 1,
                estimator: f.estimator,
                mse: f.mse,
                r2: f.r2,
                r2_kind: f.r2_kind,
            }],
            failed: Vec::new(),
        },
        _ => compare_models(fits)?,
    };
    Ok(c.with_failures(failed))
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let panel = TractPanel::read_csv(&cfg.input("panel")?)?;
    let spec = model_spec(cfg)?;
    let estimators = estimators(cfg)?;
    let group = match cfg.get("group") {
        Some(g) => Some(g),
        None if panel.has_column(DEFAULT_GROUP_COLUMN) => Some(DEFAULT_GROUP_COLUMN),
        None => None,
    };
    let design = build_design(&panel, &spec, group)?;
    let out = cfg.out_dir()?;
    let w = if estimators.iter().any(|e| e.is_spatial()) {
        Some(weights_for(cfg, &panel, &design.rows)?)
    } else {
        None
    };

    let results = fit_all(&estimators, &design, w.as_ref());
    let mut fits = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (est, r) in estimators.iter().zip(results) {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => {
                log::warn!("{est} failed: {e}");
                failed.push(FailedFit {
                    estimator: *est,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if fits.is_empty() {
        return Err(first_error.expect("at least one estimator ran"));
    }
    for f in &fits {
        write(&out, &format!("fit_{}.json", f.estimator), &f.to_json()?)?;
    }
    let c = comparison(&fits, failed)?;
    write(&out, "comparison.csv", &comparison_csv(&c)?)?;
    write(&out, "fit_table.txt", &fit_table(&fits))?;
    print!("{}", comparison_csv(&c)?);
    Ok(())
}

/// Runs the estimators concurrently; results come back in input order.
fn fit_all(estimators: &[Estimator], design: &Design, w: Option<&SpatialWeights>) -> Vec<Result<ModelFit>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = estimators
            .iter()
            .map(|&e| s.spawn(move || econometrics::fit(e, design, w)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("estimator thread panicked"))
            .collect()
    })
}

pub fn scenario(cfg: &RunConfig) -> Result<()> {
    let fit_path = cfg.input("fit")?;
    let fit = ModelFit::from_json(&tractghg::io::read_to_string(&fit_path)?)?;
    let spec = read_scenario(&cfg.input("scenario")?)?;
    let result = spec.run(&fit)?;
    let out = cfg.out_dir()?;
    write(&out, "scenario.json", &result.to_json()?)?;
    print!("{result}");
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let d = SynthConfig::default();
    let sc = SynthConfig {
        seed: cfg.number("seed")?.unwrap_or(d.seed),
        side: cfg.number("side")?.unwrap_or(d.side),
        gamma: cfg.number("gamma")?.unwrap_or(d.gamma),
        lambda: cfg.number("lambda")?.unwrap_or(d.lambda),
        sigma: cfg.number("sigma")?.unwrap_or(d.sigma),
        scheme: match cfg.get("weights") {
            Some(s) => s.parse()?,
            None => d.scheme,
        },
        ..d
    };
    let data = synth::generate(&sc)?;
    let out = cfg.out_dir()?;
    let regions: BTreeMap<String, Map<String, Value>> = data
        .tracts
        .iter()
        .zip(&data.region_of)
        .map(|(t, r)| {
            let mut p = Map::new();
            p.insert("region_id".into(), Value::String(r.clone()));
            (t.tract_id.clone(), p)
        })
        .collect();
    write(&out, "tracts.geojson", &geo_io::write_tract_layer(&data.tracts, &regions))?;
    write(&out, "roads.geojson", &geo_io::write_roads(&data.roads))?;
    write(&out, "vehicle_census.csv", &inventory::write_vehicle_census(&data.census))?;
    write(&out, "panel.csv", &data.panel.to_csv())?;
    let mut truth = serde_json::to_string_pretty(&data.truth)?;
    truth.push('\n');
    write(&out, "truth.json", &truth)?;
    write(&out, "weights.txt", &data.weights.to_text())?;
    write(&out, "model.txt", &format!("{}\n", data.truth.formula))?;
    let conf = format!(
        "# synthetic run, seed {seed}\n\
         tracts = tracts.geojson\n\
         roads = roads.geojson\n\
         census = vehicle_census.csv\n\
         panel = panel.csv\n\
         model_spec = model.txt\n\
         weights = {scheme}\n\
         out_dir = results\n",
        seed = sc.seed,
        scheme = sc.scheme,
    );
    write(&out, CONFIG_FILE_NAME, &conf)?;
    println!(
        "synthetic lattice: {} tracts, gamma {}, lambda {}, seed {}",
        data.truth.n, sc.gamma, sc.lambda, sc.seed
    );
    Ok(())
}

pub fn weights_export(cfg: &RunConfig) -> Result<()> {
    let (ids, pts) = if cfg.get("panel").is_some() {
        let panel = TractPanel::read_csv(&cfg.input("panel")?)?;
        let rows: Vec<usize> = (0..panel.nrows()).collect();
        centroids(cfg, &panel, &rows)?
    } else {
        let tracts = geo_io::read_tracts(&cfg.input("tracts")?)?;
        (
            tracts.iter().map(|t| t.tract_id.clone()).collect(),
            tracts.iter().map(|t| t.centroid).collect(),
        )
    };
    let w = build_weights(&ids, &pts, scheme(cfg)?)?;
    let out = cfg.out_dir()?;
    write(&out, "weights.txt", &w.to_text())?;
    println!("{}: {} tracts, {} links", w.scheme, w.n, w.nnz());
    Ok(())
}
