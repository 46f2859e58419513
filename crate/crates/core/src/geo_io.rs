//! GeoJSON ingestion of tract polygons and road polylines, and emission of
//! tract layers with joined attributes.

use std::collections::BTreeMap;
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, JsonValue, Value};

use crate::error::{Error, Result};
use crate::geo::{FunctionalClass, Point, Polygon, RoadSegment, TractGeometry};

pub const ROAD_PROPERTIES: [&str; 5] =
    ["segment_id", "speed_limit", "aadt", "functional_class", "length_mi"];

fn parse_collection(text: &str, source_name: &str) -> Result<Vec<Feature>> {
    let gj: GeoJson = text
        .parse()
        .map_err(|e| Error::GeoJson(format!("{source_name}: {e}")))?;
    match gj {
        GeoJson::FeatureCollection(fc) => Ok(fc.features),
        GeoJson::Feature(f) => Ok(vec![f]),
        GeoJson::Geometry(_) => Err(Error::GeoJson(format!(
            "{source_name}: expected a FeatureCollection, found a bare geometry"
        ))),
    }
}

fn to_point(pos: &[f64]) -> Result<Point> {
    match pos {
        [x, y, ..] => Ok(Point::new(*x, *y)),
        _ => Err(Error::GeoJson(format!("position {pos:?} has fewer than two ordinates"))),
    }
}

fn to_ring(ring: &[Vec<f64>]) -> Result<Vec<Point>> {
    ring.iter().map(|p| to_point(p)).collect()
}

fn to_polygon(rings: &[Vec<Vec<f64>>]) -> Result<Polygon> {
    Ok(Polygon::new(rings.iter().map(|r| to_ring(r)).collect::<Result<_>>()?))
}

fn property_string(f: &Feature, key: &str) -> Option<String> {
    match f.property(key)? {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn property_f64(f: &Feature, key: &str, source_name: &str, index: usize) -> Result<Option<f64>> {
    match f.property(key) {
        None | Some(JsonValue::Null) => Ok(None),
        Some(JsonValue::Number(n)) => Ok(n.as_f64()),
        Some(JsonValue::String(s)) if s.trim().is_empty() => Ok(None),
        Some(JsonValue::String(s)) => s.trim().parse().map(Some).map_err(|_| {
            Error::GeoJson(format!("{source_name}: feature {index}: {key} {s:?} is not a number"))
        }),
        Some(other) => Err(Error::GeoJson(format!(
            "{source_name}: feature {index}: {key} has non-numeric value {other}"
        ))),
    }
}

fn require_keys(features: &[Feature], keys: &[&str], source_name: &str) -> Result<()> {
    let mut missing: Vec<String> = keys
        .iter()
        .filter(|k| features.iter().any(|f| !f.contains_property(k)))
        .map(|k| k.to_string())
        .collect();
    missing.dedup();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Schema {
            source_name: source_name.to_string(),
            columns: missing,
        })
    }
}

pub fn read_tracts(path: &Path) -> Result<Vec<TractGeometry>> {
    let text = crate::io::read_to_string(path)?;
    parse_tracts(&text, &path.display().to_string())
}

/// Polygon / MultiPolygon features keyed by the `tract_id` property.
pub fn parse_tracts(text: &str, source_name: &str) -> Result<Vec<TractGeometry>> {
    let features = parse_collection(text, source_name)?;
    require_keys(&features, &["tract_id"], source_name)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut tracts = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = property_string(f, "tract_id").ok_or_else(|| {
            Error::GeoJson(format!("{source_name}: feature {i}: tract_id must be a string or number"))
        })?;
        let polygons = match f.geometry.as_ref().map(|g| &g.value) {
            Some(Value::Polygon(rings)) => vec![to_polygon(rings)?],
            Some(Value::MultiPolygon(polys)) => {
                polys.iter().map(|p| to_polygon(p)).collect::<Result<_>>()?
            }
            _ => {
                return Err(Error::GeoJson(format!(
                    "{source_name}: tract {id}: geometry must be Polygon or MultiPolygon"
                )))
            }
        };
        if !seen.insert(id.clone()) {
            return Err(Error::Consistency(format!("{source_name}: duplicate tract_id {id}")));
        }
        tracts.push(TractGeometry::new(id, polygons));
    }
    Ok(tracts)
}

pub fn read_roads(path: &Path) -> Result<Vec<RoadSegment>> {
    let text = crate::io::read_to_string(path)?;
    parse_roads(&text, &path.display().to_string())
}

/// LineString features carrying the road-inventory attributes. Null
/// `speed_limit`/`aadt` are kept as missing and flagged downstream.
pub fn parse_roads(text: &str, source_name: &str) -> Result<Vec<RoadSegment>> {
    let features = parse_collection(text, source_name)?;
    require_keys(&features, &ROAD_PROPERTIES, source_name)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut roads = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = property_string(f, "segment_id").ok_or_else(|| {
            Error::GeoJson(format!("{source_name}: feature {i}: segment_id must be a string or number"))
        })?;
        let polyline = match f.geometry.as_ref().map(|g| &g.value) {
            Some(Value::LineString(pts)) => to_ring(pts)?,
            _ => {
                return Err(Error::GeoJson(format!(
                    "{source_name}: segment {id}: geometry must be LineString"
                )))
            }
        };
        let class = property_string(f, "functional_class")
            .ok_or_else(|| {
                Error::GeoJson(format!("{source_name}: segment {id}: functional_class must be a string"))
            })?
            .parse::<FunctionalClass>()?;
        let length = property_f64(f, "length_mi", source_name, i)?.ok_or_else(|| {
            Error::GeoJson(format!("{source_name}: segment {id}: length_mi is required"))
        })?;
        if !seen.insert(id.clone()) {
            return Err(Error::Consistency(format!("{source_name}: duplicate segment_id {id}")));
        }
        let seg = RoadSegment {
            segment_id: id,
            polyline,
            speed_limit: property_f64(f, "speed_limit", source_name, i)?,
            aadt: property_f64(f, "aadt", source_name, i)?,
            functional_class: class,
            length,
        };
        seg.validate()?;
        roads.push(seg);
    }
    Ok(roads)
}

fn positions(ring: &[Point]) -> Vec<Vec<f64>> {
    ring.iter().map(|p| vec![p.x, p.y]).collect()
}

fn tract_geometry(t: &TractGeometry) -> Geometry {
    let polys: Vec<Vec<Vec<Vec<f64>>>> = t
        .polygons
        .iter()
        .map(|p| p.rings.iter().map(|r| positions(r)).collect())
        .collect();
    let value = if polys.len() == 1 {
        Value::Polygon(polys.into_iter().next().expect("one polygon"))
    } else {
        Value::MultiPolygon(polys)
    };
    Geometry::new(value)
}

fn feature(geometry: Geometry, properties: JsonObject) -> Feature {
    Feature {
        bbox: None,
        geometry: Some(geometry),
        id: None,
        properties: Some(properties),
        foreign_members: None,
    }
}

fn to_text(features: Vec<Feature>) -> String {
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    };
    let mut s = serde_json::to_string_pretty(&fc).expect("geojson serializes");
    s.push('\n');
    s
}

/// Tract polygons with `tract_id` plus whatever attributes `props` carries
/// for that tract, in input order.
pub fn write_tract_layer(
    tracts: &[TractGeometry],
    props: &BTreeMap<String, JsonObject>,
) -> String {
    let features = tracts
        .iter()
        .map(|t| {
            let mut p = JsonObject::new();
            p.insert("tract_id".into(), JsonValue::String(t.tract_id.clone()));
            if let Some(extra) = props.get(&t.tract_id) {
                for (k, v) in extra {
                    p.insert(k.clone(), v.clone());
                }
            }
            feature(tract_geometry(t), p)
        })
        .collect();
    to_text(features)
}

pub fn write_roads(roads: &[RoadSegment]) -> String {
    let features = roads
        .iter()
        .map(|r| {
            let mut p = JsonObject::new();
            p.insert("segment_id".into(), JsonValue::String(r.segment_id.clone()));
            p.insert("speed_limit".into(), r.speed_limit.into());
            p.insert("aadt".into(), r.aadt.into());
            p.insert("functional_class".into(), r.functional_class.as_str().into());
            p.insert("length_mi".into(), r.length.into());
            feature(Geometry::new(Value::LineString(positions(&r.polyline))), p)
        })
        .collect();
    to_text(features)
}
