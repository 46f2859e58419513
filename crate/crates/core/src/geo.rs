//! Planar overlay of road polylines on census-tract polygons.
//!
//! Coordinates are assumed to be in an already-projected, length-preserving
//! planar system. Each road segment is clipped against every tract whose
//! bounding box it touches; the arc length falling inside a tract is turned
//! into a share of the segment's declared (surveyed) length.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ef_model::snap_speed_limit;
use crate::error::{Error, Result};

/// Allowed relative disagreement between declared length and arc length.
pub const LENGTH_AGREEMENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn translate(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    fn of<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    fn intersects(&self, o: &BBox) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

/// One polygon: the first ring is the shell, any further rings are holes.
/// Rings are stored closed (first point repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<Point>>) -> Self {
        let rings = rings
            .into_iter()
            .map(|mut r| {
                if r.first() != r.last() {
                    if let Some(&f) = r.first() {
                        r.push(f);
                    }
                }
                r
            })
            .collect();
        Self { rings }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]])
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }
}

fn ring_area_and_moment(ring: &[Point]) -> (f64, f64, f64) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    // relative to the first vertex to limit cancellation
    let o = ring[0];
    for w in ring.windows(2) {
        let (p, q) = (w[0].translate(-o.x, -o.y), w[1].translate(-o.x, -o.y));
        let cross = p.x * q.y - q.x * p.y;
        a += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = a / 2.0;
    if area == 0.0 {
        return (0.0, o.x, o.y);
    }
    (area, cx / (6.0 * area) + o.x, cy / (6.0 * area) + o.y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TractGeometry {
    pub tract_id: String,
    pub polygons: Vec<Polygon>,
    pub centroid: Point,
}

impl TractGeometry {
    /// Builds a tract and derives its area-weighted centroid.
    pub fn new(tract_id: impl Into<String>, polygons: Vec<Polygon>) -> Self {
        let mut t = Self {
            tract_id: tract_id.into(),
            polygons,
            centroid: Point::new(0.0, 0.0),
        };
        let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
        for poly in &t.polygons {
            for (i, ring) in poly.rings.iter().enumerate().filter(|(_, r)| r.len() >= 4) {
                let (a, cx, cy) = ring_area_and_moment(ring);
                // shells count positive, holes negative, whatever the winding
                let a = if i == 0 { a.abs() } else { -a.abs() };
                area += a;
                mx += a * cx;
                my += a * cy;
            }
        }
        if area != 0.0 {
            t.centroid = Point::new(mx / area, my / area);
        }
        t
    }

    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .flat_map(|p| p.rings.iter().enumerate())
            .filter(|(_, r)| r.len() >= 4)
            .map(|(i, r)| {
                let a = ring_area_and_moment(r).0.abs();
                if i == 0 {
                    a
                } else {
                    -a
                }
            })
            .sum()
    }

    fn bbox(&self) -> Option<BBox> {
        BBox::of(self.polygons.iter().flat_map(|p| p.rings.first()).flatten())
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polygons.iter().flat_map(|p| p.edges())
    }

    /// Even-odd point-in-polygon over every ring of every part.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            tract_id: self.tract_id.clone(),
            polygons: self
                .polygons
                .iter()
                .map(|p| Polygon {
                    rings: p
                        .rings
                        .iter()
                        .map(|r| r.iter().map(|q| q.translate(dx, dy)).collect())
                        .collect(),
                })
                .collect(),
            centroid: self.centroid.translate(dx, dy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionalClass {
    Interstate,
    PrincipalArterial,
    MinorArterial,
    MajorCollector,
    Other,
}

impl FunctionalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FunctionalClass::Interstate => "Interstate",
            FunctionalClass::PrincipalArterial => "PrincipalArterial",
            FunctionalClass::MinorArterial => "MinorArterial",
            FunctionalClass::MajorCollector => "MajorCollector",
            FunctionalClass::Other => "Other",
        }
    }
}

impl fmt::Display for FunctionalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionalClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "interstate" => FunctionalClass::Interstate,
            "principalarterial" => FunctionalClass::PrincipalArterial,
            "minorarterial" => FunctionalClass::MinorArterial,
            "majorcollector" => FunctionalClass::MajorCollector,
            "other" | "local" | "minorcollector" => FunctionalClass::Other,
            _ => {
                return Err(Error::Invalid(format!("unknown functional class {s:?}")));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub segment_id: String,
    pub polyline: Vec<Point>,
    /// mph; `None` when the inventory lacks it.
    pub speed_limit: Option<f64>,
    /// vehicles/day; `None` when the inventory lacks it.
    pub aadt: Option<f64>,
    pub functional_class: FunctionalClass,
    /// Declared length in miles. Authoritative for VMT.
    pub length: f64,
}

impl RoadSegment {
    pub fn arc_length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("segment {}: {m}", self.segment_id)));
        if self.polyline.len() < 2 {
            return bad("polyline needs at least two points".into());
        }
        if !(self.length > 0.0) {
            return bad(format!("length {} must be positive", self.length));
        }
        if let Some(a) = self.aadt {
            if !(a >= 0.0) {
                return bad(format!("aadt {a} must be non-negative"));
            }
        }
        if let Some(s) = self.speed_limit {
            if !(s > 0.0 && s <= 80.0) {
                return bad(format!("speed limit {s} outside (0, 80]"));
            }
        }
        Ok(())
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            polyline: self.polyline.iter().map(|p| p.translate(dx, dy)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentTractAssignment {
    pub segment_id: String,
    pub tract_id: String,
    /// miles
    pub clipped_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeoWarning {
    DegenerateTract { tract_id: String },
    LengthMismatch { segment_id: String, declared: f64, arc: f64 },
    OverlappingTracts { segment_id: String, covered_fraction: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct Overlay {
    /// Sorted by (segment_id, tract_id).
    pub assignments: Vec<SegmentTractAssignment>,
    /// Segments that touch no tract.
    pub unassigned: Vec<String>,
    pub warnings: Vec<GeoWarning>,
}

#[derive(Debug, Clone, Copy)]
pub struct OverlayOptions {
    /// Coordinate units per mile, used only for the declared-vs-arc check.
    pub units_per_mile: f64,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        Self { units_per_mile: 1.0 }
    }
}

/// Clips every segment against the tracts; see [`assign_segments_with`].
pub fn assign_segments(tracts: &[TractGeometry], segments: &[RoadSegment]) -> Result<Overlay> {
    assign_segments_with(tracts, segments, OverlayOptions::default())
}

pub fn assign_segments_with(
    tracts: &[TractGeometry],
    segments: &[RoadSegment],
    opts: OverlayOptions,
) -> Result<Overlay> {
    if tracts.is_empty() {
        return Err(Error::Invalid("no tracts to assign segments to".into()));
    }
    for s in segments {
        s.validate()?;
    }
    let mut warnings = Vec::new();
    let mut live: Vec<(&TractGeometry, BBox)> = Vec::with_capacity(tracts.len());
    for t in tracts {
        match t.bbox() {
            Some(b) if t.area().abs() > 0.0 => live.push((t, b)),
            _ => warnings.push(GeoWarning::DegenerateTract {
                tract_id: t.tract_id.clone(),
            }),
        }
    }

    let per_segment: Vec<(Vec<SegmentTractAssignment>, Vec<GeoWarning>)> = segments
        .par_iter()
        .map(|seg| clip_segment(seg, &live, opts))
        .collect();

    let mut out = Overlay {
        warnings,
        ..Default::default()
    };
    for (seg, (assigned, warns)) in segments.iter().zip(per_segment) {
        if assigned.is_empty() {
            out.unassigned.push(seg.segment_id.clone());
        }
        out.assignments.extend(assigned);
        out.warnings.extend(warns);
    }
    out.assignments.sort_by(|a, b| {
        (a.segment_id.as_str(), a.tract_id.as_str()).cmp(&(b.segment_id.as_str(), b.tract_id.as_str()))
    });
    out.unassigned.sort();
    Ok(out)
}

fn clip_segment(
    seg: &RoadSegment,
    tracts: &[(&TractGeometry, BBox)],
    opts: OverlayOptions,
) -> (Vec<SegmentTractAssignment>, Vec<GeoWarning>) {
    let mut warnings = Vec::new();
    let arc = seg.arc_length();
    let arc_miles = arc / opts.units_per_mile;
    if arc > 0.0 && ((arc_miles - seg.length).abs() / seg.length) > LENGTH_AGREEMENT {
        warnings.push(GeoWarning::LengthMismatch {
            segment_id: seg.segment_id.clone(),
            declared: seg.length,
            arc: arc_miles,
        });
    }
    let Some(seg_box) = BBox::of(&seg.polyline) else {
        return (Vec::new(), warnings);
    };

    let mut inside: Vec<(&str, f64)> = Vec::new();
    for (tract, tbox) in tracts {
        if !seg_box.intersects(tbox) {
            continue;
        }
        let len: f64 = seg
            .polyline
            .windows(2)
            .map(|w| inside_length(w[0], w[1], tract))
            .sum();
        if len > 0.0 {
            inside.push((tract.tract_id.as_str(), len));
        }
    }
    if inside.is_empty() {
        return (Vec::new(), warnings);
    }

    let covered: f64 = inside.iter().map(|(_, l)| l).sum();
    let mut scale = if arc > 0.0 { seg.length / arc } else { 0.0 };
    if covered > arc * (1.0 + 1e-9) {
        warnings.push(GeoWarning::OverlappingTracts {
            segment_id: seg.segment_id.clone(),
            covered_fraction: covered / arc,
        });
        scale = seg.length / covered;
    }
    let assigned = inside
        .into_iter()
        .map(|(tract_id, len)| SegmentTractAssignment {
            segment_id: seg.segment_id.clone(),
            tract_id: tract_id.to_string(),
            clipped_length: len * scale,
        })
        .filter(|a| a.clipped_length > 0.0)
        .collect();
    (assigned, warnings)
}

/// Length of the straight piece `a→b` lying inside `tract`.
fn inside_length(a: Point, b: Point, tract: &TractGeometry) -> f64 {
    let total = a.dist(b);
    if total == 0.0 {
        return 0.0;
    }
    let mut cuts = vec![0.0, 1.0];
    let d = Point::new(b.x - a.x, b.y - a.y);
    for (c, e) in tract.edges() {
        let f = Point::new(e.x - c.x, e.y - c.y);
        let denom = d.x * f.y - d.y * f.x;
        let ac = Point::new(c.x - a.x, c.y - a.y);
        if denom != 0.0 {
            let t = (ac.x * f.y - ac.y * f.x) / denom;
            let u = (ac.x * d.y - ac.y * d.x) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                cuts.push(t);
            }
        } else if ac.x * d.y - ac.y * d.x == 0.0 {
            // collinear: the edge endpoints split the piece
            let dd = d.x * d.x + d.y * d.y;
            for q in [c, e] {
                let t = ((q.x - a.x) * d.x + (q.y - a.y) * d.y) / dd;
                if (0.0..=1.0).contains(&t) {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter(|w| tract.contains(a.lerp(b, 0.5 * (w[0] + w[1]))))
        .map(|w| (w[1] - w[0]) * total)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TractSpeedLimit {
    /// Length-weighted mean of segment limits, mph.
    pub mean_mph: f64,
    /// `mean_mph` snapped to the 5-mph grid.
    pub snapped_mph: f64,
    /// Total assigned road length, miles.
    pub road_length: f64,
    /// True when the value is the dataset-wide fallback.
    pub fallback: bool,
}

/// Clipped-length-weighted mean speed limit per tract. Assignments whose
/// segment has no speed limit are ignored.
pub fn tract_avg_speed_limit(
    assignments: &[SegmentTractAssignment],
    segments: &[RoadSegment],
) -> Result<BTreeMap<String, TractSpeedLimit>> {
    let by_id: BTreeMap<&str, &RoadSegment> =
        segments.iter().map(|s| (s.segment_id.as_str(), s)).collect();
    let mut acc: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for a in assignments {
        let seg = by_id.get(a.segment_id.as_str()).ok_or_else(|| {
            Error::Consistency(format!("assignment references unknown segment {}", a.segment_id))
        })?;
        let Some(limit) = seg.speed_limit else { continue };
        let e = acc.entry(a.tract_id.as_str()).or_default();
        e.0 += limit * a.clipped_length;
        e.1 += a.clipped_length;
    }
    acc.into_iter()
        .filter(|(_, (_, len))| *len > 0.0)
        .map(|(id, (num, len))| {
            let mean = num / len;
            Ok((
                id.to_string(),
                TractSpeedLimit {
                    mean_mph: mean,
                    snapped_mph: snap_speed_limit(mean)?,
                    road_length: len,
                    fallback: false,
                },
            ))
        })
        .collect()
}

/// Gives every tract in `tract_ids` lacking road length the dataset-wide
/// length-weighted mean limit, flagged as a fallback.
pub fn fill_roadless_tracts<'a>(
    limits: &mut BTreeMap<String, TractSpeedLimit>,
    tract_ids: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let (num, den) = limits
        .values()
        .filter(|v| !v.fallback)
        .fold((0.0, 0.0), |(n, d), v| (n + v.mean_mph * v.road_length, d + v.road_length));
    let missing: Vec<&str> = tract_ids
        .into_iter()
        .filter(|id| !limits.contains_key(*id))
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    if den <= 0.0 {
        return Err(Error::Consistency(format!(
            "no road length anywhere to derive a fallback speed limit for tract(s) {}",
            missing.join(", ")
        )));
    }
    let mean = num / den;
    let fallback = TractSpeedLimit {
        mean_mph: mean,
        snapped_mph: snap_speed_limit(mean)?,
        road_length: 0.0,
        fallback: true,
    };
    for id in missing {
        limits.insert(id.to_string(), fallback);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(id: &str, pts: &[(f64, f64)], limit: f64, length: f64) -> RoadSegment {
        RoadSegment {
            segment_id: id.into(),
            polyline: pts.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            speed_limit: Some(limit),
            aadt: Some(1000.0),
            functional_class: FunctionalClass::Other,
            length,
        }
    }

    fn two_halves() -> Vec<TractGeometry> {
        vec![
            TractGeometry::new("A", vec![Polygon::rect(0.0, 0.0, 1.0, 1.0)]),
            TractGeometry::new("B", vec![Polygon::rect(1.0, 0.0, 2.0, 1.0)]),
        ]
    }

    #[test]
    fn centroid_and_area() {
        let t = TractGeometry::new("A", vec![Polygon::rect(0.0, 0.0, 2.0, 1.0)]);
        assert_eq!(t.area(), 2.0);
        assert_eq!(t.centroid, Point::new(1.0, 0.5));
        let holed = TractGeometry::new(
            "H",
            vec![Polygon::new(vec![
                Polygon::rect(0.0, 0.0, 4.0, 4.0).rings[0].clone(),
                Polygon::rect(0.0, 0.0, 2.0, 2.0).rings[0].clone(),
            ])],
        );
        assert_eq!(holed.area(), 12.0);
        assert!(!holed.contains(Point::new(1.0, 1.0)));
        assert!(holed.contains(Point::new(3.0, 3.0)));
        let c = holed.centroid;
        assert!((c.x - 14.0 / 6.0).abs() < 1e-12 && (c.y - 14.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wholly_inside() {
        let o = assign_segments(&two_halves(), &[seg("s", &[(0.2, 0.5), (0.8, 0.5)], 30.0, 0.6)]).unwrap();
        assert_eq!(o.assignments.len(), 1);
        assert_eq!(o.assignments[0].tract_id, "A");
        assert!((o.assignments[0].clipped_length - 0.6).abs() < 1e-15);
    }

    #[test]
    fn crossing_shared_edge_at_midpoint() {
        let o = assign_segments(&two_halves(), &[seg("s", &[(0.5, 0.3), (1.5, 0.7)], 30.0, 2.0)]).unwrap();
        assert_eq!(o.assignments.len(), 2);
        for a in &o.assignments {
            assert!((a.clipped_length - 1.0).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn declared_length_is_authoritative() {
        // arc length 1.0, declared 1.04 (within 5%): assignments scale to the declared length
        let o = assign_segments(&two_halves(), &[seg("s", &[(0.5, 0.5), (1.5, 0.5)], 30.0, 1.04)]).unwrap();
        let total: f64 = o.assignments.iter().map(|a| a.clipped_length).sum();
        assert!((total - 1.04).abs() < 1e-12);
        assert!(o.warnings.is_empty());
        let o = assign_segments(&two_halves(), &[seg("s", &[(0.5, 0.5), (1.5, 0.5)], 30.0, 2.0)]).unwrap();
        assert!(matches!(o.warnings[0], GeoWarning::LengthMismatch { .. }));
    }

    #[test]
    fn partially_outside_and_unassigned() {
        let o = assign_segments(
            &two_halves(),
            &[
                seg("half", &[(1.5, 0.5), (2.5, 0.5)], 30.0, 1.0),
                seg("far", &[(5.0, 5.0), (6.0, 5.0)], 30.0, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(o.unassigned, vec!["far".to_string()]);
        assert_eq!(o.assignments.len(), 1);
        assert!((o.assignments[0].clipped_length - 0.5).abs() < 1e-12);
    }

    #[test]
    fn segment_along_shared_boundary_is_not_double_counted() {
        let o = assign_segments(&two_halves(), &[seg("s", &[(1.0, 0.1), (1.0, 0.9)], 30.0, 0.8)]).unwrap();
        let total: f64 = o.assignments.iter().map(|a| a.clipped_length).sum();
        assert!(total <= 0.8 + 1e-6);
    }

    #[test]
    fn degenerate_and_empty() {
        assert!(assign_segments(&[], &[]).is_err());
        let flat = TractGeometry::new("Z", vec![Polygon::rect(0.0, 0.0, 1.0, 0.0)]);
        let mut tracts = two_halves();
        tracts.push(flat);
        let o = assign_segments(&tracts, &[seg("s", &[(0.2, 0.0), (0.8, 0.0)], 30.0, 0.6)]).unwrap();
        assert!(o
            .warnings
            .iter()
            .any(|w| matches!(w, GeoWarning::DegenerateTract { tract_id } if tract_id == "Z")));
    }

    #[test]
    fn invalid_segments_rejected() {
        let mut s = seg("s", &[(0.2, 0.5), (0.8, 0.5)], 30.0, 0.6);
        s.length = 0.0;
        assert!(assign_segments(&two_halves(), &[s.clone()]).is_err());
        s.length = 0.6;
        s.speed_limit = Some(95.0);
        assert!(assign_segments(&two_halves(), &[s.clone()]).is_err());
        s.speed_limit = Some(30.0);
        s.aadt = Some(-1.0);
        assert!(assign_segments(&two_halves(), &[s]).is_err());
    }

    #[test]
    fn average_speed_limits() {
        let segs = vec![
            seg("a", &[(0.1, 0.2), (0.6, 0.2)], 30.0, 0.5),
            seg("b", &[(0.1, 0.6), (0.6, 0.6)], 50.0, 0.5),
            seg("c", &[(1.2, 0.6), (1.6, 0.6)], 30.0, 0.4),
        ];
        let tracts = two_halves();
        let o = assign_segments(&tracts, &segs).unwrap();
        let lim = tract_avg_speed_limit(&o.assignments, &segs).unwrap();
        assert!((lim["A"].mean_mph - 40.0).abs() < 1e-12);
        assert_eq!(lim["A"].snapped_mph, 40.0);
        assert_eq!(lim["B"].mean_mph, 30.0);
    }

    #[test]
    fn roadless_fallback() {
        let segs = vec![
            seg("a", &[(0.1, 0.2), (0.9, 0.2)], 30.0, 0.8),
            seg("b", &[(0.1, 0.6), (0.3, 0.6)], 55.0, 0.2),
        ];
        let o = assign_segments(&two_halves(), &segs).unwrap();
        let mut lim = tract_avg_speed_limit(&o.assignments, &segs).unwrap();
        assert!(!lim.contains_key("B"));
        fill_roadless_tracts(&mut lim, ["A", "B"]).unwrap();
        assert!(lim["B"].fallback);
        assert!((lim["B"].mean_mph - 35.0).abs() < 1e-12);
        let mut empty = BTreeMap::new();
        assert!(fill_roadless_tracts(&mut empty, ["A"]).is_err());
    }

    #[test]
    fn functional_class_parse() {
        assert_eq!("Principal Arterial".parse::<FunctionalClass>().unwrap(), FunctionalClass::PrincipalArterial);
        assert_eq!("major_collector".parse::<FunctionalClass>().unwrap(), FunctionalClass::MajorCollector);
        assert!("freeway".parse::<FunctionalClass>().is_err());
    }
}
