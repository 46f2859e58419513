//! Sparse spatial weight matrices over tract centroids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Point;

/// Offset applied per repeated copy of an identical centroid.
pub const DUPLICATE_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    Knn(usize),
    DistanceBand(f64),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Knn(k) => write!(f, "knn:{k}"),
            Scheme::DistanceBand(d) => write!(f, "band:{d}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("weights scheme {s:?}: expected knn:<k> or band:<distance>"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "knn" => arg.trim().parse().map(Scheme::Knn).map_err(|_| bad()),
            "band" => arg.trim().parse().map(Scheme::DistanceBand).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Row-wise sparse weights. Row `i` lists `(j, w_ij)` sorted by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    pub n: usize,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub scheme: Scheme,
    pub row_standardized: bool,
    /// Rows whose centroid was nudged off an exact duplicate.
    pub jittered: Vec<usize>,
}

impl SpatialWeights {
    /// Builds from explicit rows, checking the structural invariants.
    pub fn from_rows(
        neighbors: Vec<Vec<(usize, f64)>>,
        scheme: Scheme,
        row_standardized: bool,
    ) -> Result<Self> {
        let n = neighbors.len();
        let mut neighbors = neighbors;
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Invalid(format!("row {i}: duplicate column {}", w[0].0)));
                }
            }
            for &(j, w) in row.iter() {
                if j >= n {
                    return Err(Error::Invalid(format!("row {i}: column {j} out of range (n = {n})")));
                }
                if j == i {
                    return Err(Error::Invalid(format!("row {i}: self-neighbor")));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Invalid(format!("row {i}: weight {w} must be finite and non-negative")));
                }
            }
        }
        let mut w = Self {
            n,
            neighbors,
            scheme,
            row_standardized: false,
            jittered: Vec::new(),
        };
        if row_standardized {
            w.row_standardize();
        }
        Ok(w)
    }

    /// Scales each non-empty row to sum to one.
    pub fn row_standardize(&mut self) {
        for row in &mut self.neighbors {
            let s: f64 = row.iter().map(|(_, w)| w).sum();
            if s > 0.0 {
                for (_, w) in row.iter_mut() {
                    *w /= s;
                }
            }
        }
        self.row_standardized = true;
    }

    pub fn nnz(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.neighbors.iter().flatten().map(|(_, w)| w).sum()
    }

    pub fn islands(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.neighbors[i].is_empty()).collect()
    }

    /// Spatial lag `W x`.
    pub fn lag(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must equal n");
        self.neighbors
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    /// `W X` column by column.
    pub fn lag_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                for c in 0..x.ncols() {
                    out[(i, c)] += w * x[(j, c)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Reorders so that new row `r` is old row `perm[r]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Invalid("permutation length must equal n".into()));
        }
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.n || inv[old] != usize::MAX {
                return Err(Error::Invalid("not a permutation".into()));
            }
            inv[old] = new;
        }
        let neighbors = perm
            .iter()
            .map(|&old| {
                let mut row: Vec<(usize, f64)> =
                    self.neighbors[old].iter().map(|&(j, w)| (inv[j], w)).collect();
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        Ok(Self {
            n: self.n,
            neighbors,
            scheme: self.scheme,
            row_standardized: self.row_standardized,
            jittered: self.jittered.iter().map(|&i| inv[i]).collect(),
        })
    }

    /// Text export: a header line, then one `i j w_ij` triple per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# spatial-weights n={} scheme={} row_standardized={}\n",
            self.n, self.scheme, self.row_standardized
        );
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                // shortest round-trip repr so imports reproduce W exactly
                s.push_str(&format!("{i} {j} {w}\n"));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, m: &str| Error::Parse {
            path: "weights".into(),
            line: line + 1,
            message: m.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| bad(0, "empty weights file"))?;
        let fields: BTreeMap<&str, &str> = header
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let n: usize = fields
            .get("n")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(0, "header lacks n=<count>"))?;
        let scheme: Scheme = fields
            .get("scheme")
            .ok_or_else(|| bad(0, "header lacks scheme=<scheme>"))?
            .parse()?;
        let row_standardized = fields.get("row_standardized") == Some(&"true");
        let mut rows = vec![Vec::new(); n];
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [i, j, w] = parts[..] else {
                return Err(bad(ln, "expected `i j w`"));
            };
            let i: usize = i.parse().map_err(|_| bad(ln, "bad row index"))?;
            let j: usize = j.parse().map_err(|_| bad(ln, "bad column index"))?;
            let w: f64 = w.parse().map_err(|_| bad(ln, "bad weight"))?;
            if i >= n {
                return Err(bad(ln, "row index out of range"));
            }
            rows[i].push((j, w));
        }
        let mut w = Self::from_rows(rows, scheme, false)?;
        w.row_standardized = row_standardized;
        Ok(w)
    }
}

// Static 2-d tree over point indices.
struct KdTree<'a> {
    pts: &'a [Point],
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

struct KdNode {
    idx: usize,
    axis: u8,
    left: Option<usize>,
    right: Option<usize>,
}

fn coord(p: Point, axis: u8) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl<'a> KdTree<'a> {
    fn build(pts: &'a [Point]) -> Self {
        let mut t = Self {
            pts,
            nodes: Vec::with_capacity(pts.len()),
            root: None,
        };
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        t.root = t.build_rec(&mut idx, 0);
        t
    }

    fn build_rec(&mut self, idx: &mut [usize], depth: usize) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = (depth % 2) as u8;
        let mid = idx.len() / 2;
        let pts = self.pts;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            coord(pts[a], axis).total_cmp(&coord(pts[b], axis)).then(a.cmp(&b))
        });
        let node = self.nodes.len();
        self.nodes.push(KdNode {
            idx: idx[mid],
            axis,
            left: None,
            right: None,
        });
        let (lo, hi) = idx.split_at_mut(mid);
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(&mut hi[1..], depth + 1);
        self.nodes[node].left = left;
        self.nodes[node].right = right;
        Some(node)
    }

    /// Visits every point whose squared distance to `q` may be `<= bound()`.
    fn visit(&self, node: Option<usize>, q: Point, f: &mut dyn FnMut(usize, f64) -> f64, bound: &mut f64) {
        let Some(n) = node else { return };
        let nd = &self.nodes[n];
        let p = self.pts[nd.idx];
        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
        *bound = f(nd.idx, d2);
        let diff = coord(q, nd.axis) - coord(p, nd.axis);
        let (near, far) = if diff < 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.visit(near, q, f, bound);
        if diff * diff <= *bound {
            self.visit(far, q, f, bound);
        }
    }
}

#[derive(PartialEq)]
struct Cand {
    d2: f64,
    rank: usize,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.rank.cmp(&o.rank))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Nudges exact duplicates apart along x; returns moved indices.
fn dejitter(centroids: &[Point], ids: &[String]) -> (Vec<Point>, Vec<usize>) {
    let mut pts = centroids.to_vec();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .x
            .total_cmp(&pts[b].x)
            .then(pts[a].y.total_cmp(&pts[b].y))
            .then(ids[a].cmp(&ids[b]))
    });
    let mut moved = Vec::new();
    let mut copies = 0usize;
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if centroids[prev] == centroids[cur] {
            copies += 1;
            pts[cur].x += copies as f64 * DUPLICATE_JITTER;
            moved.push(cur);
        } else {
            copies = 0;
        }
    }
    moved.sort_unstable();
    (pts, moved)
}

fn id_ranks(ids: &[String]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    if let Some(w) = order.windows(2).find(|w| ids[w[0]] == ids[w[1]]) {
        return Err(Error::Invalid(format!("duplicate tract id {}", ids[w[0]])));
    }
    let mut rank = vec![0; ids.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    Ok(rank)
}

/// k-nearest-neighbor weights, row-standardized to `1/k`. Distance ties go
/// to the lower tract id; exact duplicate centroids are separated by
/// [`DUPLICATE_JITTER`] and reported in `jittered`.
pub fn knn_weights(ids: &[String], centroids: &[Point], k: usize) -> Result<SpatialWeights> {
    let n = centroids.len();
    if ids.len() != n {
        return Err(Error::Invalid("ids and centroids differ in length".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::Invalid(format!("knn requires 1 <= k < n (k = {k}, n = {n})")));
    }
    let rank = id_ranks(ids)?;
    let (pts, jittered) = dejitter(centroids, ids);
    if !jittered.is_empty() {
        log::warn!("{} duplicate centroid(s) jittered by {DUPLICATE_JITTER}", jittered.len());
    }
    let tree = KdTree::build(&pts);
    let neighbors = (0..n)
        .map(|i| {
            let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
            let mut bound = f64::INFINITY;
            tree.visit(
                tree.root,
                pts[i],
                &mut |j, d2| {
                    if j != i {
                        let c = Cand { d2, rank: rank[j], idx: j };
                        if heap.len() < k {
                            heap.push(c);
                        } else if c < *heap.peek().expect("heap full") {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                    if heap.len() < k {
                        f64::INFINITY
                    } else {
                        heap.peek().expect("heap full").d2
                    }
                },
                &mut bound,
            );
            let mut row: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.idx, 1.0)).collect();
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    let mut w = SpatialWeights::from_rows(neighbors, Scheme::Knn(k), true)?;
    w.jittered = jittered;
    Ok(w)
}

/// Binary distance-band weights (every other centroid within `d`),
/// row-standardized. Rows may be empty.
pub fn distance_band_weights(centroids: &[Point], d: f64) -> Result<SpatialWeights> {
    if !(d > 0.0) {
        return Err(Error::Invalid(format!("distance band {d} must be positive")));
    }
    let tree = KdTree::build(centroids);
    let d2max = d * d;
    let neighbors = (0..centroids.len())
        .map(|i| {
            let mut row = Vec::new();
            let mut bound = d2max;
            tree.visit(
                tree.root,
                centroids[i],
                &mut |j, d2| {
                    if j != i && d2 <= d2max {
                        row.push((j, 1.0));
                    }
                    d2max
                },
                &mut bound,
            );
            row
        })
        .collect();
    SpatialWeights::from_rows(neighbors, Scheme::DistanceBand(d), true)
}

pub fn build_weights(ids: &[String], centroids: &[Point], scheme: Scheme) -> Result<SpatialWeights> {
    match scheme {
        Scheme::Knn(k) => knn_weights(ids, centroids, k),
        Scheme::DistanceBand(d) => distance_band_weights(centroids, d),
    }
}

/// Moran's I of `values` under `w`.
pub fn morans_i(values: &[f64], w: &SpatialWeights) -> Result<f64> {
    if values.len() != w.n {
        return Err(Error::Invalid(format!(
            "{} values for a {}-tract weight matrix",
            values.len(),
            w.n
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    if zz == 0.0 || !zz.is_finite() {
        return Err(Error::Domain("Moran's I is undefined for a constant vector".into()));
    }
    let s0 = w.s0();
    if s0 == 0.0 {
        return Err(Error::Domain("weight matrix has no links".into()));
    }
    let wz = w.lag(&z);
    let zwz: f64 = z.iter().zip(&wz).map(|(a, b)| a * b).sum();
    Ok(n / s0 * zwz / zz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i:03}")).collect()
    }

    fn lattice(side: usize) -> Vec<Point> {
        (0..side * side)
            .map(|i| Point::new((i % side) as f64, (i / side) as f64))
            .collect()
    }

    #[test]
    fn collinear_tie_goes_to_lower_id() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let w = knn_weights(&["a".into(), "b".into(), "c".into()], &pts, 1).unwrap();
        assert_eq!(w.neighbors[1], vec![(0, 1.0)]);
        let w = knn_weights(&["z".into(), "b".into(), "c".into()], &pts, 1).unwrap();
        assert_eq!(w.neighbors[1], vec![(2, 1.0)]);
    }

    #[test]
    fn knn_rows_sum_to_one() {
        let w = knn_weights(&ids(100), &lattice(10), 8).unwrap();
        for row in &w.neighbors {
            assert_eq!(row.len(), 8);
            let s: f64 = row.iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(w.islands().is_empty());
    }

    #[test]
    fn knn_rejects_bad_k() {
        assert!(knn_weights(&ids(3), &lattice(3)[..3], 3).is_err());
        assert!(knn_weights(&ids(3), &lattice(3)[..3], 0).is_err());
        let dup_ids = vec!["a".to_string(), "a".to_string(), "b".to_string()];
        assert!(knn_weights(&dup_ids, &lattice(3)[..3], 1).is_err());
    }

    #[test]
    fn duplicate_centroids_are_jittered() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(5.0, 0.0)];
        let w = knn_weights(&ids(3), &pts, 1).unwrap();
        assert_eq!(w.jittered, vec![1]);
        assert_eq!(w.neighbors[0], vec![(1, 1.0)]);
        assert_eq!(w.neighbors[1], vec![(0, 1.0)]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut w = distance_band_weights(&lattice(5), 1.5).unwrap();
        let once = w.clone();
        w.row_standardize();
        assert_eq!(w, once);
    }

    #[test]
    fn rook_band_on_lattice() {
        let w = distance_band_weights(&lattice(4), 1.0).unwrap();
        assert_eq!(w.neighbors[0].len(), 2);
        assert_eq!(w.neighbors[5].len(), 4);
    }

    #[test]
    fn checkerboard_is_negative() {
        let side = 10;
        let w = distance_band_weights(&lattice(side), 1.0).unwrap();
        let v: Vec<f64> = (0..side * side).map(|i| ((i % side + i / side) % 2) as f64).collect();
        let i = morans_i(&v, &w).unwrap();
        // every rook neighbor differs: z_j = -z_i, so I = -1 exactly
        assert!((i + 1.0).abs() < 1e-12, "{i}");
    }

    #[test]
    fn morans_i_constant_is_error() {
        let w = distance_band_weights(&lattice(3), 1.0).unwrap();
        assert!(morans_i(&[1.0; 9], &w).is_err());
        assert!(morans_i(&[1.0; 4], &w).is_err());
    }

    #[test]
    fn text_round_trip() {
        let w = knn_weights(&ids(25), &lattice(5), 3).unwrap();
        let back = SpatialWeights::from_text(&w.to_text()).unwrap();
        assert_eq!(back, w);
        assert!(SpatialWeights::from_text("# spatial-weights n=2 scheme=knn:1\n0 0 1\n").is_err());
    }

    #[test]
    fn scheme_parse() {
        assert_eq!("knn:8".parse::<Scheme>().unwrap(), Scheme::Knn(8));
        assert_eq!("band:1.5".parse::<Scheme>().unwrap(), Scheme::DistanceBand(1.5));
        assert!("queen".parse::<Scheme>().is_err());
    }

    #[test]
    fn permutation_is_consistent() {
        let w = knn_weights(&ids(16), &lattice(4), 3).unwrap();
        let perm: Vec<usize> = (0..16).rev().collect();
        let p = w.permute(&perm).unwrap();
        let (dw, dp) = (w.to_dense(), p.to_dense());
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(dp[(r, c)], dw[(perm[r], perm[c])]);
            }
        }
    }
}
