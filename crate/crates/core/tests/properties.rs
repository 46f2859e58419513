use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tractghg::econometrics::logdet::LogDet;
use tractghg::geo::{assign_segments, FunctionalClass, Point, Polygon, RoadSegment, TractGeometry};
use tractghg::weights::{distance_band_weights, knn_weights, morans_i, SpatialWeights};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i:03}")).collect()
}

fn points() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 6..60)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

/// k nearest by (distance, id) found by sorting every other point.
fn brute_force_knn(pts: &[Point], ids: &[String], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..pts.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        pts[i]
            .dist(pts[a])
            .total_cmp(&pts[i].dist(pts[b]))
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let mut nn = others[..k].to_vec();
    nn.sort_unstable();
    nn
}

fn neighbor_set(w: &SpatialWeights, i: usize) -> Vec<usize> {
    w.neighbors[i].iter().map(|&(j, _)| j).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn knn_matches_brute_force(pts in points(), k in 1usize..6) {
        let ids = ids(pts.len());
        let w = knn_weights(&ids, &pts, k).unwrap();
        for i in 0..pts.len() {
            prop_assert_eq!(neighbor_set(&w, i), brute_force_knn(&pts, &ids, i, k));
            for &(_, wij) in &w.neighbors[i] {
                prop_assert_eq!(wij, 1.0 / k as f64);
            }
        }
    }

    #[test]
    fn weights_follow_a_relabeling(pts in points(), k in 1usize..5, seed in any::<u64>()) {
        let n = pts.len();
        let ids = ids(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let w = knn_weights(&ids, &pts, k).unwrap();
        let p_ids: Vec<String> = perm.iter().map(|&o| ids[o].clone()).collect();
        let p_pts: Vec<Point> = perm.iter().map(|&o| pts[o]).collect();
        let wp = knn_weights(&p_ids, &p_pts, k).unwrap();
        prop_assert_eq!(wp, w.permute(&perm).unwrap());

        let band = distance_band_weights(&pts, 20.0);
        let band_p = distance_band_weights(&p_pts, 20.0);
        if let (Ok(b), Ok(bp)) = (band, band_p) {
            prop_assert_eq!(bp, b.permute(&perm).unwrap());
        }
    }

    #[test]
    fn morans_i_is_invariant_to_relabeling(pts in points(), seed in any::<u64>()) {
        let n = pts.len();
        let ids = ids(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = pts.iter().map(|p| p.x + rng.random_range(-5.0..5.0)).collect();
        let w = knn_weights(&ids, &pts, 4).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let wp = w.permute(&perm).unwrap();
        let vp: Vec<f64> = perm.iter().map(|&o| values[o]).collect();
        let a = morans_i(&values, &w).unwrap();
        let b = morans_i(&vp, &wp).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_standardized_spectrum_lies_in_unit_disk(pts in points(), k in 1usize..6) {
        let w = knn_weights(&ids(pts.len()), &pts, k).unwrap();
        let ld = LogDet::new(&w);
        let eig = ld.eigenvalues().expect("eigen route at small n");
        prop_assert_eq!(eig.len(), pts.len());
        let max = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(max <= 1.0 + 1e-9, "spectral radius {}", max);
        // a row-stochastic matrix always has eigenvalue 1
        prop_assert!(eig.iter().any(|z| (z.re - 1.0).abs() < 1e-8 && z.im.abs() < 1e-8));
    }
}

/// Concave and convex tracts tiling the square [0, 4]².
fn irregular_tracts() -> Vec<TractGeometry> {
    let p = |x: f64, y: f64| Point::new(x, y);
    vec![
        // L-shape
        TractGeometry::new(
            "L",
            vec![Polygon::new(vec![vec![p(0.0, 0.0), p(2.5, 0.0), p(2.5, 1.5), p(1.0, 1.5), p(1.0, 4.0), p(0.0, 4.0)]])],
        ),
        // triangle under the diagonal of the right block
        TractGeometry::new("T", vec![Polygon::new(vec![vec![p(2.5, 0.0), p(4.0, 0.0), p(4.0, 4.0)]])]),
        // the rest of the right block, bounded by the same diagonal
        TractGeometry::new(
            "R",
            vec![Polygon::new(vec![vec![p(1.0, 1.5), p(2.5, 1.5), p(2.5, 0.0), p(4.0, 4.0), p(1.0, 4.0)]])],
        ),
    ]
}

fn segment(id: &str, pts: Vec<Point>) -> RoadSegment {
    let length = pts.windows(2).map(|w| w[0].dist(w[1])).sum();
    RoadSegment {
        segment_id: id.into(),
        polyline: pts,
        speed_limit: Some(35.0),
        aadt: Some(1000.0),
        functional_class: FunctionalClass::Other,
        length,
    }
}

fn point_in(t: &TractGeometry, q: Point) -> bool {
    t.contains(q)
}

/// Fraction of a polyline's length inside each tract, estimated by
/// sampling points evenly along it.
fn sampled_fractions(road: &RoadSegment, tracts: &[TractGeometry], samples: usize) -> Vec<f64> {
    let seglens: Vec<f64> = road.polyline.windows(2).map(|w| w[0].dist(w[1])).collect();
    let total: f64 = seglens.iter().sum();
    let mut hits = vec![0usize; tracts.len()];
    for s in 0..samples {
        let mut d = (s as f64 + 0.5) / samples as f64 * total;
        let mut k = 0;
        while d > seglens[k] && k + 1 < seglens.len() {
            d -= seglens[k];
            k += 1;
        }
        let (a, b) = (road.polyline[k], road.polyline[k + 1]);
        let t = d / seglens[k];
        let q = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        if let Some(i) = tracts.iter().position(|tr| point_in(tr, q)) {
            hits[i] += 1;
        }
    }
    hits.into_iter().map(|h| h as f64 / samples as f64).collect()
}

#[test]
fn clipping_agrees_with_point_sampling() {
    let tracts = irregular_tracts();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for s in 0..40 {
        let n = rng.random_range(2..6);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-0.5..4.5), rng.random_range(-0.5..4.5)))
            .collect();
        let road = segment(&format!("s{s}"), pts);
        let overlay = assign_segments(&tracts, std::slice::from_ref(&road)).unwrap();
        let sampled = sampled_fractions(&road, &tracts, 10_000);
        for (i, t) in tracts.iter().enumerate() {
            let clipped: f64 = overlay
                .assignments
                .iter()
                .filter(|a| a.tract_id == t.tract_id)
                .map(|a| a.clipped_length)
                .sum();
            let frac = clipped / road.length;
            assert!(
                (frac - sampled[i]).abs() < 2e-3,
                "{}: tract {} clipped {frac} vs sampled {}",
                road.segment_id,
                t.tract_id,
                sampled[i]
            );
        }
    }
}

fn random_roads(rng: &mut ChaCha8Rng, count: usize) -> Vec<RoadSegment> {
    (0..count)
        .map(|s| {
            let n = rng.random_range(2..5);
            let pts = (0..n)
                .map(|_| Point::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)))
                .collect();
            segment(&format!("s{s:02}"), pts)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn clipped_lengths_conserve_segment_length(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roads = random_roads(&mut rng, 8);
        let overlay = assign_segments(&irregular_tracts(), &roads).unwrap();
        for r in &roads {
            let sum: f64 = overlay
                .assignments
                .iter()
                .filter(|a| a.segment_id == r.segment_id)
                .map(|a| a.clipped_length)
                .sum();
            prop_assert!(((sum - r.length) / r.length).abs() < 1e-4, "{}: {} vs {}", r.segment_id, sum, r.length);
        }
        prop_assert!(overlay.assignments.iter().all(|a| a.clipped_length > 0.0));
    }

    #[test]
    fn overlay_is_translation_invariant(seed in any::<u64>(), dx in -1e4f64..1e4, dy in -1e4f64..1e4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roads = random_roads(&mut rng, 6);
        let tracts = irregular_tracts();
        let moved_t: Vec<TractGeometry> = tracts.iter().map(|t| t.translate(dx, dy)).collect();
        let moved_r: Vec<RoadSegment> = roads.iter().map(|r| r.translate(dx, dy)).collect();
        let a = assign_segments(&tracts, &roads).unwrap();
        let b = assign_segments(&moved_t, &moved_r).unwrap();
        prop_assert_eq!(a.assignments.len(), b.assignments.len());
        for (x, y) in a.assignments.iter().zip(&b.assignments) {
            prop_assert_eq!(&x.segment_id, &y.segment_id);
            prop_assert_eq!(&x.tract_id, &y.tract_id);
            prop_assert!((x.clipped_length - y.clipped_length).abs() < 1e-6);
        }
    }
}
