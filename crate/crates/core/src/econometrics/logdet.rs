//! `ln|I − ρW|` for the spatial likelihoods.
//!
//! Two routes. For moderate `n` the eigenvalues of `W` are computed once
//! (real Schur form) and the log-determinant for any `ρ` is
//! `Σ ln|1 − ρ λ_i|`. Above [`EIGEN_MAX_N`] the matrix is reordered by
//! reverse Cuthill–McKee and factored per `ρ` as a banded LU.

use std::collections::VecDeque;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

/// Largest `n` for which the eigenvalue route is used by default.
pub const EIGEN_MAX_N: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogDetMethod {
    Eigen,
    SparseLu,
}

#[derive(Debug, Clone)]
pub struct LogDet {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Eigen(Vec<Complex<f64>>),
    Banded(BandedSystem),
}

impl LogDet {
    pub fn new(w: &SpatialWeights) -> Self {
        let method = if w.n <= EIGEN_MAX_N {
            LogDetMethod::Eigen
        } else {
            LogDetMethod::SparseLu
        };
        Self::with_method(w, method)
    }

    /// Uses the requested route; the eigenvalue route falls back to the
    /// banded factorization if the QR iteration fails to converge.
    pub fn with_method(w: &SpatialWeights, method: LogDetMethod) -> Self {
        let inner = match method {
            LogDetMethod::Eigen => match eigenvalues(w) {
                Some(e) => Inner::Eigen(e),
                None => {
                    log::warn!("eigenvalues of W did not converge; using banded LU log-determinant");
                    Inner::Banded(BandedSystem::new(w))
                }
            },
            LogDetMethod::SparseLu => Inner::Banded(BandedSystem::new(w)),
        };
        Self { inner }
    }

    pub fn method(&self) -> LogDetMethod {
        match self.inner {
            Inner::Eigen(_) => LogDetMethod::Eigen,
            Inner::Banded(_) => LogDetMethod::SparseLu,
        }
    }

    pub fn eigenvalues(&self) -> Option<&[Complex<f64>]> {
        match &self.inner {
            Inner::Eigen(e) => Some(e),
            Inner::Banded(_) => None,
        }
    }

    /// `ln|I − ρW|`; errors if `I − ρW` is singular or has a negative
    /// determinant.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        match &self.inner {
            Inner::Eigen(eig) => {
                let mut sum = 0.0;
                let mut arg = 0.0;
                for l in eig {
                    let z = Complex::new(1.0 - rho * l.re, -rho * l.im);
                    let m = z.norm();
                    if m == 0.0 {
                        return Err(Error::numerical(format!("I - {rho}W is singular")));
                    }
                    sum += m.ln();
                    arg += z.im.atan2(z.re);
                }
                // conjugate pairs cancel; a net angle of ±π means det < 0
                if (arg / std::f64::consts::PI).round().rem_euclid(2.0) != 0.0 {
                    return Err(Error::numerical(format!("det(I - {rho}W) is negative")));
                }
                Ok(sum)
            }
            Inner::Banded(b) => b.log_det(rho),
        }
    }

    /// `d/dρ ln|I − ρW| = −tr(W (I − ρW)^{-1})`, eigenvalue route only.
    pub fn derivative(&self, rho: f64) -> Option<f64> {
        self.eigenvalues().map(|eig| {
            -eig.iter()
                .map(|l| (l / (Complex::new(1.0, 0.0) - l * rho)).re)
                .sum::<f64>()
        })
    }
}

fn eigenvalues(w: &SpatialWeights) -> Option<Vec<Complex<f64>>> {
    if let Some(s) = symmetrized(w) {
        return Some(s.symmetric_eigenvalues().iter().map(|&l| Complex::new(l, 0.0)).collect());
    }
    // kNN weights are far from normal and often carry a highly repeated
    // eigenvalue, which needs a QR with exceptional shifts to converge.
    let dense = w.to_dense();
    let m = faer::Mat::<f64>::from_fn(w.n, w.n, |i, j| dense[(i, j)]);
    let eig = m.eigenvalues().ok()?;
    Some(eig.into_iter().map(|z| Complex::new(z.re, z.im)).collect())
}

/// `D^{1/2} W D^{-1/2}` when `W = D^{-1} A` for a symmetric `A`, as
/// produced by row-standardizing a symmetric binary neighbor relation.
fn symmetrized(w: &SpatialWeights) -> Option<DMatrix<f64>> {
    let d: Vec<f64> = w
        .neighbors
        .iter()
        .map(|row| row.first().map_or(1.0, |&(_, v)| 1.0 / v))
        .collect();
    let dense = w.to_dense();
    for (i, row) in w.neighbors.iter().enumerate() {
        for &(j, v) in row {
            let a = d[i] * v;
            if (a - d[j] * dense[(j, i)]).abs() > 1e-12 * a.abs().max(1.0) {
                return None;
            }
        }
    }
    Some(DMatrix::from_fn(w.n, w.n, |i, j| dense[(i, j)] * (d[i] / d[j]).sqrt()))
}

/// `I − ρW` permuted to a narrow band, factored without pivoting on the
/// transpose. For row-standardized `W` and `|ρ| < 1` the matrix is strictly
/// row-diagonally dominant, so its transpose is column-dominant and
/// elimination is stable without row exchanges.
#[derive(Debug, Clone)]
struct BandedSystem {
    n: usize,
    band: usize,
    /// Entries of the permuted `W^T`: `(row, col, w)` in new numbering.
    entries: Vec<(usize, usize, f64)>,
}

impl BandedSystem {
    fn new(w: &SpatialWeights) -> Self {
        let order = reverse_cuthill_mckee(w);
        let mut pos = vec![0; w.n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let mut band = 0;
        let mut entries = Vec::with_capacity(w.nnz());
        for (i, row) in w.neighbors.iter().enumerate() {
            for &(j, wij) in row {
                let (r, c) = (pos[j], pos[i]);
                band = band.max(r.abs_diff(c));
                entries.push((r, c, wij));
            }
        }
        Self {
            n: w.n,
            band,
            entries,
        }
    }

    fn log_det(&self, rho: f64) -> Result<f64> {
        let (n, b) = (self.n, self.band);
        let width = 2 * b + 1;
        // row r holds columns r-b ..= r+b at offsets 0 ..= 2b
        let mut a = vec![0.0; n * width];
        let at = |r: usize, c: usize| r * width + (c + b - r);
        for r in 0..n {
            a[at(r, r)] = 1.0;
        }
        for &(r, c, w) in &self.entries {
            a[at(r, c)] -= rho * w;
        }
        let mut sum = 0.0;
        for k in 0..n {
            let pivot = a[at(k, k)];
            if !(pivot > 0.0) {
                return Err(Error::numerical(format!(
                    "non-positive pivot {pivot} at {k} factoring I - {rho}W"
                )));
            }
            sum += pivot.ln();
            let last = (k + b).min(n - 1);
            for r in k + 1..=last {
                let f = a[at(r, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                for c in k + 1..=last {
                    let v = a[at(k, c)];
                    if v != 0.0 {
                        a[at(r, c)] -= f * v;
                    }
                }
            }
        }
        Ok(sum)
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized neighbor graph.
fn reverse_cuthill_mckee(w: &SpatialWeights) -> Vec<usize> {
    let n = w.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in w.neighbors.iter().enumerate() {
        for &(j, _) in row {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !seen[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Point;
    use crate::weights::{distance_band_weights, knn_weights};

    fn lattice_knn(side: usize, k: usize) -> SpatialWeights {
        let pts: Vec<Point> = (0..side * side)
            .map(|i| Point::new((i % side) as f64, (i / side) as f64))
            .collect();
        let ids: Vec<String> = (0..side * side).map(|i| format!("{i:04}")).collect();
        knn_weights(&ids, &pts, k).unwrap()
    }

    fn dense_logdet(w: &SpatialWeights, rho: f64) -> f64 {
        let a = nalgebra::DMatrix::identity(w.n, w.n) - w.to_dense() * rho;
        a.lu().determinant().abs().ln()
    }

    #[test]
    fn routes_agree_with_dense_lu() {
        let w = lattice_knn(8, 4);
        let eig = LogDet::with_method(&w, LogDetMethod::Eigen);
        let lu = LogDet::with_method(&w, LogDetMethod::SparseLu);
        for rho in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let d = dense_logdet(&w, rho);
            assert!((eig.eval(rho).unwrap() - d).abs() < 1e-9, "eig {rho}");
            assert!((lu.eval(rho).unwrap() - d).abs() < 1e-9, "lu {rho}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let w = lattice_knn(6, 3);
        let ld = LogDet::new(&w);
        for rho in [-0.6, 0.1, 0.7] {
            let h = 1e-6;
            let fd = (ld.eval(rho + h).unwrap() - ld.eval(rho - h).unwrap()) / (2.0 * h);
            assert!((ld.derivative(rho).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn rcm_narrows_band() {
        let pts: Vec<Point> = (0..400).map(|i| Point::new((i % 20) as f64, (i / 20) as f64)).collect();
        let w = distance_band_weights(&pts, 1.0).unwrap();
        // shuffle the numbering so the natural order is no help
        let perm: Vec<usize> = (0..400).map(|i| (i * 7919) % 400).collect();
        let w = w.permute(&perm).unwrap();
        let sys = BandedSystem::new(&w);
        assert!(sys.band <= 40, "band {}", sys.band);
    }

    #[test]
    fn zero_rho_is_zero() {
        let w = lattice_knn(5, 2);
        assert_eq!(LogDet::with_method(&w, LogDetMethod::SparseLu).eval(0.0).unwrap(), 0.0);
        assert!(LogDet::new(&w).eval(0.0).unwrap().abs() < 1e-12);
    }
}
