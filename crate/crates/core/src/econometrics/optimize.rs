//! One-dimensional maximization and root finding on a bounded interval.

use crate::error::{Error, Result};

/// Search bound for spatial autoregressive parameters.
pub const PARAM_BOUND: f64 = 0.99;
/// Bracketing tolerance for golden-section refinement.
pub const GOLDEN_TOL: f64 = 1e-6;

/// The 39-point seeding grid −0.95, −0.90, …, 0.95.
pub fn seed_grid() -> Vec<f64> {
    (-19..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// `(x, f(x))` at every grid point.
    pub trace: Vec<(f64, f64)>,
}

/// Maximizes `f` over `(-bound, bound)`: evaluates the seed grid, then runs
/// golden-section search inside the grid cell pair around the best point.
/// Fails if the maximum sits on the search boundary.
pub fn grid_golden_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    bound: f64,
    tol: f64,
) -> Result<Maximum> {
    let grid = seed_grid();
    let mut trace = Vec::with_capacity(grid.len());
    for &g in &grid {
        let v = f(g)?;
        trace.push((g, v));
    }
    let (best, _) = trace
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_finite())
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or_else(|| Error::Numerical {
            message: "objective is not finite anywhere on the seed grid".into(),
            trace: trace.clone(),
        })?;
    let lo = if best == 0 { -bound } else { grid[best - 1] };
    let hi = if best + 1 == grid.len() { bound } else { grid[best + 1] };
    let (x, value) = golden_max(&mut f, lo, hi, tol)?;
    if bound - x.abs() < 10.0 * tol {
        return Err(Error::Numerical {
            message: format!("maximum at search boundary ({x:.6}); no interior optimum"),
            trace,
        });
    }
    Ok(Maximum { x, value, trace })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

pub fn golden_max(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    // the midpoint is not guaranteed to beat the interior probes
    Ok([(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates"))
}

/// Root of `g` in `[a, b]` by bisection-safeguarded secant (Illinois).
/// Returns `None` when `g(a)` and `g(b)` share a sign.
pub fn bracketed_root(
    mut g: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let mut ga = g(a)?;
    let mut gb = g(b)?;
    if ga == 0.0 {
        return Ok(Some(a));
    }
    if gb == 0.0 {
        return Ok(Some(b));
    }
    if ga.signum() == gb.signum() {
        return Ok(None);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let gc = g(c)?;
        if gc == 0.0 || (b - a).abs() < tol {
            return Ok(Some(c));
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
