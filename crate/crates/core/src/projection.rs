//! Euclidean projection onto boxes and onto a box intersected with one
//! linear constraint.
//!
//! For the coupled case the minimizer for a fixed multiplier `nu` is
//! `clamp(z - nu * a)`, and `a^T clamp(z - nu * a)` is non-increasing in
//! `nu`. The multiplier is found by a bracketed root search that takes
//! exact Newton steps on the current linear piece and falls back to
//! bisection whenever a step leaves the bracket.

use thiserror::Error;

use crate::game::{FeasibleSet, Relation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("inconsistent bounds at coordinate {index}: lower {lower} > upper {upper}")]
    InconsistentBounds { index: usize, lower: f64, upper: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty feasible set: coupling rhs {rhs} outside attainable range [{min}, {max}]")]
    Infeasible { rhs: f64, min: f64, max: f64 },
    #[error("coupled projection did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("set has no linear coupling constraint")]
    NotCoupled,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    pub max_iters: usize,
    pub tolerance: f64,
    last_iterations: usize,
}

impl Default for ProjectionWorkspace {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tolerance: 1e-10,
            last_iterations: 0,
        }
    }
}

impl ProjectionWorkspace {
    pub fn new(max_iters: usize, tolerance: f64) -> Result<Self, ProjectionError> {
        if !(tolerance > 0.0) {
            return Err(ProjectionError::InvalidTolerance(tolerance));
        }
        Ok(Self {
            max_iters,
            tolerance,
            last_iterations: 0,
        })
    }

    /// Root-search iterations used by the most recent coupled projection.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub(crate) fn set_last_iterations(&mut self, n: usize) {
        self.last_iterations = n;
    }
}

pub(crate) fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<(), ProjectionError> {
    for (index, (&l, &u)) in lower.iter().zip(upper).enumerate() {
        if !(l <= u) {
            return Err(ProjectionError::InconsistentBounds {
                index,
                lower: l,
                upper: u,
            });
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_into(z: &[f64], lower: &[f64], upper: &[f64], out: &mut [f64]) {
    for i in 0..z.len() {
        out[i] = z[i].max(lower[i]).min(upper[i]);
    }
}

/// Componentwise clamp of `z` into `[lower, upper]`.
pub fn project_box(z: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>, ProjectionError> {
    if z.len() != lower.len() || z.len() != upper.len() {
        return Err(ProjectionError::DimensionMismatch {
            expected: lower.len(),
            found: z.len(),
        });
    }
    check_bounds(lower, upper)?;
    let mut out = vec![0.0; z.len()];
    clamp_into(z, lower, upper, &mut out);
    Ok(out)
}

/// Projection onto a box with one linear coupling constraint.
pub fn project_coupled(
    z: &[f64],
    set: &FeasibleSet,
    ws: &mut ProjectionWorkspace,
) -> Result<Vec<f64>, ProjectionError> {
    let mut out = vec![0.0; set.dim()];
    project_coupled_into(z, set, ws, &mut out)?;
    Ok(out)
}

pub fn project_coupled_into(
    z: &[f64],
    set: &FeasibleSet,
    ws: &mut ProjectionWorkspace,
    out: &mut [f64],
) -> Result<(), ProjectionError> {
    let c = set.coupling().ok_or(ProjectionError::NotCoupled)?;
    if z.len() != set.dim() {
        return Err(ProjectionError::DimensionMismatch {
            expected: set.dim(),
            found: z.len(),
        });
    }
    let (lower, upper, a, rhs) = (set.lower(), set.upper(), c.coeffs.as_slice(), c.rhs);
    let accept = ws.tolerance * (1.0 + rhs.abs());

    let (min_val, max_val) = attainable_range(a, lower, upper);
    let infeasible = match c.relation {
        Relation::Eq => rhs < min_val - accept || rhs > max_val + accept,
        Relation::Ge => rhs > max_val + accept,
    };
    if infeasible {
        return Err(ProjectionError::Infeasible {
            rhs,
            min: min_val,
            max: max_val,
        });
    }

    // residual(nu) = a^T clamp(z - nu a) - rhs; also returns the slope magnitude.
    let eval = |nu: f64, out: &mut [f64]| -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for i in 0..z.len() {
            let t = z[i] - nu * a[i];
            let y = t.max(lower[i]).min(upper[i]);
            out[i] = y;
            value += a[i] * y;
            if t > lower[i] && t < upper[i] {
                slope += a[i] * a[i];
            }
        }
        (value - rhs, slope)
    };
    let tight = |out: &[f64]| {
        let scale: f64 = 1.0 + rhs.abs() + out.iter().zip(a).map(|(y, a)| (y * a).abs()).sum::<f64>();
        8.0 * f64::EPSILON * scale
    };

    let (r0, slope0) = eval(0.0, out);
    if (c.relation == Relation::Ge && r0 >= 0.0) || r0.abs() <= tight(out) {
        ws.last_iterations = 0;
        return Ok(());
    }

    // Bracket [lo, hi] with residual(lo) >= 0 >= residual(hi).
    let min_abs = a
        .iter()
        .filter(|v| **v != 0.0)
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let mut step = if min_abs.is_finite() {
        (norm(z) + rhs.abs()) / min_abs
    } else {
        1.0
    };
    if !(step > 0.0) {
        step = 1.0;
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut iterations = 0;
    let mut bracketed = false;
    for _ in 0..2048 {
        iterations += 1;
        let nu = if r0 > 0.0 { step } else { -step };
        let (r, _) = eval(nu, out);
        if r0 > 0.0 {
            if r <= 0.0 {
                hi = nu;
                bracketed = true;
                break;
            }
            lo = nu;
        } else {
            if r >= 0.0 {
                lo = nu;
                bracketed = true;
                break;
            }
            hi = nu;
        }
        if r.abs() <= accept && !(step * 2.0).is_finite() {
            break;
        }
        step *= 2.0;
    }
    if !bracketed {
        // The root lies at infinity: the limit point is within tolerance.
        let (r, _) = eval(if r0 > 0.0 { lo } else { hi }, out);
        ws.last_iterations = iterations;
        return if r.abs() <= accept {
            Ok(())
        } else {
            Err(ProjectionError::NoConvergence {
                iterations,
                residual: r.abs(),
            })
        };
    }

    let mut nu = if r0 > 0.0 {
        if slope0 > 0.0 { r0 / slope0 } else { 0.5 * (lo + hi) }
    } else if slope0 > 0.0 {
        r0 / slope0
    } else {
        0.5 * (lo + hi)
    };
    if !(nu > lo && nu < hi) {
        nu = 0.5 * (lo + hi);
    }
    let mut best_nu = nu;
    let mut best_r = f64::INFINITY;
    for _ in 0..ws.max_iters {
        iterations += 1;
        let (r, slope) = eval(nu, out);
        if r.abs() < best_r {
            best_r = r.abs();
            best_nu = nu;
        }
        if r.abs() <= tight(out) {
            break;
        }
        if r > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let newton = if slope > 0.0 { nu + r / slope } else { f64::NAN };
        nu = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let (r, _) = eval(best_nu, out);
    ws.last_iterations = iterations;
    if r.abs() <= accept {
        Ok(())
    } else {
        Err(ProjectionError::NoConvergence {
            iterations,
            residual: r.abs(),
        })
    }
}

fn attainable_range(a: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut min_val = 0.0;
    let mut max_val = 0.0;
    for i in 0..a.len() {
        if a[i] == 0.0 {
            continue;
        }
        let (p, q) = (a[i] * lower[i], a[i] * upper[i]);
        min_val += p.min(q);
        max_val += p.max(q);
    }
    (min_val, max_val)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
