//! Centralized reference solvers and the relative error metric.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{probe_monotonicity, probe_phi_lipschitz, GameError, GameInstance, SetKind};
use crate::projection::{ProjectionError, ProjectionWorkspace};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("projection failed for player {player}: {source}")]
    Projection {
        player: usize,
        #[source]
        source: ProjectionError,
    },
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("unsupported game: {0}")]
    Unsupported(String),
    #[error("reference point is identically zero; relative error undefined")]
    ZeroReference,
    #[error("profiles have different shapes")]
    Shape,
    #[error("cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x: Vec<Vec<f64>>,
    pub iterations: usize,
    /// `|x - Pi_K(x - step * phi(x))|_inf` at the returned point.
    pub residual: f64,
}

/// One full-information projected gradient step.
pub fn centralized_step(
    game: &GameInstance,
    x: &[Vec<f64>],
    step: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let phi = game.evaluate_phi(x)?;
    x.iter()
        .zip(&phi)
        .enumerate()
        .map(|(i, (xi, gi))| {
            let z: Vec<f64> = xi.iter().zip(gi).map(|(a, g)| a - step * g).collect();
            game.player(i)
                .set()
                .project(&z, ws)
                .map_err(|source| OracleError::Projection { player: i, source })
        })
        .collect()
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(s, t)| (s - t).abs()))
        .fold(0.0, f64::max)
}

/// Natural residual `|x - Pi_K(x - step * phi(x))|_inf`.
pub fn vi_residual(game: &GameInstance, x: &[Vec<f64>], step: f64) -> Result<f64, OracleError> {
    let mut ws = ProjectionWorkspace::default();
    let next = centralized_step(game, x, step, &mut ws)?;
    Ok(max_abs_diff(x, &next))
}

/// Projection of the bounding-box midpoint (lower bound where the box is
/// unbounded above).
pub fn default_start(game: &GameInstance) -> Result<Vec<Vec<f64>>, OracleError> {
    let mut ws = ProjectionWorkspace::default();
    game.players()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let set = p.set();
            let z: Vec<f64> = set
                .lower()
                .iter()
                .zip(set.upper())
                .map(|(&l, &u)| {
                    match (l.is_finite(), u.is_finite()) {
                        (true, true) => 0.5 * (l + u),
                        (true, false) => l,
                        (false, true) => u,
                        (false, false) => 0.0,
                    }
                })
                .collect();
            set.project(&z, &mut ws)
                .map_err(|source| OracleError::Projection { player: i, source })
        })
        .collect()
}

/// `1 / (L + mu)` from sampled estimates of the Lipschitz and monotonicity
/// constants of `phi`.
pub fn default_step<R: Rng + ?Sized>(game: &GameInstance, rng: &mut R) -> Result<f64, OracleError> {
    let l = probe_phi_lipschitz(game, 200, rng)?;
    let mu = probe_monotonicity(game, 200, rng)?.estimated_mu.max(0.0);
    let step = 1.0 / (l + mu);
    if step.is_finite() && step > 0.0 {
        Ok(step)
    } else {
        Err(OracleError::InvalidStep(step))
    }
}

pub fn solve_centralized(
    game: &GameInstance,
    step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<OracleSolution, OracleError> {
    let x0 = default_start(game)?;
    solve_centralized_from(game, x0, step, tol, max_iters)
}

/// Iterates `x <- Pi_K(x - step * phi(x))` until `|x+ - x|_inf <= tol`.
pub fn solve_centralized_from(
    game: &GameInstance,
    x0: Vec<Vec<f64>>,
    step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<OracleSolution, OracleError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(OracleError::InvalidStep(step));
    }
    game.check_profile(&x0)?;
    let mut ws = ProjectionWorkspace::default();
    let mut x = x0;
    let mut residual = f64::INFINITY;
    for it in 0..max_iters {
        let next = centralized_step(game, &x, step, &mut ws)?;
        residual = max_abs_diff(&x, &next);
        if residual <= tol {
            return Ok(OracleSolution {
                x,
                iterations: it,
                residual,
            });
        }
        x = next;
    }
    Err(OracleError::NoConvergence {
        iterations: max_iters,
        residual,
    })
}

/// Gauss-Seidel best-response iteration where each player's best response
/// is the grid point (with `grid_resolution` points per coordinate) that
/// minimizes that player's natural residual, the others held fixed.
pub fn brute_force_vi(game: &GameInstance, grid_resolution: usize) -> Result<Vec<Vec<f64>>, OracleError> {
    if game.total_dim() > 4 {
        return Err(OracleError::Unsupported(format!(
            "total dimension {} exceeds 4",
            game.total_dim()
        )));
    }
    if grid_resolution < 2 {
        return Err(OracleError::Unsupported("grid needs at least two points".into()));
    }
    for (i, p) in game.players().iter().enumerate() {
        if p.set().kind() != SetKind::Box || !p.set().is_bounded() {
            return Err(OracleError::Unsupported(format!("player {i} needs a compact box")));
        }
    }
    let grids: Vec<Vec<Vec<f64>>> = game
        .players()
        .iter()
        .map(|p| {
            let set = p.set();
            let axes: Vec<Vec<f64>> = set
                .lower()
                .iter()
                .zip(set.upper())
                .map(|(&l, &u)| {
                    (0..grid_resolution)
                        .map(|t| l + (u - l) * t as f64 / (grid_resolution - 1) as f64)
                        .collect()
                })
                .collect();
            cartesian(&axes)
        })
        .collect();
    let mut x: Vec<Vec<f64>> = grids.iter().map(|g| g[0].clone()).collect();
    let m = game.aggregate_dim();
    let mut h = vec![0.0; m];
    const MAX_SWEEPS: usize = 10_000;
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for i in 0..game.n_players() {
            let player = game.player(i);
            let mut others = vec![0.0; m];
            for (j, xj) in x.iter().enumerate() {
                if j != i {
                    game.player(j).aggregate_map().accumulate(xj, &mut others);
                }
            }
            let set = player.set();
            let mut best: Option<(f64, &Vec<f64>)> = None;
            for cand in &grids[i] {
                player.aggregate_map().apply(cand, &mut h);
                let u: Vec<f64> = others.iter().zip(&h).map(|(a, b)| a + b).collect();
                let g = player.gradient(cand, &u);
                let r = cand
                    .iter()
                    .zip(&g)
                    .enumerate()
                    .map(|(c, (xc, gc))| (xc - (xc - gc).clamp(set.lower()[c], set.upper()[c])).abs())
                    .fold(0.0, f64::max);
                if best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, cand));
                }
            }
            let best = best.map(|(_, c)| c.clone()).unwrap_or_default();
            if best != x[i] {
                x[i] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(x);
        }
    }
    Err(OracleError::NoConvergence {
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
    })
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// `max |x - x*| / max |x*|` over all players and coordinates.
pub fn error_metric(x: &[Vec<f64>], x_star: &[Vec<f64>]) -> Result<f64, OracleError> {
    if x.len() != x_star.len() || x.iter().zip(x_star).any(|(a, b)| a.len() != b.len()) {
        return Err(OracleError::Shape);
    }
    let scale = x_star.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(OracleError::ZeroReference);
    }
    Ok(max_abs_diff(x, x_star) / scale)
}

/// On-disk cache of equilibria keyed by instance seed and a hash of the
/// instance parameters.
#[derive(Debug, Clone)]
pub struct OracleCache {
    dir: PathBuf,
}

impl OracleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<T: Serialize>(seed: Option<u64>, params: &T) -> Result<String, OracleError> {
        let bytes = serde_json::to_vec(params).map_err(|e| OracleError::Cache(e.to_string()))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        Ok(match seed {
            Some(s) => format!("{s}-{digest}"),
            None => digest,
        })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<OracleSolution>, OracleError> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| OracleError::Cache(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| OracleError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn store(&self, key: &str, sol: &OracleSolution) -> Result<(), OracleError> {
        fs::create_dir_all(&self.dir).map_err(|e| OracleError::Cache(e.to_string()))?;
        let text = serde_json::to_string(sol).map_err(|e| OracleError::Cache(e.to_string()))?;
        fs::write(self.path(key), text).map_err(|e| OracleError::Cache(e.to_string()))
    }

    pub fn get_or_solve<F>(&self, key: &str, solve: F) -> Result<OracleSolution, OracleError>
    where
        F: FnOnce() -> Result<OracleSolution, OracleError>,
    {
        if let Some(sol) = self.load(key)? {
            return Ok(sol);
        }
        let sol = solve()?;
        self.store(key, &sol)?;
        Ok(sol)
    }
}
