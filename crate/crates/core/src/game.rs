//! Aggregative games: players, feasible sets, gradient maps and the
//! aggregate-coupled game map `phi`.
//!
//! A player `i` chooses `x_i` in a compact convex set `K_i` and its payoff
//! gradient depends on its own decision and on the aggregate
//! `u = sum_j h_j(x_j)`. The stacked map
//! `phi(x) = (F_1(x_1, u), ..., F_N(x_N, u))` defines the variational
//! inequality whose solution is the Nash equilibrium.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::projection::{self, ProjectionError, ProjectionWorkspace};

/// `F_i(x_i, u)` written into `out` (length `dim`).
pub type GradientFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// `h_i(x_i)` written into `out` (length of the aggregate).
pub type AggregateFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Pairs closer than this are resampled by the probes.
pub const DEGENERATE_PAIR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one player")]
    NoPlayers,
    #[error("player {player}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        player: usize,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected} players, found {found}")]
    PlayerCountMismatch { expected: usize, found: usize },
    #[error("player {player}: aggregate map is inconsistent with aggregate dimension {aggregate_dim}: {reason}")]
    AggregateMap {
        player: usize,
        aggregate_dim: usize,
        reason: String,
    },
    #[error("player {player}: feasible set is unbounded")]
    Unbounded { player: usize },
    #[error("player {player}: {source}")]
    Projection {
        player: usize,
        #[source]
        source: ProjectionError,
    },
    #[error("player {player} out of range (game has {players} players)")]
    NoSuchPlayer { player: usize, players: usize },
}

/// Relation of a linear coupling constraint `a^T z (=|>=) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoupling {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearCoupling {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().zip(z).map(|(a, z)| a * z).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Box,
    BoxWithLinearCoupling,
}

/// A box, optionally intersected with one linear constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
    coupling: Option<LinearCoupling>,
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProjectionError> {
        Self::build(lower, upper, None)
    }

    pub fn with_coupling(
        lower: Vec<f64>,
        upper: Vec<f64>,
        coupling: LinearCoupling,
    ) -> Result<Self, ProjectionError> {
        Self::build(lower, upper, Some(coupling))
    }

    fn build(
        lower: Vec<f64>,
        upper: Vec<f64>,
        coupling: Option<LinearCoupling>,
    ) -> Result<Self, ProjectionError> {
        if lower.len() != upper.len() {
            return Err(ProjectionError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        projection::check_bounds(&lower, &upper)?;
        if let Some(c) = &coupling {
            if c.coeffs.len() != lower.len() {
                return Err(ProjectionError::DimensionMismatch {
                    expected: lower.len(),
                    found: c.coeffs.len(),
                });
            }
        }
        let set = Self {
            lower,
            upper,
            coupling,
        };
        // Nonemptiness: project a finite interior reference point.
        let mid: Vec<f64> = set
            .lower
            .iter()
            .zip(&set.upper)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l,
                (false, true) => u,
                (false, false) => 0.0,
            })
            .collect();
        set.project(&mid, &mut ProjectionWorkspace::default())?;
        Ok(set)
    }

    pub fn kind(&self) -> SetKind {
        if self.coupling.is_some() {
            SetKind::BoxWithLinearCoupling
        } else {
            SetKind::Box
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn coupling(&self) -> Option<&LinearCoupling> {
        self.coupling.as_ref()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower
            .iter()
            .chain(&self.upper)
            .all(|b| b.is_finite())
    }

    /// Membership with slack `tol` on the box and on the coupling residual.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol);
        in_box
            && match &self.coupling {
                None => true,
                Some(c) => {
                    let r = c.value(x) - c.rhs;
                    let slack = tol * (1.0 + c.rhs.abs());
                    match c.relation {
                        Relation::Eq => r.abs() <= slack,
                        Relation::Ge => r >= -slack,
                    }
                }
            }
    }

    pub fn project(
        &self,
        z: &[f64],
        ws: &mut ProjectionWorkspace,
    ) -> Result<Vec<f64>, ProjectionError> {
        let mut out = vec![0.0; self.dim()];
        self.project_into(z, ws, &mut out)?;
        Ok(out)
    }

    pub fn project_into(
        &self,
        z: &[f64],
        ws: &mut ProjectionWorkspace,
        out: &mut [f64],
    ) -> Result<(), ProjectionError> {
        if z.len() != self.dim() {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.dim(),
                found: z.len(),
            });
        }
        match &self.coupling {
            None => {
                projection::clamp_into(z, &self.lower, &self.upper, out);
                ws.set_last_iterations(0);
                Ok(())
            }
            Some(_) => projection::project_coupled_into(z, self, ws, out),
        }
    }

    /// Uniform draw from the bounding box followed by projection onto the set.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        ws: &mut ProjectionWorkspace,
    ) -> Result<Option<Vec<f64>>, ProjectionError> {
        if !self.is_bounded() {
            return Ok(None);
        }
        let z: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
            .collect();
        self.project(&z, ws).map(Some)
    }

    /// Largest Euclidean norm over the bounding box.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// How a player's decision enters the aggregate.
#[derive(Clone)]
pub enum AggregateMap {
    /// `h_i(x_i) = x_i`; requires `dim == aggregate_dim`.
    Identity,
    /// `h_i(x_i) = (x_i[idx_0], x_i[idx_1], ...)`.
    Select(Vec<usize>),
    /// Arbitrary map; must write exactly `aggregate_dim` entries.
    Custom(Arc<AggregateFn>),
}

impl AggregateMap {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::Custom(Arc::new(f))
    }

    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Identity => out.copy_from_slice(x),
            Self::Select(idx) => {
                for (o, &j) in out.iter_mut().zip(idx) {
                    *o = x[j];
                }
            }
            Self::Custom(f) => f(x, out),
        }
    }

    /// Adds `h_i(x)` into `acc`.
    #[inline]
    pub fn accumulate(&self, x: &[f64], acc: &mut [f64]) {
        match self {
            Self::Identity => acc.iter_mut().zip(x).for_each(|(a, v)| *a += v),
            Self::Select(idx) => {
                for (a, &j) in acc.iter_mut().zip(idx) {
                    *a += x[j];
                }
            }
            Self::Custom(f) => {
                let mut tmp = vec![0.0; acc.len()];
                f(x, &mut tmp);
                acc.iter_mut().zip(&tmp).for_each(|(a, v)| *a += v);
            }
        }
    }
}

impl fmt::Debug for AggregateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Select(idx) => f.debug_tuple("Select").field(idx).finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone)]
pub struct PlayerSpec {
    dim: usize,
    set: FeasibleSet,
    gradient: Arc<GradientFn>,
    aggregate: AggregateMap,
}

impl PlayerSpec {
    pub fn new<F>(set: FeasibleSet, gradient: F, aggregate: AggregateMap) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::from_arc(set, Arc::new(gradient), aggregate)
    }

    pub fn from_arc(set: FeasibleSet, gradient: Arc<GradientFn>, aggregate: AggregateMap) -> Self {
        Self {
            dim: set.dim(),
            set,
            gradient,
            aggregate,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn aggregate_map(&self) -> &AggregateMap {
        &self.aggregate
    }

    #[inline]
    pub fn gradient_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.gradient)(x, u, out)
    }

    pub fn gradient(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, u, &mut out);
        out
    }
}

impl fmt::Debug for PlayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlayerSpec")
            .field("dim", &self.dim)
            .field("set", &self.set)
            .field("aggregate", &self.aggregate)
            .finish_non_exhaustive()
    }
}

/// An aggregative game with `N >= 1` players sharing an aggregate of
/// dimension `n`.
#[derive(Clone, Debug)]
pub struct GameInstance {
    players: Vec<PlayerSpec>,
    aggregate_dim: usize,
}

impl GameInstance {
    pub fn new(players: Vec<PlayerSpec>, aggregate_dim: usize) -> Result<Self, GameError> {
        if players.is_empty() {
            return Err(GameError::NoPlayers);
        }
        for (i, p) in players.iter().enumerate() {
            let bad = |reason: String| GameError::AggregateMap {
                player: i,
                aggregate_dim,
                reason,
            };
            match &p.aggregate {
                AggregateMap::Identity if p.dim != aggregate_dim => {
                    return Err(bad(format!("identity map on a {}-dim decision", p.dim)));
                }
                AggregateMap::Select(idx) => {
                    if idx.len() != aggregate_dim {
                        return Err(bad(format!("selects {} coordinates", idx.len())));
                    }
                    if let Some(&j) = idx.iter().find(|&&j| j >= p.dim) {
                        return Err(bad(format!("index {j} out of range")));
                    }
                }
                _ => {}
            }
        }
        Ok(Self {
            players,
            aggregate_dim,
        })
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn aggregate_dim(&self) -> usize {
        self.aggregate_dim
    }

    pub fn players(&self) -> &[PlayerSpec] {
        &self.players
    }

    pub fn player(&self, i: usize) -> &PlayerSpec {
        &self.players[i]
    }

    pub fn total_dim(&self) -> usize {
        self.players.iter().map(|p| p.dim).sum()
    }

    pub fn is_bounded(&self) -> bool {
        self.players.iter().all(|p| p.set.is_bounded())
    }

    pub fn check_profile(&self, x: &[Vec<f64>]) -> Result<(), GameError> {
        if x.len() != self.players.len() {
            return Err(GameError::PlayerCountMismatch {
                expected: self.players.len(),
                found: x.len(),
            });
        }
        for (i, (p, xi)) in self.players.iter().zip(x).enumerate() {
            if xi.len() != p.dim {
                return Err(GameError::DimensionMismatch {
                    player: i,
                    expected: p.dim,
                    found: xi.len(),
                });
            }
        }
        Ok(())
    }

    /// `h_i(x_i)` for one player.
    pub fn player_aggregate(&self, i: usize, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.aggregate_dim];
        self.players[i].aggregate.apply(xi, &mut out);
        out
    }

    /// `sum_i h_i(x_i)`, without dimension checks.
    pub(crate) fn aggregate_unchecked(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![0.0; self.aggregate_dim];
        for (p, xi) in self.players.iter().zip(x) {
            p.aggregate.accumulate(xi, &mut acc);
        }
        acc
    }

    /// The aggregate `sum_i h_i(x_i)`.
    pub fn aggregate(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, GameError> {
        self.check_profile(x)?;
        Ok(self.aggregate_unchecked(x))
    }

    /// The game map: every `F_i` evaluated at the one shared aggregate.
    pub fn evaluate_phi(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GameError> {
        self.check_profile(x)?;
        let u = self.aggregate_unchecked(x);
        Ok(self
            .players
            .iter()
            .zip(x)
            .map(|(p, xi)| p.gradient(xi, &u))
            .collect())
    }

    /// Projects every block onto its player's set.
    pub fn project(
        &self,
        z: &[Vec<f64>],
        ws: &mut ProjectionWorkspace,
    ) -> Result<Vec<Vec<f64>>, GameError> {
        self.check_profile(z)?;
        self.players
            .iter()
            .zip(z)
            .enumerate()
            .map(|(i, (p, zi))| {
                p.set
                    .project(zi, ws)
                    .map_err(|source| GameError::Projection { player: i, source })
            })
            .collect()
    }

    /// One random profile, each block drawn by [`FeasibleSet::sample`].
    pub fn sample_profile<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        ws: &mut ProjectionWorkspace,
    ) -> Result<Vec<Vec<f64>>, GameError> {
        self.players
            .iter()
            .enumerate()
            .map(|(i, p)| match p.set.sample(rng, ws) {
                Ok(Some(x)) => Ok(x),
                Ok(None) => Err(GameError::Unbounded { player: i }),
                Err(source) => Err(GameError::Projection { player: i, source }),
            })
            .collect()
    }
}

pub fn dot_blocks(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

pub fn sub_blocks(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_blocks(a: &[Vec<f64>]) -> f64 {
    dot_blocks(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    /// `min (phi(x) - phi(x'))^T (x - x')` over the sampled pairs.
    pub min_inner_product: f64,
    /// The same quantity divided by `|x - x'|^2`.
    pub estimated_mu: f64,
    pub pairs: usize,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.min_inner_product >= 0.0 && self.estimated_mu >= 0.0
    }
}

/// Samples pairs from `K` and reports the smallest observed monotonicity
/// inner product and curvature ratio.
pub fn probe_monotonicity<R: Rng + ?Sized>(
    game: &GameInstance,
    sample_count: usize,
    rng: &mut R,
) -> Result<MonotonicityReport, GameError> {
    let mut ws = ProjectionWorkspace::default();
    let mut report = MonotonicityReport {
        min_inner_product: f64::INFINITY,
        estimated_mu: f64::INFINITY,
        pairs: 0,
    };
    for _ in 0..sample_count {
        let Some((x, y)) = sample_distinct_pair(game, rng, &mut ws)? else {
            continue;
        };
        let d = sub_blocks(&x, &y);
        let dphi = sub_blocks(&game.evaluate_phi(&x)?, &game.evaluate_phi(&y)?);
        let inner = dot_blocks(&dphi, &d);
        let dist2 = dot_blocks(&d, &d);
        report.min_inner_product = report.min_inner_product.min(inner);
        report.estimated_mu = report.estimated_mu.min(inner / dist2);
        report.pairs += 1;
    }
    Ok(report)
}

type Profile = Vec<Vec<f64>>;

fn sample_distinct_pair<R: Rng + ?Sized>(
    game: &GameInstance,
    rng: &mut R,
    ws: &mut ProjectionWorkspace,
) -> Result<Option<(Profile, Profile)>, GameError> {
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        let x = game.sample_profile(rng, ws)?;
        let y = game.sample_profile(rng, ws)?;
        if norm_blocks(&sub_blocks(&x, &y)) >= DEGENERATE_PAIR_THRESHOLD {
            return Ok(Some((x, y)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    /// Largest sampled `|F_i(x_i,u) - F_i(x_i,z)| / |u - z|`.
    pub estimated_lbar: f64,
    /// Largest sampled `|F_i(x_i,u) - F_i(y_i,u)| / |x_i - y_i|`.
    pub estimated_l: f64,
}

/// Empirical Lipschitz constants of `F_i` in the aggregate and in the
/// player's own decision. Aggregates are drawn from `sum_j h_j(K_j)`.
pub fn probe_lipschitz<R: Rng + ?Sized>(
    game: &GameInstance,
    player: usize,
    sample_count: usize,
    rng: &mut R,
) -> Result<LipschitzReport, GameError> {
    if player >= game.n_players() {
        return Err(GameError::NoSuchPlayer {
            player,
            players: game.n_players(),
        });
    }
    let mut ws = ProjectionWorkspace::default();
    let spec = game.player(player);
    let mut report = LipschitzReport {
        estimated_lbar: 0.0,
        estimated_l: 0.0,
    };
    let draw_point = |rng: &mut R, ws: &mut ProjectionWorkspace| match spec.set.sample(rng, ws) {
        Ok(Some(x)) => Ok(x),
        Ok(None) => Err(GameError::Unbounded { player }),
        Err(source) => Err(GameError::Projection { player, source }),
    };
    for _ in 0..sample_count {
        let xi = draw_point(rng, &mut ws)?;
        let yi = draw_point(rng, &mut ws)?;
        let u = game.aggregate_unchecked(&game.sample_profile(rng, &mut ws)?);
        let z = game.aggregate_unchecked(&game.sample_profile(rng, &mut ws)?);

        let fu = spec.gradient(&xi, &u);
        let du = norm(&sub(&u, &z));
        if du >= DEGENERATE_PAIR_THRESHOLD {
            let fz = spec.gradient(&xi, &z);
            report.estimated_lbar = report.estimated_lbar.max(norm(&sub(&fu, &fz)) / du);
        }
        let dx = norm(&sub(&xi, &yi));
        if dx >= DEGENERATE_PAIR_THRESHOLD {
            let fy = spec.gradient(&yi, &u);
            report.estimated_l = report.estimated_l.max(norm(&sub(&fu, &fy)) / dx);
        }
    }
    Ok(report)
}

/// Lipschitz estimate of `phi` over `K`: the larger of a sampled secant
/// ratio and a finite-difference power iteration, which finds the stiff
/// directions random pairs tend to miss.
pub fn probe_phi_lipschitz<R: Rng + ?Sized>(
    game: &GameInstance,
    sample_count: usize,
    rng: &mut R,
) -> Result<f64, GameError> {
    let mut ws = ProjectionWorkspace::default();
    let mut best: f64 = 0.0;
    for _ in 0..sample_count {
        if let Some((x, y)) = sample_distinct_pair(game, rng, &mut ws)? {
            let d = sub_blocks(&game.evaluate_phi(&x)?, &game.evaluate_phi(&y)?);
            best = best.max(norm_blocks(&d) / norm_blocks(&sub_blocks(&x, &y)));
        }
    }

    let base = game.sample_profile(rng, &mut ws)?;
    let phi0 = game.evaluate_phi(&base)?;
    let scale = 1e-6 * (1.0 + norm_blocks(&base));
    let mut dir: Vec<Vec<f64>> = base
        .iter()
        .map(|b| b.iter().map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    for _ in 0..60 {
        let n = norm_blocks(&dir);
        if n == 0.0 {
            break;
        }
        let shifted: Vec<Vec<f64>> = base
            .iter()
            .zip(&dir)
            .map(|(b, d)| b.iter().zip(d).map(|(b, d)| b + scale * d / n).collect())
            .collect();
        let jd: Vec<Vec<f64>> = sub_blocks(&game.evaluate_phi(&shifted)?, &phi0)
            .into_iter()
            .map(|v| v.into_iter().map(|e| e / scale).collect())
            .collect();
        best = best.max(norm_blocks(&jd));
        dir = jd;
    }
    Ok(best)
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
