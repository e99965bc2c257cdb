//! Synchronous consensus-based equilibrium seeking over a (possibly
//! time-varying) graph.
//!
//! Every iteration each agent mixes its neighbours' estimates with the
//! current weights, takes a projected gradient step using `N * v_hat_i` as
//! its aggregate estimate, and corrects its estimate by the change in its
//! own aggregate contribution. The correction keeps
//! `sum_i v_i = sum_i h_i(x_i)` at every iteration.

use std::io::{self, Write};

use rand::{Rng, RngCore};

use crate::game::GameInstance;
use crate::graph::{build_topology, build_weights, check_q_connectivity, GraphError, Topology, TopologyKind, WeightMatrix, WeightRule};
use crate::oracle::error_metric;
use crate::projection::ProjectionWorkspace;
use crate::state::{EngineError, NetworkState, StepsizeRule};

/// Result of one synchronous step, including the mixed estimates.
#[derive(Debug, Clone)]
pub struct SyncStep {
    pub state: NetworkState,
    pub v_hat: Vec<Vec<f64>>,
}

/// One synchronous iteration; all agents update from the pre-step state.
pub fn sync_step(
    game: &GameInstance,
    state: &NetworkState,
    weights: &WeightMatrix,
    alpha: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<NetworkState, EngineError> {
    sync_step_detailed(game, state, weights, alpha, ws).map(|s| s.state)
}

pub fn sync_step_detailed(
    game: &GameInstance,
    state: &NetworkState,
    weights: &WeightMatrix,
    alpha: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<SyncStep, EngineError> {
    let n = game.n_players();
    if state.x.len() != n || state.v.len() != n {
        return Err(EngineError::StateShape {
            expected: n,
            found: state.x.len(),
        });
    }
    if weights.n() != n {
        return Err(EngineError::WeightShape {
            expected: n,
            found: weights.n(),
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(EngineError::InvalidStepsize(alpha));
    }
    let w = weights.matrix();
    let m = game.aggregate_dim();
    let scale = n as f64;

    let mut v_hat = vec![vec![0.0; m]; n];
    for (i, vh) in v_hat.iter_mut().enumerate() {
        for (j, vj) in state.v.iter().enumerate() {
            let wij = w[(i, j)];
            if wij != 0.0 {
                vh.iter_mut().zip(vj).for_each(|(a, b)| *a += wij * b);
            }
        }
    }

    let mut x_next = Vec::with_capacity(n);
    let mut v_next = Vec::with_capacity(n);
    let mut u = vec![0.0; m];
    let mut h_old = vec![0.0; m];
    let mut h_new = vec![0.0; m];
    for (i, player) in game.players().iter().enumerate() {
        let xi = &state.x[i];
        u.iter_mut().zip(&v_hat[i]).for_each(|(a, b)| *a = scale * b);
        let mut z = player.gradient(xi, &u);
        z.iter_mut().zip(xi).for_each(|(g, x)| *g = x - alpha * *g);
        let xi_next = player.set().project(&z, ws).map_err(|source| EngineError::Projection {
            player: i,
            iteration: state.k,
            source,
        })?;
        player.aggregate_map().apply(xi, &mut h_old);
        player.aggregate_map().apply(&xi_next, &mut h_new);
        let vi_next: Vec<f64> = (0..m).map(|c| v_hat[i][c] + h_new[c] - h_old[c]).collect();
        x_next.push(xi_next);
        v_next.push(vi_next);
    }
    Ok(SyncStep {
        state: NetworkState {
            x: x_next,
            v: v_next,
            k: state.k + 1,
        },
        v_hat,
    })
}

/// Supplies the connectivity graph and mixing weights for each iteration.
pub trait GraphSequence {
    fn graph(&mut self, k: usize, rng: &mut dyn RngCore) -> Result<(&Topology, &WeightMatrix), GraphError>;
}

/// The same graph at every iteration.
#[derive(Debug, Clone)]
pub struct StaticGraph {
    topology: Topology,
    weights: WeightMatrix,
}

impl StaticGraph {
    pub fn new(topology: Topology, rule: WeightRule) -> Self {
        let weights = build_weights(&topology, rule);
        Self { topology, weights }
    }

    /// Uses caller-supplied weights after checking them against the topology.
    pub fn with_weights(topology: Topology, weights: WeightMatrix) -> Result<Self, GraphError> {
        weights.verify(&topology)?;
        Ok(Self { topology, weights })
    }
}

impl GraphSequence for StaticGraph {
    fn graph(&mut self, _k: usize, _rng: &mut dyn RngCore) -> Result<(&Topology, &WeightMatrix), GraphError> {
        Ok((&self.topology, &self.weights))
    }
}

/// A fresh random spanning tree every iteration, weights recomputed from
/// the current degrees.
#[derive(Debug, Clone)]
pub struct RandomTreeSequence {
    n: usize,
    rule: WeightRule,
    current: Option<(Topology, WeightMatrix)>,
}

impl RandomTreeSequence {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rule: WeightRule::MetropolisHalf,
            current: None,
        }
    }
}

impl GraphSequence for RandomTreeSequence {
    fn graph(&mut self, _k: usize, rng: &mut dyn RngCore) -> Result<(&Topology, &WeightMatrix), GraphError> {
        let t = build_topology(TopologyKind::RandomConnected, self.n, rng)?;
        let w = build_weights(&t, self.rule);
        let (t, w) = self.current.insert((t, w));
        Ok((t, w))
    }
}

/// Replays a fixed list of graphs, wrapping around at the end.
#[derive(Debug, Clone)]
pub struct CyclicSequence {
    graphs: Vec<(Topology, WeightMatrix)>,
}

impl CyclicSequence {
    pub fn new(topologies: Vec<Topology>, rule: WeightRule) -> Self {
        let graphs = topologies
            .into_iter()
            .map(|t| {
                let w = build_weights(&t, rule);
                (t, w)
            })
            .collect();
        Self { graphs }
    }
}

impl GraphSequence for CyclicSequence {
    fn graph(&mut self, k: usize, _rng: &mut dyn RngCore) -> Result<(&Topology, &WeightMatrix), GraphError> {
        let (t, w) = &self.graphs[k % self.graphs.len()];
        Ok((t, w))
    }
}

/// What an observer sees after iteration `k` (which used `W(k)` and
/// `alpha_k` and produced state `k + 1`).
pub struct SyncView<'a> {
    pub k: usize,
    pub previous: &'a NetworkState,
    pub state: &'a NetworkState,
    pub v_hat: &'a [Vec<f64>],
    /// `max_i |v_hat_i^k - y^k|`.
    pub disagreement: f64,
    pub alpha: f64,
    pub topology: &'a Topology,
    pub weights: &'a WeightMatrix,
}

pub trait SyncObserver {
    fn observe(&mut self, view: &SyncView<'_>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    pub stepsize: StepsizeRule,
    pub iters: usize,
    /// Check Q-connectivity over a sliding window of this length.
    pub q_window: Option<usize>,
}

impl SyncConfig {
    pub fn new(stepsize: StepsizeRule, iters: usize) -> Self {
        Self {
            stepsize,
            iters,
            q_window: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyncTrajectory {
    pub initial: NetworkState,
    pub final_state: NetworkState,
}

/// Runs from a random feasible start drawn from `rng`.
pub fn run_sync<R: Rng>(
    game: &GameInstance,
    graphs: &mut dyn GraphSequence,
    config: &SyncConfig,
    rng: &mut R,
    observer: Option<&mut dyn SyncObserver>,
) -> Result<SyncTrajectory, EngineError> {
    let initial = NetworkState::random(game, rng)?;
    run_sync_from(game, initial, graphs, config, rng, observer)
}

pub fn run_sync_from<R: Rng>(
    game: &GameInstance,
    initial: NetworkState,
    graphs: &mut dyn GraphSequence,
    config: &SyncConfig,
    rng: &mut R,
    mut observer: Option<&mut dyn SyncObserver>,
) -> Result<SyncTrajectory, EngineError> {
    config.stepsize.validate()?;
    let mut ws = ProjectionWorkspace::default();
    let mut window: Vec<Topology> = Vec::new();
    let mut state = initial.clone();
    for k in 0..config.iters {
        let alpha = config.stepsize.alpha(k);
        let (topology, weights) = graphs.graph(k, rng)?;
        if let Some(q) = config.q_window {
            window.push(topology.clone());
            if window.len() > q {
                window.remove(0);
            }
            if window.len() == q && !check_q_connectivity(&window, q) {
                return Err(EngineError::NotQConnected { q, iteration: k });
            }
        }
        let step = sync_step_detailed(game, &state, weights, alpha, &mut ws)?;
        if let Some(obs) = observer.as_deref_mut() {
            let y = state.mean_estimate();
            let disagreement = step
                .v_hat
                .iter()
                .map(|vh| vh.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            obs.observe(&SyncView {
                k,
                previous: &state,
                state: &step.state,
                v_hat: &step.v_hat,
                disagreement,
                alpha,
                topology,
                weights,
            });
        }
        state = step.state;
    }
    Ok(SyncTrajectory {
        initial,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    /// Iterations completed.
    pub k: usize,
    pub error: f64,
    pub disagreement: f64,
}

/// Records `(k, error, disagreement)` every `every` iterations.
#[derive(Debug, Clone)]
pub struct TrajectoryRecorder {
    x_star: Vec<Vec<f64>>,
    every: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecorder {
    pub fn new(x_star: Vec<Vec<f64>>, every: usize) -> Self {
        Self {
            x_star,
            every: every.max(1),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,error,disagreement")?;
        for r in &self.rows {
            writeln!(out, "{},{:.16e},{:.16e}", r.k, r.error, r.disagreement)?;
        }
        Ok(())
    }
}

impl SyncObserver for TrajectoryRecorder {
    fn observe(&mut self, view: &SyncView<'_>) {
        let done = view.k + 1;
        if done.is_multiple_of(self.every) {
            let error = error_metric(&view.state.x, &self.x_star).unwrap_or(f64::NAN);
            self.rows.push(TrajectoryRow {
                k: done,
                error,
                disagreement: view.disagreement,
            });
        }
    }
}
