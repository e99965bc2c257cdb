//! Asynchronous pairwise gossip on a static graph.
//!
//! At each tick one agent wakes up uniformly at random and contacts a
//! neighbour drawn from its contact distribution. Only that pair averages
//! estimates and takes a projected gradient step; every other agent is left
//! untouched.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::GameInstance;
use crate::graph::{ContactProbabilities, GraphError, Topology};
use crate::projection::ProjectionWorkspace;
use crate::state::{EngineError, NetworkState};

/// Static topology plus the contact law and the induced update probabilities.
#[derive(Debug, Clone)]
pub struct GossipModel {
    topology: Topology,
    contacts: ContactProbabilities,
    update_probs: Vec<f64>,
    phat: f64,
    samplers: Vec<WeightedIndex<f64>>,
}

impl GossipModel {
    pub fn new(topology: Topology, contacts: ContactProbabilities) -> Result<Self, GraphError> {
        if !topology.is_connected() {
            return Err(GraphError::ContactProbabilities(
                "gossip requires a connected topology".into(),
            ));
        }
        let contacts = ContactProbabilities::new(&topology, contacts.matrix().clone())?;
        let n = topology.n();
        let update_probs = (0..n)
            .map(|i| {
                let incoming: f64 = topology.neighbors(i).iter().map(|&j| contacts.get(j, i)).sum();
                (1.0 + incoming) / n as f64
            })
            .collect();
        let phat = 1.0
            + topology
                .edges()
                .flat_map(|(i, j)| [contacts.get(i, j), contacts.get(j, i)])
                .fold(f64::INFINITY, f64::min);
        let samplers = (0..n)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|j| contacts.get(i, j)).collect();
                WeightedIndex::new(row).map_err(|e| GraphError::ContactProbabilities(format!("row {i}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            topology,
            contacts,
            update_probs,
            phat,
            samplers,
        })
    }

    /// Uniform contacts over neighbours.
    pub fn uniform(topology: Topology) -> Result<Self, GraphError> {
        let contacts = ContactProbabilities::uniform(&topology)?;
        Self::new(topology, contacts)
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn contacts(&self) -> &ContactProbabilities {
        &self.contacts
    }

    /// `p_i = (1/N)(1 + sum_{j in N_i} p_ji)`.
    pub fn update_probs(&self) -> &[f64] {
        &self.update_probs
    }

    pub fn phat(&self) -> f64 {
        self.phat
    }

    pub fn p_min(&self) -> f64 {
        self.update_probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_max(&self) -> f64 {
        self.update_probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn p_ratio(&self) -> f64 {
        self.p_min() / self.p_max()
    }

    /// Draws `(I, J)`: `I` uniform over agents, `J ~ p_{I.}`.
    pub fn draw_contact<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let i = rng.random_range(0..self.n());
        let j = self.samplers[i].sample(rng);
        (i, j)
    }
}

/// Per-agent update counters `Gamma_k(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateTracker {
    gamma: Vec<u64>,
}

impl UpdateTracker {
    pub fn new(n: usize) -> Self {
        Self { gamma: vec![0; n] }
    }

    pub fn record(&mut self, i: usize, j: usize) {
        self.gamma[i] += 1;
        self.gamma[j] += 1;
    }

    pub fn count(&self, i: usize) -> u64 {
        self.gamma[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.gamma
    }
}

/// Applies one contact event, returning the new state.
pub fn gossip_step(
    game: &GameInstance,
    state: &NetworkState,
    event: (usize, usize),
    stepsizes: &[f64],
    ws: &mut ProjectionWorkspace,
) -> Result<NetworkState, EngineError> {
    let n = game.n_players();
    if stepsizes.len() != n {
        return Err(EngineError::StepsizeCount {
            expected: n,
            found: stepsizes.len(),
        });
    }
    let mut next = state.clone();
    gossip_step_in_place(game, &mut next, event, stepsizes[event.0], stepsizes[event.1], ws)?;
    Ok(next)
}

pub fn gossip_step_in_place(
    game: &GameInstance,
    state: &mut NetworkState,
    event: (usize, usize),
    alpha_i: f64,
    alpha_j: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<(), EngineError> {
    let n = game.n_players();
    let (a, b) = event;
    if a >= n || b >= n || a == b {
        return Err(EngineError::InvalidEvent(a, b));
    }
    if state.x.len() != n || state.v.len() != n {
        return Err(EngineError::StateShape {
            expected: n,
            found: state.x.len(),
        });
    }
    for alpha in [alpha_i, alpha_j] {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(EngineError::InvalidStepsize(alpha));
        }
    }
    let m = game.aggregate_dim();
    let v_hat: Vec<f64> = state.v[a]
        .iter()
        .zip(&state.v[b])
        .map(|(p, q)| 0.5 * p + 0.5 * q)
        .collect();
    let mut u = vec![0.0; m];
    u.iter_mut().zip(&v_hat).for_each(|(o, v)| *o = n as f64 * v);
    let mut h_old = vec![0.0; m];
    let mut h_new = vec![0.0; m];
    for (agent, alpha) in [(a, alpha_i), (b, alpha_j)] {
        let player = game.player(agent);
        let xi = &state.x[agent];
        let mut z = player.gradient(xi, &u);
        z.iter_mut().zip(xi).for_each(|(g, x)| *g = x - alpha * *g);
        let xi_next = player.set().project(&z, ws).map_err(|source| EngineError::Projection {
            player: agent,
            iteration: state.k,
            source,
        })?;
        player.aggregate_map().apply(xi, &mut h_old);
        player.aggregate_map().apply(&xi_next, &mut h_new);
        for c in 0..m {
            state.v[agent][c] = v_hat[c] + h_new[c] - h_old[c];
        }
        state.x[agent] = xi_next;
    }
    state.k += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeMode {
    /// `alpha_{k,i} = c / Gamma_k(i)`.
    UpdateCount { c: f64 },
    /// Fixed per-agent stepsizes.
    Constant { alphas: Vec<f64> },
}

impl StepsizeMode {
    /// Per-agent constants drawn from `U(lo, hi)`.
    pub fn sample_constant<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::Constant {
            alphas: (0..n).map(|_| rng.random_range(lo..hi)).collect(),
        }
    }
}

/// What an observer sees after tick `k` (zero-based; the state has `k + 1`
/// ticks applied).
pub struct GossipView<'a> {
    pub k: usize,
    pub event: (usize, usize),
    pub alphas: (f64, f64),
    pub tracker: &'a UpdateTracker,
    pub state: &'a NetworkState,
    /// Running `sum_i h_i(x_i)`.
    pub aggregate: &'a [f64],
}

pub trait GossipObserver {
    fn observe(&mut self, view: &GossipView<'_>);
}

impl<A: GossipObserver, B: GossipObserver> GossipObserver for (A, B) {
    fn observe(&mut self, view: &GossipView<'_>) {
        self.0.observe(view);
        self.1.observe(view);
    }
}

#[derive(Debug, Clone)]
pub struct GossipTrajectory {
    pub initial: NetworkState,
    pub final_state: NetworkState,
    pub tracker: UpdateTracker,
}

pub fn run_gossip<R: Rng>(
    game: &GameInstance,
    model: &GossipModel,
    stepsize: &StepsizeMode,
    ticks: usize,
    rng: &mut R,
    observer: Option<&mut dyn GossipObserver>,
) -> Result<GossipTrajectory, EngineError> {
    let initial = NetworkState::random(game, rng)?;
    run_gossip_from(game, model, initial, stepsize, ticks, rng, observer)
}

pub fn run_gossip_from<R: Rng>(
    game: &GameInstance,
    model: &GossipModel,
    initial: NetworkState,
    stepsize: &StepsizeMode,
    ticks: usize,
    rng: &mut R,
    mut observer: Option<&mut dyn GossipObserver>,
) -> Result<GossipTrajectory, EngineError> {
    let n = game.n_players();
    if model.n() != n {
        return Err(EngineError::WeightShape {
            expected: n,
            found: model.n(),
        });
    }
    match stepsize {
        StepsizeMode::UpdateCount { c } => {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(EngineError::InvalidStepsize(*c));
            }
        }
        StepsizeMode::Constant { alphas } => {
            if alphas.len() != n {
                return Err(EngineError::StepsizeCount {
                    expected: n,
                    found: alphas.len(),
                });
            }
            if let Some(&bad) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                return Err(EngineError::InvalidStepsize(bad));
            }
        }
    }
    let m = game.aggregate_dim();
    let mut ws = ProjectionWorkspace::default();
    let mut tracker = UpdateTracker::new(n);
    let mut state = initial.clone();
    let mut aggregate = if observer.is_some() {
        game.aggregate(&state.x)?
    } else {
        Vec::new()
    };
    let mut h_buf = vec![0.0; m];
    for k in 0..ticks {
        let (a, b) = model.draw_contact(rng);
        tracker.record(a, b);
        let alphas = match stepsize {
            StepsizeMode::UpdateCount { c } => (c / tracker.count(a) as f64, c / tracker.count(b) as f64),
            StepsizeMode::Constant { alphas } => (alphas[a], alphas[b]),
        };
        if let Some(obs) = observer.as_deref_mut() {
            for agent in [a, b] {
                game.player(agent).aggregate_map().apply(&state.x[agent], &mut h_buf);
                aggregate.iter_mut().zip(&h_buf).for_each(|(s, h)| *s -= h);
            }
            gossip_step_in_place(game, &mut state, (a, b), alphas.0, alphas.1, &mut ws)?;
            for agent in [a, b] {
                game.player(agent).aggregate_map().apply(&state.x[agent], &mut h_buf);
                aggregate.iter_mut().zip(&h_buf).for_each(|(s, h)| *s += h);
            }
            obs.observe(&GossipView {
                k,
                event: (a, b),
                alphas,
                tracker: &tracker,
                state: &state,
                aggregate: &aggregate,
            });
        } else {
            gossip_step_in_place(game, &mut state, (a, b), alphas.0, alphas.1, &mut ws)?;
        }
    }
    Ok(GossipTrajectory {
        initial,
        final_state: state,
        tracker,
    })
}

/// Records `(k, I, J)` for replay.
#[derive(Debug, Clone, Default)]
pub struct EventTrace {
    pub events: Vec<(usize, usize, usize)>,
}

impl EventTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,i,j")?;
        for (k, i, j) in &self.events {
            writeln!(out, "{k},{i},{j}")?;
        }
        Ok(())
    }
}

impl GossipObserver for EventTrace {
    fn observe(&mut self, view: &GossipView<'_>) {
        self.events.push((view.k + 1, view.event.0, view.event.1));
    }
}

/// Tracks the last tick at which `c / Gamma_k(i) <= 2 / (k p_i)` failed for
/// some agent.
#[derive(Debug, Clone)]
pub struct StepsizeEnvelope {
    c: f64,
    update_probs: Vec<f64>,
    last_violation: Option<usize>,
    ticks: usize,
}

impl StepsizeEnvelope {
    pub fn new(c: f64, model: &GossipModel) -> Self {
        Self {
            c,
            update_probs: model.update_probs().to_vec(),
            last_violation: None,
            ticks: 0,
        }
    }

    /// First tick from which the envelope held through the end of the run.
    pub fn threshold(&self) -> usize {
        self.last_violation.map_or(1, |k| k + 1)
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    /// True when the envelope holds at the final tick.
    pub fn holds_at_end(&self) -> bool {
        self.last_violation != Some(self.ticks)
    }
}

impl GossipObserver for StepsizeEnvelope {
    fn observe(&mut self, view: &GossipView<'_>) {
        let tick = view.k + 1;
        self.ticks = tick;
        let violated = self.update_probs.iter().enumerate().any(|(i, &p)| {
            let gamma = view.tracker.count(i);
            gamma == 0 || self.c / gamma as f64 > 2.0 / (tick as f64 * p)
        });
        if violated {
            self.last_violation = Some(tick);
        }
    }
}

/// `max_i |N v_i - sum_j h_j(x_j)|_inf / max(1, |sum_j h_j(x_j)|_inf)`.
pub fn concurrence_gap(state: &NetworkState, aggregate: &[f64]) -> f64 {
    let n = state.v.len() as f64;
    let scale = aggregate.iter().fold(1.0_f64, |m, a| m.max(a.abs()));
    let worst = state
        .v
        .iter()
        .flat_map(|vi| vi.iter().zip(aggregate).map(|(v, s)| (n * v - s).abs()))
        .fold(0.0, f64::max);
    worst / scale
}

/// First tick at which the concurrence gap falls to `threshold`.
#[derive(Debug, Clone)]
pub struct ConcurrenceMonitor {
    threshold: f64,
    pub first: Option<usize>,
}

impl ConcurrenceMonitor {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, first: None }
    }
}

impl GossipObserver for ConcurrenceMonitor {
    fn observe(&mut self, view: &GossipView<'_>) {
        if self.first.is_none() && concurrence_gap(view.state, view.aggregate) <= self.threshold {
            self.first = Some(view.k + 1);
        }
    }
}

/// Mean of `|x^k - x*|^2` over ticks `k >= start`.
#[derive(Debug, Clone)]
pub struct TailSquaredError {
    x_star: Vec<Vec<f64>>,
    start: usize,
    sum: f64,
    count: usize,
}

impl TailSquaredError {
    pub fn new(x_star: Vec<Vec<f64>>, start: usize) -> Self {
        Self {
            x_star,
            start,
            sum: 0.0,
            count: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }
}

impl GossipObserver for TailSquaredError {
    fn observe(&mut self, view: &GossipView<'_>) {
        if view.k + 1 < self.start {
            return;
        }
        let d: f64 = view
            .state
            .x
            .iter()
            .zip(&self.x_star)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)))
            .sum();
        self.sum += d;
        self.count += 1;
    }
}

/// Running `sum_k (1/k) sum_i |v_i^k - y^k|^2`, sampled at the midpoint and
/// at the end of the run.
#[derive(Debug, Clone)]
pub struct WeightedDisagreement {
    midpoint: usize,
    pub total: f64,
    pub at_midpoint: f64,
}

impl WeightedDisagreement {
    pub fn new(ticks: usize) -> Self {
        Self {
            midpoint: ticks / 2,
            total: 0.0,
            at_midpoint: 0.0,
        }
    }
}

impl GossipObserver for WeightedDisagreement {
    fn observe(&mut self, view: &GossipView<'_>) {
        let tick = view.k + 1;
        let y = view.state.mean_estimate();
        let sq: f64 = view
            .state
            .v
            .iter()
            .flat_map(|vi| vi.iter().zip(&y).map(|(a, b)| (a - b).powi(2)))
            .sum();
        self.total += sq / tick as f64;
        if tick == self.midpoint {
            self.at_midpoint = self.total;
        }
    }
}
