//! Network state and stepsize rules shared by both engines.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{norm, GameError, GameInstance};
use crate::graph::GraphError;
use crate::projection::{ProjectionError, ProjectionWorkspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("projection failed for player {player} at iteration {iteration}: {source}")]
    Projection {
        player: usize,
        iteration: usize,
        #[source]
        source: ProjectionError,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStepsize(f64),
    #[error("weights are {found}x{found} but the game has {expected} players")]
    WeightShape { expected: usize, found: usize },
    #[error("state has {found} players but the game has {expected}")]
    StateShape { expected: usize, found: usize },
    #[error("graph window ending at iteration {iteration} is not {q}-connected")]
    NotQConnected { q: usize, iteration: usize },
    #[error("invalid contact event ({0}, {1})")]
    InvalidEvent(usize, usize),
    #[error("{expected} per-agent stepsizes required, got {found}")]
    StepsizeCount { expected: usize, found: usize },
}

/// Per-agent decisions `x_i` and aggregate-average estimates `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Iterations (or gossip ticks) applied so far.
    pub k: usize,
}

impl NetworkState {
    /// Starts from `x0` with `v_i = h_i(x_i)`.
    pub fn from_decisions(game: &GameInstance, x0: Vec<Vec<f64>>) -> Result<Self, EngineError> {
        game.check_profile(&x0)?;
        let v = x0
            .iter()
            .enumerate()
            .map(|(i, xi)| game.player_aggregate(i, xi))
            .collect();
        Ok(Self { x: x0, v, k: 0 })
    }

    /// A random feasible start: each `x_i` is a uniform box sample projected
    /// onto `K_i`.
    pub fn random<R: Rng + ?Sized>(game: &GameInstance, rng: &mut R) -> Result<Self, EngineError> {
        let mut ws = ProjectionWorkspace::default();
        let x0 = game.sample_profile(rng, &mut ws)?;
        Self::from_decisions(game, x0)
    }

    pub fn n_agents(&self) -> usize {
        self.x.len()
    }

    /// `y = (1/N) sum_i v_i`.
    pub fn mean_estimate(&self) -> Vec<f64> {
        let n = self.v.len() as f64;
        let mut y = vec![0.0; self.v[0].len()];
        for vi in &self.v {
            y.iter_mut().zip(vi).for_each(|(a, b)| *a += b);
        }
        y.iter_mut().for_each(|a| *a /= n);
        y
    }

    /// `|sum_i v_i - sum_i h_i(x_i)| / (1 + |sum_i h_i(x_i)|)`.
    pub fn conservation_gap(&self, game: &GameInstance) -> f64 {
        let truth = game.aggregate_unchecked(&self.x);
        let mut sum_v = vec![0.0; truth.len()];
        for vi in &self.v {
            sum_v.iter_mut().zip(vi).for_each(|(a, b)| *a += b);
        }
        let diff: Vec<f64> = sum_v.iter().zip(&truth).map(|(a, b)| a - b).collect();
        norm(&diff) / (1.0 + norm(&truth))
    }

    /// `sum_i |v_i - y|`.
    pub fn disagreement_sum(&self) -> f64 {
        let y = self.mean_estimate();
        self.v
            .iter()
            .map(|vi| vi.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .sum()
    }
}

/// Iteration-indexed stepsize `alpha_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeRule {
    /// `alpha_k = c / (k + offset)`.
    Harmonic { c: f64, offset: usize },
    Constant { alpha: f64 },
}

impl StepsizeRule {
    /// `1 / (k + 1)`.
    pub fn harmonic() -> Self {
        Self::Harmonic { c: 1.0, offset: 1 }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            Self::Harmonic { c, offset } => c / (k + offset) as f64,
            Self::Constant { alpha } => alpha,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let probe = match *self {
            Self::Harmonic { c, offset } => {
                if offset == 0 {
                    return Err(EngineError::InvalidStepsize(f64::INFINITY));
                }
                c
            }
            Self::Constant { alpha } => alpha,
        };
        if probe > 0.0 && probe.is_finite() {
            Ok(())
        } else {
            Err(EngineError::InvalidStepsize(probe))
        }
    }
}
