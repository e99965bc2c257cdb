use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cournot::{sample_params, CournotParams};
use crate::game::Relation;
use crate::graph::TopologyKind;

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sync,
    Gossip,
}

/// Where the Cournot instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GameSource {
    Seeded {
        seed: u64,
        players: usize,
        locations: usize,
        #[serde(default = "default_relation")]
        coupling: Relation,
    },
    Explicit {
        params: CournotParams,
    },
}

fn default_relation() -> Relation {
    Relation::Eq
}

impl GameSource {
    pub fn params(&self) -> Result<CournotParams, ExperimentError> {
        match self {
            Self::Seeded {
                seed,
                players,
                locations,
                coupling,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut p = sample_params(*players, *locations, &mut rng)?;
                p.coupling = *coupling;
                Ok(p)
            }
            Self::Explicit { params } => {
                params.validate()?;
                Ok(params.clone())
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Seeded { seed, .. } => Some(*seed),
            Self::Explicit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSpec {
    /// Synchronous `c / (k + offset)`.
    Harmonic {
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "one_usize")]
        offset: usize,
    },
    /// Synchronous constant step.
    Constant { alpha: f64 },
    /// Gossip `c / Gamma_k(i)`.
    UpdateCount {
        #[serde(default = "one")]
        c: f64,
    },
    /// Gossip per-agent constants drawn once per path from `U(lo, hi)`.
    UniformConstant { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    /// Defaults to `1 / (L + mu)` from probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn default_tol() -> f64 {
    crate::oracle::DEFAULT_TOL
}

fn default_max_iters() -> usize {
    crate::oracle::DEFAULT_MAX_ITERS
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            step: None,
            tol: default_tol(),
            max_iters: default_max_iters(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub algorithm: Algorithm,
    pub topology: TopologyKind,
    /// Fresh random spanning tree every iteration (synchronous only).
    #[serde(default)]
    pub dynamic: bool,
    pub stepsize: StepsizeSpec,
    pub iters: usize,
    /// Extra iteration counts at which errors are also recorded.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_paths")]
    pub sample_paths: usize,
    #[serde(default = "default_confidence")]
    pub confidence_level: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub oracle: OracleSettings,
}

fn default_paths() -> usize {
    50
}

fn default_confidence() -> f64 {
    0.90
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        toml::to_string(self).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.sample_paths == 0 {
            return bad("sample_paths must be at least 1".into());
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return bad(format!("confidence_level {} not in (0, 1)", self.confidence_level));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.iters) {
            return bad(format!("checkpoint {c} outside 1..={}", self.iters));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match (&self.stepsize, self.algorithm) {
            (StepsizeSpec::Harmonic { c, offset }, Algorithm::Sync) if positive(*c) && *offset > 0 => {}
            (StepsizeSpec::Constant { alpha }, Algorithm::Sync) if positive(*alpha) => {}
            (StepsizeSpec::UpdateCount { c }, Algorithm::Gossip) if positive(*c) => {}
            (StepsizeSpec::UniformConstant { lo, hi }, Algorithm::Gossip) if positive(*lo) && hi >= lo && hi.is_finite() => {}
            (s, a) => return bad(format!("stepsize {s:?} is invalid for {a:?}")),
        }
        if self.dynamic && self.algorithm == Algorithm::Gossip {
            return bad("gossip runs on a static topology".into());
        }
        Ok(())
    }

    /// Sorted, deduplicated checkpoints including the final iteration.
    pub fn all_checkpoints(&self) -> Vec<usize> {
        let mut c = self.checkpoints.clone();
        c.push(self.iters);
        c.sort_unstable();
        c.dedup();
        c
    }
}
