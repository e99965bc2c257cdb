//! Experiment orchestration: configuration, seeded sample paths run in
//! parallel, statistics, and table emission.

mod config;
mod tables;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use config::{Algorithm, ExperimentConfig, GameSource, OracleSettings, StepsizeSpec};
pub use tables::{emit_tables, error_table, mixing_table, MixingRow, Table};

use crate::cournot::{build_game, CournotError, CournotParams};
use crate::game::{GameError, GameInstance};
use crate::gossip::{run_gossip, ConcurrenceMonitor, GossipModel, GossipObserver, GossipView, StepsizeMode};
use crate::graph::{build_topology, gossip_expected_mixing, GraphError, Topology, WeightRule};
use crate::oracle::{default_step, error_metric, solve_centralized, OracleCache, OracleError, OracleSolution};
use crate::state::{EngineError, StepsizeRule};
use crate::sync::{run_sync, GraphSequence, RandomTreeSequence, StaticGraph, SyncConfig, SyncObserver, SyncView};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cournot(#[from] CournotError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("sample path {path}: {source}")]
    Engine {
        path: usize,
        #[source]
        source: EngineError,
    },
    #[error("oracle failed: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Streams reserved for oracle probes and for static random topologies;
/// sample path `p` uses stream `p + 1`.
const SHARED_STREAM: u64 = 0;
const TOPOLOGY_STREAM: u64 = u64::MAX;

/// Independent generator for sample path `path`. Adding paths never changes
/// the streams of earlier ones.
pub fn path_rng(master_seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path as u64 + 1);
    rng
}

fn shared_rng(master_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(SHARED_STREAM);
    rng
}

/// A built game together with its reference equilibrium.
#[derive(Clone)]
pub struct PreparedInstance {
    pub params: CournotParams,
    pub game: GameInstance,
    pub solution: OracleSolution,
}

pub fn prepare_instance(config: &ExperimentConfig) -> Result<PreparedInstance, ExperimentError> {
    let params = config.game.params()?;
    let game = build_game(&params)?;
    let settings = &config.oracle;
    let step = match settings.step {
        Some(s) => s,
        None => default_step(&game, &mut shared_rng(config.master_seed))?,
    };
    let solve = || solve_centralized(&game, step, settings.tol, settings.max_iters);
    let solution = match &settings.cache_dir {
        Some(dir) => {
            let key = OracleCache::key(config.game.seed(), &(&params, step, settings.tol))?;
            OracleCache::new(dir).get_or_solve(&key, solve)?
        }
        None => solve()?,
    };
    Ok(PreparedInstance { params, game, solution })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub iters: usize,
    pub mean_error: f64,
    pub ci_width: f64,
    pub per_path_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algorithm: Algorithm,
    pub topology: String,
    pub dynamic: bool,
    pub players: usize,
    pub iters: usize,
    pub sample_paths: usize,
    pub confidence_level: f64,
    pub mean_error: f64,
    pub ci_width: f64,
    /// False when a single path makes the interval undefined (width 0).
    pub ci_defined: bool,
    pub per_path_errors: Vec<f64>,
    pub checkpoints: Vec<CheckpointStats>,
    pub lambda: Option<f64>,
    pub p_ratio: Option<f64>,
    pub iterations_to_concurrence: Option<usize>,
    pub runtime_secs: f64,
}

/// `2 z sd / sqrt(paths)` with `z` the `(1 + level) / 2` normal quantile.
/// Returns `(0, false)` for fewer than two paths.
pub fn confidence_width(errors: &[f64], level: f64) -> (f64, bool) {
    let n = errors.len();
    if n < 2 {
        return (0.0, false);
    }
    let mean = errors.iter().sum::<f64>() / n as f64;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    (2.0 * z * var.sqrt() / (n as f64).sqrt(), true)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Error against `x*` at each requested iteration count.
struct CheckpointErrors<'a> {
    x_star: &'a [Vec<f64>],
    checkpoints: &'a [usize],
    errors: Vec<f64>,
}

impl<'a> CheckpointErrors<'a> {
    fn new(x_star: &'a [Vec<f64>], checkpoints: &'a [usize]) -> Self {
        Self {
            x_star,
            checkpoints,
            errors: Vec::with_capacity(checkpoints.len()),
        }
    }

    fn record(&mut self, done: usize, x: &[Vec<f64>]) {
        if self.checkpoints.get(self.errors.len()) == Some(&done) {
            self.errors.push(error_metric(x, self.x_star).unwrap_or(f64::NAN));
        }
    }
}

impl SyncObserver for CheckpointErrors<'_> {
    fn observe(&mut self, view: &SyncView<'_>) {
        self.record(view.k + 1, &view.state.x);
    }
}

impl GossipObserver for CheckpointErrors<'_> {
    fn observe(&mut self, view: &GossipView<'_>) {
        self.record(view.k + 1, &view.state.x);
    }
}

/// The fixed topology an experiment runs on, reproducible from the master seed.
pub fn static_topology(config: &ExperimentConfig, n: usize) -> Result<Topology, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(TOPOLOGY_STREAM);
    Ok(build_topology(config.topology, n, &mut rng)?)
}

pub fn gossip_model(config: &ExperimentConfig, n: usize) -> Result<GossipModel, ExperimentError> {
    Ok(GossipModel::uniform(static_topology(config, n)?)?)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let instance = prepare_instance(config)?;
    run_experiment_with(config, &instance)
}

/// Runs every sample path of `config` against an already solved instance.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    instance: &PreparedInstance,
) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let start = Instant::now();
    let game = &instance.game;
    let n = game.n_players();
    let x_star = &instance.solution.x;
    let checkpoints = config.all_checkpoints();

    let (model, topology) = match config.algorithm {
        Algorithm::Gossip => {
            let m = gossip_model(config, n)?;
            let t = m.topology().clone();
            (Some(m), Some(t))
        }
        Algorithm::Sync if !config.dynamic => (None, Some(static_topology(config, n)?)),
        Algorithm::Sync => (None, None),
    };

    let run_path = |path: usize| -> Result<Vec<f64>, ExperimentError> {
        let mut rng = path_rng(config.master_seed, path);
        let mut obs = CheckpointErrors::new(x_star, &checkpoints);
        let wrap = |source| ExperimentError::Engine { path, source };
        match config.algorithm {
            Algorithm::Sync => {
                let rule = match config.stepsize {
                    StepsizeSpec::Harmonic { c, offset } => StepsizeRule::Harmonic { c, offset },
                    StepsizeSpec::Constant { alpha } => StepsizeRule::Constant { alpha },
                    _ => unreachable!("validated"),
                };
                let mut graphs: Box<dyn GraphSequence> = match &topology {
                    Some(t) => Box::new(StaticGraph::new(t.clone(), WeightRule::MetropolisHalf)),
                    None => Box::new(RandomTreeSequence::new(n)),
                };
                let cfg = SyncConfig::new(rule, config.iters);
                run_sync(game, graphs.as_mut(), &cfg, &mut rng, Some(&mut obs)).map_err(wrap)?;
            }
            Algorithm::Gossip => {
                let model = model.as_ref().expect("gossip model");
                let mode = match config.stepsize {
                    StepsizeSpec::UpdateCount { c } => StepsizeMode::UpdateCount { c },
                    StepsizeSpec::UniformConstant { lo, hi } if lo == hi => StepsizeMode::Constant { alphas: vec![lo; n] },
                    StepsizeSpec::UniformConstant { lo, hi } => StepsizeMode::sample_constant(n, lo, hi, &mut rng),
                    _ => unreachable!("validated"),
                };
                run_gossip(game, model, &mode, config.iters, &mut rng, Some(&mut obs)).map_err(wrap)?;
            }
        }
        Ok(obs.errors)
    };

    let per_path: Vec<Vec<f64>> = (0..config.sample_paths)
        .into_par_iter()
        .map(run_path)
        .collect::<Result<_, _>>()?;

    let checkpoint_stats: Vec<CheckpointStats> = checkpoints
        .iter()
        .enumerate()
        .map(|(c, &iters)| {
            let errs: Vec<f64> = per_path.iter().map(|p| p[c]).collect();
            let (ci_width, _) = confidence_width(&errs, config.confidence_level);
            CheckpointStats {
                iters,
                mean_error: mean(&errs),
                ci_width,
                per_path_errors: errs,
            }
        })
        .collect();
    let last = checkpoint_stats.last().expect("final checkpoint").clone();
    let (ci_width, ci_defined) = confidence_width(&last.per_path_errors, config.confidence_level);

    let (lambda, p_ratio) = match &model {
        Some(m) => (
            Some(gossip_expected_mixing(m.topology(), m.contacts())?.lambda),
            Some(m.p_ratio()),
        ),
        None => (None, None),
    };

    Ok(ExperimentReport {
        algorithm: config.algorithm,
        topology: if config.dynamic {
            "dynamic".to_string()
        } else {
            config.topology.name().to_string()
        },
        dynamic: config.dynamic,
        players: n,
        iters: config.iters,
        sample_paths: config.sample_paths,
        confidence_level: config.confidence_level,
        mean_error: last.mean_error,
        ci_width,
        ci_defined,
        per_path_errors: last.per_path_errors,
        checkpoints: checkpoint_stats,
        lambda,
        p_ratio,
        iterations_to_concurrence: None,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    /// Ceiling of the mean first-hit tick, censored paths counted at the
    /// budget.
    pub iterations: usize,
    pub censored: usize,
    pub per_path: Vec<Option<usize>>,
    pub budget: usize,
    pub p_ratio: f64,
    pub lambda: f64,
}

/// Ticks until every agent's scaled estimate `N v_i` agrees with the true
/// aggregate to within `threshold` (relative, sup norm).
pub fn concurrence_iterations(
    config: &ExperimentConfig,
    threshold: f64,
) -> Result<ConcurrenceReport, ExperimentError> {
    config.validate()?;
    if config.algorithm != Algorithm::Gossip {
        return Err(ExperimentError::Config("concurrence needs a gossip configuration".into()));
    }
    if !(threshold > 0.0) {
        return Err(ExperimentError::Config(format!("threshold must be positive, got {threshold}")));
    }
    let params = config.game.params()?;
    let game = build_game(&params)?;
    let n = game.n_players();
    let model = gossip_model(config, n)?;
    let per_path: Vec<Option<usize>> = (0..config.sample_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(config.master_seed, path);
            let mode = match config.stepsize {
                StepsizeSpec::UpdateCount { c } => StepsizeMode::UpdateCount { c },
                StepsizeSpec::UniformConstant { lo, hi } if lo == hi => StepsizeMode::Constant { alphas: vec![lo; n] },
                StepsizeSpec::UniformConstant { lo, hi } => StepsizeMode::sample_constant(n, lo, hi, &mut rng),
                _ => unreachable!("validated"),
            };
            let mut mon = ConcurrenceMonitor::new(threshold);
            run_gossip(&game, &model, &mode, config.iters, &mut rng, Some(&mut mon))
                .map(|_| mon.first)
                .map_err(|source| ExperimentError::Engine { path, source })
        })
        .collect::<Result<_, _>>()?;
    let censored = per_path.iter().filter(|p| p.is_none()).count();
    let total: usize = per_path.iter().map(|p| p.unwrap_or(config.iters)).sum();
    let iterations = total.div_ceil(per_path.len());
    let mixing = gossip_expected_mixing(model.topology(), model.contacts())?;
    Ok(ConcurrenceReport {
        iterations,
        censored,
        per_path,
        budget: config.iters,
        p_ratio: model.p_ratio(),
        lambda: mixing.lambda,
    })
}

/// Mixing quantities and the update-probability ratio for a topology.
pub fn mixing_summary(kind: crate::graph::TopologyKind, n: usize, seed: u64) -> Result<MixingRow, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = GossipModel::uniform(build_topology(kind, n, &mut rng)?)?;
    let mixing = gossip_expected_mixing(model.topology(), model.contacts())?;
    Ok(MixingRow {
        topology: kind.name().to_string(),
        p_ratio: model.p_ratio(),
        lambda: mixing.lambda,
        second_eigenvalue: mixing.second_eigenvalue_w,
        iterations: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TopologyKind;

    fn small(algorithm: Algorithm, stepsize: StepsizeSpec) -> ExperimentConfig {
        ExperimentConfig {
            game: GameSource::Seeded {
                seed: 4,
                players: 4,
                locations: 2,
                coupling: crate::game::Relation::Eq,
            },
            algorithm,
            topology: TopologyKind::Cycle,
            dynamic: false,
            stepsize,
            iters: 200,
            checkpoints: vec![100],
            sample_paths: 3,
            confidence_level: 0.9,
            master_seed: 11,
            oracle: OracleSettings::default(),
        }
    }

    #[test]
    fn single_path_interval_is_flagged() {
        assert_eq!(confidence_width(&[0.3], 0.9), (0.0, false));
        let (w, ok) = confidence_width(&[1.0, 3.0], 0.9);
        assert!(ok);
        let z = 1.6448536269514722;
        assert!((w - 2.0 * z * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn path_streams_are_independent_of_path_count() {
        use rand::Rng;
        let a: u64 = path_rng(5, 2).random();
        let b: u64 = path_rng(5, 2).random();
        let c: u64 = path_rng(5, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = small(Algorithm::Sync, StepsizeSpec::Harmonic { c: 1.0, offset: 1 });
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.per_path_errors, b.per_path_errors);
        assert_eq!(a.checkpoints.len(), 2);
        assert_eq!(a.checkpoints[0].iters, 100);
        let g = small(Algorithm::Gossip, StepsizeSpec::UniformConstant { lo: 5e-3, hi: 1e-2 });
        let r = run_experiment(&g).unwrap();
        assert!(r.lambda.is_some());
        assert_eq!(r.per_path_errors.len(), 3);
    }

    #[test]
    fn concurrence_is_monotone_in_threshold() {
        let cfg = small(Algorithm::Gossip, StepsizeSpec::UpdateCount { c: 1.0 });
        let loose = concurrence_iterations(&cfg, 1e-1).unwrap();
        let tight = concurrence_iterations(&cfg, 1e-3).unwrap();
        assert!(loose.iterations <= tight.iterations);
        assert_eq!(concurrence_iterations(&cfg, f64::INFINITY).unwrap().iterations, 1);
        assert!(concurrence_iterations(&small(Algorithm::Sync, StepsizeSpec::Harmonic { c: 1.0, offset: 1 }), 1e-3).is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = small(Algorithm::Gossip, StepsizeSpec::UpdateCount { c: 9.0 });
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        let bad = text.replace("sample_paths = 3", "sample_paths = 0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }
}
