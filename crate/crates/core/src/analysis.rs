//! Calculators for the disagreement and constant-step error bounds, and
//! helpers that measure the constants they need.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{norm, probe_lipschitz, probe_monotonicity, AggregateMap, GameError, GameInstance};
use crate::gossip::GossipModel;
use crate::graph::{geometric_constants, gossip_expected_mixing, GraphError};
use crate::projection::ProjectionWorkspace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{name} must be {requirement}, got {value}")]
    Constant {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("contraction condition violated: q = {q} is not in (0, 1)")]
    ContractionFactor { q: f64 },
    #[error("contraction condition violated: mu p_min alpha_min - p_max maxL (alpha_max - alpha_min) = {margin} <= 0")]
    Margin { margin: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn positive(name: &'static str, value: f64) -> Result<(), AnalysisError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::Constant {
            name,
            requirement: "positive and finite",
            value,
        })
    }
}

fn nonnegative(name: &'static str, value: f64) -> Result<(), AnalysisError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::Constant {
            name,
            requirement: "nonnegative and finite",
            value,
        })
    }
}

/// `theta beta^k M + theta N C sum_{s=1}^{k} beta^{k-s} alpha_{s-1}`.
///
/// `alphas` must hold at least `k` entries (indexed from 0).
pub fn lemma4_bound(k: usize, q: usize, delta: f64, n: usize, m: f64, c: f64, alphas: &[f64]) -> f64 {
    let (theta, beta) = geometric_constants(n, q, delta);
    let mut sum = 0.0;
    for s in 1..=k {
        sum += beta.powi((k - s) as i32) * alphas[s - 1];
    }
    theta * beta.powi(k as i32) * m + theta * n as f64 * c * sum
}

/// Evaluates [`lemma4_bound`] for every `k` in `0..=alphas.len()` in linear
/// time.
pub fn lemma4_bounds(q: usize, delta: f64, n: usize, m: f64, c: f64, alphas: &[f64]) -> Vec<f64> {
    let (theta, beta) = geometric_constants(n, q, delta);
    let mut out = Vec::with_capacity(alphas.len() + 1);
    let mut sum = 0.0;
    let mut decay = 1.0;
    out.push(theta * m);
    for &a in alphas {
        sum = beta * sum + a;
        decay *= beta;
        out.push(theta * decay * m + theta * n as f64 * c * sum);
    }
    out
}

/// Inputs to the constant-step error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop4Constants {
    pub mu: f64,
    pub c: f64,
    pub b: f64,
    /// Aggregate dimension.
    pub n: usize,
    /// Number of agents.
    pub agents: usize,
    pub lambda: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop4Bound {
    pub q: f64,
    pub bound: f64,
    /// Simplified form when `alpha_min == alpha_max`.
    pub equal_steps: Option<f64>,
    /// Simplified form when `p_min == p_max`.
    pub equal_probabilities: Option<f64>,
    /// Both simplifications: `(alpha / mu)(2C^2 N + BC sqrt(2nN) / (1 - sqrt(lambda)))`.
    pub fully_equal: Option<f64>,
}

pub fn prop4_bound(k: &Prop4Constants) -> Result<Prop4Bound, AnalysisError> {
    positive("mu", k.mu)?;
    nonnegative("C", k.c)?;
    nonnegative("B", k.b)?;
    positive("p_min", k.p_min)?;
    positive("p_max", k.p_max)?;
    positive("alpha_min", k.alpha_min)?;
    positive("alpha_max", k.alpha_max)?;
    nonnegative("max L", k.max_l)?;
    if k.n == 0 || k.agents == 0 {
        return Err(AnalysisError::Constant {
            name: "dimension",
            requirement: "at least one",
            value: 0.0,
        });
    }
    if !(0.0..1.0).contains(&k.lambda) {
        return Err(AnalysisError::Constant {
            name: "lambda",
            requirement: "in [0, 1)",
            value: k.lambda,
        });
    }
    if k.alpha_min > k.alpha_max || k.p_min > k.p_max {
        return Err(AnalysisError::Constant {
            name: "min/max ordering",
            requirement: "min <= max",
            value: k.alpha_min - k.alpha_max,
        });
    }
    let spread = k.alpha_max - k.alpha_min;
    let q = 1.0 - 2.0 * k.mu * k.p_min * k.alpha_min + 2.0 * k.p_max * k.max_l * spread;
    if !(q > 0.0 && q < 1.0) {
        return Err(AnalysisError::ContractionFactor { q });
    }
    let margin = k.mu * k.p_min * k.alpha_min - k.p_max * k.max_l * spread;
    if margin <= 0.0 {
        return Err(AnalysisError::Margin { margin });
    }
    let nn = k.agents as f64;
    let core = 2.0 * k.c * k.c * nn + k.b * k.c * (2.0 * k.n as f64 * nn).sqrt() / (1.0 - k.lambda.sqrt());
    let bound = k.p_max * k.alpha_max * k.alpha_max * core / margin;
    let equal_steps = (spread == 0.0).then(|| k.p_max * k.alpha_max * core / (k.mu * k.p_min));
    let equal_probabilities = (k.p_min == k.p_max)
        .then(|| k.alpha_max * k.alpha_max * core / (k.mu * k.alpha_min - k.max_l * spread));
    let fully_equal = (spread == 0.0 && k.p_min == k.p_max).then(|| k.alpha_max / k.mu * core);
    Ok(Prop4Bound {
        q,
        bound,
        equal_steps,
        equal_probabilities,
        fully_equal,
    })
}

/// `sum_j sup_{x_j in K_j} |h_j(x_j)|`, exact for identity and selection
/// maps on boxes, sampled otherwise.
pub fn aggregate_norm_bound<R: Rng + ?Sized>(
    game: &GameInstance,
    samples: usize,
    rng: &mut R,
) -> Result<f64, GameError> {
    let mut ws = ProjectionWorkspace::default();
    let mut total = 0.0;
    for (i, p) in game.players().iter().enumerate() {
        let set = p.set();
        if !set.is_bounded() {
            return Err(GameError::Unbounded { player: i });
        }
        let corner = |c: usize| set.lower()[c].abs().max(set.upper()[c].abs());
        total += match p.aggregate_map() {
            AggregateMap::Identity => set.max_norm(),
            AggregateMap::Select(idx) => idx.iter().map(|&c| corner(c).powi(2)).sum::<f64>().sqrt(),
            AggregateMap::Custom(_) => {
                let mut best: f64 = 0.0;
                let mut h = vec![0.0; game.aggregate_dim()];
                for _ in 0..samples {
                    if let Some(x) = set
                        .sample(rng, &mut ws)
                        .map_err(|source| GameError::Projection { player: i, source })?
                    {
                        p.aggregate_map().apply(&x, &mut h);
                        best = best.max(norm(&h));
                    }
                }
                best
            }
        };
    }
    Ok(total)
}

/// Largest `|F_i(x_i, sum_j h_j(x_j))|` over sampled feasible profiles.
pub fn gradient_norm_bound<R: Rng + ?Sized>(
    game: &GameInstance,
    samples: usize,
    rng: &mut R,
) -> Result<f64, GameError> {
    let mut ws = ProjectionWorkspace::default();
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = game.sample_profile(rng, &mut ws)?;
        for g in game.evaluate_phi(&x)? {
            best = best.max(norm(&g));
        }
    }
    Ok(best)
}

/// Measures every constant of the constant-step bound for `game` run by
/// gossip on `model` with per-agent stepsizes `alphas`.
pub fn measure_prop4_constants<R: Rng + ?Sized>(
    game: &GameInstance,
    model: &GossipModel,
    alphas: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Prop4Constants, AnalysisError> {
    let mono = probe_monotonicity(game, samples, rng)?;
    let mut max_l: f64 = 0.0;
    let mut max_lbar: f64 = 0.0;
    for i in 0..game.n_players() {
        let r = probe_lipschitz(game, i, samples, rng)?;
        max_l = max_l.max(r.estimated_l);
        max_lbar = max_lbar.max(r.estimated_lbar);
    }
    let m = aggregate_norm_bound(game, samples, rng)?;
    let c = gradient_norm_bound(game, samples, rng)?;
    let mixing = gossip_expected_mixing(model.topology(), model.contacts())?;
    let agents = game.n_players();
    Ok(Prop4Constants {
        mu: mono.estimated_mu,
        c,
        b: max_lbar * agents as f64 * m,
        n: game.aggregate_dim(),
        agents,
        lambda: mixing.lambda,
        p_min: model.p_min(),
        p_max: model.p_max(),
        alpha_min: alphas.iter().copied().fold(f64::INFINITY, f64::min),
        alpha_max: alphas.iter().copied().fold(0.0, f64::max),
        max_l,
    })
}
