//! Networked Nash-Cournot benchmark.
//!
//! Player `i` produces `g_il` and sells `s_il` at each location `l`, pays
//! `c_il(g) = a_il g + b_il g^2`, and receives the price
//! `p_l(S) = d_l - S - c_l S^2` on the location's total sales `S`
//! (`c_l = 0` gives the affine benchmark). Decisions are interleaved per
//! location as `x_i = (g_i1, s_i1, ..., g_iL, s_iL)`, and the aggregate is
//! the sales vector across locations.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    AggregateMap, FeasibleSet, GameError, GameInstance, LinearCoupling, PlayerSpec, Relation,
};
use crate::projection::ProjectionError;

pub const DEFAULT_CAPACITY: f64 = 500.0;
pub const COST_LINEAR_RANGE: (f64, f64) = (2.0, 12.0);
pub const COST_QUADRATIC_RANGE: (f64, f64) = (2.0, 3.0);
pub const PRICE_INTERCEPT_RANGE: (f64, f64) = (90.0, 100.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CournotError {
    #[error("need at least one player and one location (got {players} x {locations})")]
    Empty { players: usize, locations: usize },
    #[error("{field} has the wrong shape")]
    Shape { field: &'static str },
    #[error("{field}[{index}] = {value} violates {requirement}")]
    Parameter {
        field: &'static str,
        index: String,
        value: f64,
        requirement: &'static str,
    },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotParams {
    pub players: usize,
    pub locations: usize,
    /// Linear cost coefficients, `players x locations`.
    pub a: Vec<Vec<f64>>,
    /// Quadratic cost coefficients, `players x locations`; strictly positive.
    pub b: Vec<Vec<f64>>,
    /// Price intercepts per location.
    pub d: Vec<f64>,
    /// Production (and sales) caps, `players x locations`.
    pub cap: Vec<Vec<f64>>,
    /// Relation between total production and total sales.
    #[serde(default = "default_relation")]
    pub coupling: Relation,
    /// Optional price curvature per location; empty means affine prices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub price_curvature: Vec<f64>,
}

fn default_relation() -> Relation {
    Relation::Eq
}

impl CournotParams {
    pub fn validate(&self) -> Result<(), CournotError> {
        let (n, l) = (self.players, self.locations);
        if n == 0 || l == 0 {
            return Err(CournotError::Empty {
                players: n,
                locations: l,
            });
        }
        let matrix_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == l);
        for (field, m) in [("a", &self.a), ("b", &self.b), ("cap", &self.cap)] {
            if !matrix_ok(m) {
                return Err(CournotError::Shape { field });
            }
        }
        if self.d.len() != l {
            return Err(CournotError::Shape { field: "d" });
        }
        if !self.price_curvature.is_empty() && self.price_curvature.len() != l {
            return Err(CournotError::Shape {
                field: "price_curvature",
            });
        }
        let positive = |field: &'static str, m: &Vec<Vec<f64>>| {
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(CournotError::Parameter {
                            field,
                            index: format!("{i},{j}"),
                            value: v,
                            requirement: "finite and > 0",
                        });
                    }
                }
            }
            Ok(())
        };
        positive("b", &self.b)?;
        positive("cap", &self.cap)?;
        for (j, &v) in self.d.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CournotError::Parameter {
                    field: "d",
                    index: j.to_string(),
                    value: v,
                    requirement: "finite and > 0",
                });
            }
        }
        for (j, &v) in self.price_curvature.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CournotError::Parameter {
                    field: "price_curvature",
                    index: j.to_string(),
                    value: v,
                    requirement: "finite and >= 0",
                });
            }
        }
        Ok(())
    }

    pub fn curvature(&self, l: usize) -> f64 {
        self.price_curvature.get(l).copied().unwrap_or(0.0)
    }

    pub fn price(&self, l: usize, total_sales: f64) -> f64 {
        self.d[l] - total_sales - self.curvature(l) * total_sales * total_sales
    }

    pub fn price_slope(&self, l: usize, total_sales: f64) -> f64 {
        -1.0 - 2.0 * self.curvature(l) * total_sales
    }

    /// Largest `|p_l'|` over attainable total sales `[0, sum_i cap_il]`.
    pub fn max_price_slope(&self, l: usize) -> f64 {
        let total_cap: f64 = self.cap.iter().map(|row| row[l]).sum();
        1.0 + 2.0 * self.curvature(l) * total_cap
    }

    pub fn decision_dim(&self) -> usize {
        2 * self.locations
    }

    pub fn production_index(l: usize) -> usize {
        2 * l
    }

    pub fn sales_index(l: usize) -> usize {
        2 * l + 1
    }
}

/// Draws a benchmark instance: `a ~ U(2,12)`, `b ~ U(2,3)`, `d ~ U(90,100)`,
/// `cap = 500`, production equal to sales.
pub fn sample_params<R: Rng + ?Sized>(
    players: usize,
    locations: usize,
    rng: &mut R,
) -> Result<CournotParams, CournotError> {
    if players == 0 || locations == 0 {
        return Err(CournotError::Empty { players, locations });
    }
    let mut draw = |(lo, hi): (f64, f64), rows: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..locations).map(|_| rng.random_range(lo..=hi)).collect())
            .collect()
    };
    let a = draw(COST_LINEAR_RANGE, players);
    let b = draw(COST_QUADRATIC_RANGE, players);
    let d = draw(PRICE_INTERCEPT_RANGE, 1).remove(0);
    Ok(CournotParams {
        players,
        locations,
        a,
        b,
        d,
        cap: vec![vec![DEFAULT_CAPACITY; locations]; players],
        coupling: Relation::Eq,
        price_curvature: Vec::new(),
    })
}

/// Builds the game: `F_il = (a_il + 2 b_il g_il, -p_l(u_l) - p_l'(u_l) s_il)`
/// on `[0, cap]^2` per location with one production/sales coupling.
pub fn build_game(params: &CournotParams) -> Result<GameInstance, CournotError> {
    params.validate()?;
    let l_count = params.locations;
    let d = Arc::new(params.d.clone());
    let curv: Arc<Vec<f64>> = Arc::new((0..l_count).map(|l| params.curvature(l)).collect());
    let affine = curv.iter().all(|&c| c == 0.0);
    let sales: Vec<usize> = (0..l_count).map(CournotParams::sales_index).collect();
    let coeffs: Vec<f64> = (0..l_count).flat_map(|_| [1.0, -1.0]).collect();

    let mut players = Vec::with_capacity(params.players);
    for i in 0..params.players {
        let upper: Vec<f64> = params.cap[i].iter().flat_map(|&c| [c, c]).collect();
        let set = FeasibleSet::with_coupling(
            vec![0.0; 2 * l_count],
            upper,
            LinearCoupling::new(coeffs.clone(), params.coupling, 0.0),
        )?;
        let a = params.a[i].clone();
        let b = params.b[i].clone();
        let (d, curv) = (Arc::clone(&d), Arc::clone(&curv));
        let grad = move |x: &[f64], u: &[f64], out: &mut [f64]| {
            for l in 0..a.len() {
                let (g, s) = (x[2 * l], x[2 * l + 1]);
                out[2 * l] = a[l] + 2.0 * b[l] * g;
                out[2 * l + 1] = if affine {
                    u[l] - d[l] + s
                } else {
                    let c = curv[l];
                    let price = d[l] - u[l] - c * u[l] * u[l];
                    let slope = -1.0 - 2.0 * c * u[l];
                    -price - slope * s
                };
            }
        };
        players.push(PlayerSpec::new(set, grad, AggregateMap::Select(sales.clone())));
    }
    Ok(GameInstance::new(players, l_count)?)
}

/// Closed-form Lipschitz constant of `F_i` in the aggregate:
/// `sqrt(2) * sqrt(sum_l C_l^2 + M_l^2 cap_il^2)` with `C_l = max |p_l'|`
/// and `M_l` the Lipschitz constant of `p_l'`.
pub fn aggregate_lipschitz_bound(params: &CournotParams, player: usize) -> f64 {
    let sum: f64 = (0..params.locations)
        .map(|l| {
            let c = params.max_price_slope(l);
            let m = 2.0 * params.curvature(l);
            c * c + m * m * params.cap[player][l].powi(2)
        })
        .sum();
    2f64.sqrt() * sum.sqrt()
}

/// Closed-form Lipschitz constant of `F_i` in the player's own decision:
/// `sqrt(sum_l (2 b_il)^2 + pbar_l^2)`.
pub fn decision_lipschitz_bound(params: &CournotParams, player: usize) -> f64 {
    (0..params.locations)
        .map(|l| (2.0 * params.b[player][l]).powi(2) + params.max_price_slope(l).powi(2))
        .sum::<f64>()
        .sqrt()
}
