//! Distributed Nash equilibrium seeking for aggregative games.
//!
//! Players choose decisions from compact convex sets and pay costs that
//! depend on their own decision and on an aggregate `sum_j h_j(x_j)` of
//! everyone's decisions. Nobody observes the aggregate; each agent keeps an
//! estimate of its network average and refines it by talking to neighbours.
//!
//! Two engines are provided:
//!
//! * [`sync`]: all agents mix estimates with a doubly stochastic weight
//!   matrix every iteration, over a possibly time-varying graph.
//! * [`gossip`]: one random pair of neighbours averages and updates per
//!   tick, with stepsizes driven by each agent's own update count or fixed
//!   per agent.
//!
//! [`cournot`] builds the networked Nash-Cournot benchmark, [`oracle`]
//! computes reference equilibria, [`analysis`] evaluates the theoretical
//! bounds, and [`experiments`] runs seeded Monte Carlo studies.

pub mod analysis;
pub mod cournot;
pub mod experiments;
pub mod game;
pub mod gossip;
pub mod graph;
pub mod oracle;
pub mod projection;
pub mod state;
pub mod sync;

pub use game::{AggregateMap, FeasibleSet, GameError, GameInstance, LinearCoupling, PlayerSpec, Relation};
pub use graph::{Topology, TopologyKind, WeightMatrix, WeightRule};
pub use projection::{ProjectionError, ProjectionWorkspace};
pub use state::{EngineError, NetworkState, StepsizeRule};
