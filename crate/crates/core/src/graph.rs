//! Connectivity graphs, doubly stochastic weights, transition products and
//! gossip mixing quantities.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for row/column sums of weight matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("topology needs at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },
    #[error("grid topology needs a node count divisible by {GRID_ROW}, got {0}")]
    GridSize(usize),
    #[error("edge {{{0}, {1}}} is invalid for {2} nodes")]
    InvalidEdge(usize, usize, usize),
    #[error("weight matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("weight matrix violates the weight floor: {0}")]
    WeightFloor(String),
    #[error("graph sequence is not {q}-connected")]
    NotQConnected { q: usize },
    #[error("contact probabilities invalid: {0}")]
    ContactProbabilities(String),
    #[error("matrix shape {rows}x{cols} does not match {n} nodes")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("Q must be at least 1")]
    InvalidQ,
}

/// Players per grid row.
pub const GRID_ROW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Cycle,
    /// One hub connected to every other node.
    Wheel,
    /// Rows of five nodes, 4-neighbour lattice.
    Grid,
    Complete,
    /// Random recursive spanning tree: node `j` attaches to a uniform earlier node.
    RandomConnected,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cycle => "Cycle",
            Self::Wheel => "Wheel",
            Self::Grid => "Grid",
            Self::Complete => "Complete",
            Self::RandomConnected => "Random",
        }
    }
}

/// Undirected simple graph on nodes `0..n`. Self-communication is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EdgeList", into = "EdgeList")]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeList {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<EdgeList> for Topology {
    type Error = GraphError;
    fn try_from(e: EdgeList) -> Result<Self, Self::Error> {
        Topology::from_edges(e.nodes, e.edges.iter().map(|[i, j]| (*i, *j)))
    }
}

impl From<Topology> for EdgeList {
    fn from(t: Topology) -> Self {
        EdgeList {
            nodes: t.n,
            edges: t.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Topology {
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(GraphError::TooFewNodes { n, min: 1 });
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(GraphError::InvalidEdge(i, j, n));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self {
            n,
            edges: set,
            neighbors,
        })
    }

    pub fn empty(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, std::iter::empty())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Union of edge sets over graphs on the same node set.
    pub fn union<'a, I>(graphs: I) -> Option<Topology>
    where
        I: IntoIterator<Item = &'a Topology>,
    {
        let mut it = graphs.into_iter();
        let first = it.next()?;
        let mut edges = first.edges.clone();
        for g in it {
            edges.extend(g.edges.iter().copied());
        }
        Topology::from_edges(first.n, edges).ok()
    }

    /// Sparsity pattern of a weight matrix (off-diagonal nonzeros).
    pub fn from_pattern(w: &DMatrix<f64>) -> Result<Topology, GraphError> {
        let n = w.nrows();
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| w[(i, j)] != 0.0 || w[(j, i)] != 0.0);
        Topology::from_edges(n, edges)
    }
}

/// Builds one of the standard topologies. `rng` is only consumed by
/// [`TopologyKind::RandomConnected`].
pub fn build_topology<R: Rng + ?Sized>(
    kind: TopologyKind,
    n: usize,
    rng: &mut R,
) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes { n, min: 2 });
    }
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Cycle => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        TopologyKind::Wheel => (1..n).map(|j| (0, j)).collect(),
        TopologyKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Grid => {
            if !n.is_multiple_of(GRID_ROW) {
                return Err(GraphError::GridSize(n));
            }
            let rows = n / GRID_ROW;
            let mut e = Vec::new();
            for r in 0..rows {
                for c in 0..GRID_ROW {
                    let u = r * GRID_ROW + c;
                    if c + 1 < GRID_ROW {
                        e.push((u, u + 1));
                    }
                    if r + 1 < rows {
                        e.push((u, u + GRID_ROW));
                    }
                }
            }
            e
        }
        TopologyKind::RandomConnected => (1..n).map(|j| (rng.random_range(0..j), j)).collect(),
    };
    Topology::from_edges(n, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w_ij = delta` on edges, `w_ii = 1 - delta d(i)`, `delta = 0.5 / max_i d(i)`.
    MetropolisHalf,
}

/// Dense doubly stochastic mixing matrix with positive weight floor `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    delta: f64,
}

impl WeightMatrix {
    /// Wraps a matrix after checking it is square, doubly stochastic, and
    /// that every positive entry (and the diagonal) is at least `delta`.
    pub fn new(w: DMatrix<f64>, delta: f64) -> Result<Self, GraphError> {
        let m = Self { w, delta };
        m.check_doubly_stochastic()?;
        m.check_floor()?;
        Ok(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn check_doubly_stochastic(&self) -> Result<(), GraphError> {
        check_doubly_stochastic(&self.w, STOCHASTIC_TOL)
    }

    fn check_floor(&self) -> Result<(), GraphError> {
        for i in 0..self.n() {
            for j in 0..self.n() {
                let v = self.w[(i, j)];
                if (i == j || v != 0.0) && v < self.delta {
                    return Err(GraphError::WeightFloor(format!(
                        "w[{i},{j}] = {v} < delta = {}",
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the connectivity-compatible weight conditions against
    /// `topology`: doubly stochastic, `w_ij >= delta` exactly on edges and
    /// the diagonal, zero elsewhere.
    pub fn verify(&self, topology: &Topology) -> Result<(), GraphError> {
        let n = topology.n();
        if self.w.nrows() != n || self.w.ncols() != n {
            return Err(GraphError::Shape {
                rows: self.w.nrows(),
                cols: self.w.ncols(),
                n,
            });
        }
        self.check_doubly_stochastic()?;
        for i in 0..n {
            for j in 0..n {
                let v = self.w[(i, j)];
                let linked = i == j || topology.has_edge(i, j);
                if linked && v < self.delta {
                    return Err(GraphError::WeightFloor(format!(
                        "w[{i},{j}] = {v} < delta = {}",
                        self.delta
                    )));
                }
                if !linked && v != 0.0 {
                    return Err(GraphError::WeightFloor(format!(
                        "w[{i},{j}] = {v} without an edge"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn check_doubly_stochastic(w: &DMatrix<f64>, tol: f64) -> Result<(), GraphError> {
    if w.nrows() != w.ncols() {
        return Err(GraphError::Shape {
            rows: w.nrows(),
            cols: w.ncols(),
            n: w.nrows(),
        });
    }
    if let Some(v) = w.iter().find(|v| !(**v >= 0.0)) {
        return Err(GraphError::NotDoublyStochastic(format!("negative entry {v}")));
    }
    for i in 0..w.nrows() {
        let r: f64 = w.row(i).sum();
        let c: f64 = w.column(i).sum();
        if (r - 1.0).abs() > tol {
            return Err(GraphError::NotDoublyStochastic(format!("row {i} sums to {r}")));
        }
        if (c - 1.0).abs() > tol {
            return Err(GraphError::NotDoublyStochastic(format!("column {i} sums to {c}")));
        }
    }
    Ok(())
}

pub fn build_weights(topology: &Topology, rule: WeightRule) -> WeightMatrix {
    match rule {
        WeightRule::MetropolisHalf => {
            let n = topology.n();
            let delta = 0.5 / topology.max_degree().max(1) as f64;
            let mut w = DMatrix::zeros(n, n);
            for (i, j) in topology.edges() {
                w[(i, j)] = delta;
                w[(j, i)] = delta;
            }
            for i in 0..n {
                w[(i, i)] = 1.0 - delta * topology.degree(i) as f64;
            }
            WeightMatrix { w, delta }
        }
    }
}

/// The pairwise-averaging matrix `I - (e_i - e_j)(e_i - e_j)^T / 2`.
pub fn pairwise_gossip_matrix(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut w = DMatrix::identity(n, n);
    w[(i, i)] = 0.5;
    w[(j, j)] = 0.5;
    w[(i, j)] = 0.5;
    w[(j, i)] = 0.5;
    w
}

/// True iff the union of every `q` consecutive graphs is connected. A
/// sequence shorter than `q` is judged on its single (partial) window.
pub fn check_q_connectivity(seq: &[Topology], q: usize) -> bool {
    if q == 0 || seq.is_empty() {
        return false;
    }
    let window = q.min(seq.len());
    seq.windows(window)
        .all(|w| Topology::union(w).is_some_and(|u| u.is_connected()))
}

/// `theta = (1 - delta / (4 N^2))^-2`, `beta = (1 - delta / (4 N^2))^(1/Q)`.
pub fn geometric_constants(n: usize, q: usize, delta: f64) -> (f64, f64) {
    let base = 1.0 - delta / (4.0 * (n * n) as f64);
    (base.powi(-2), base.powf(1.0 / q as f64))
}

/// `Phi(k, s) = W(k) W(k-1) ... W(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProduct {
    pub phi: DMatrix<f64>,
    pub k: usize,
    pub s: usize,
}

pub fn transition_product(weights: &[WeightMatrix], k: usize, s: usize) -> TransitionProduct {
    assert!(s <= k && k < weights.len(), "need s <= k < len");
    let mut phi = weights[s].matrix().clone();
    for t in s + 1..=k {
        phi = weights[t].matrix() * phi;
    }
    TransitionProduct { phi, k, s }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionReport {
    /// `max (|Phi(k,s)_ij - 1/N| - theta beta^(k-s))`; `<= 0` means the bound holds.
    pub max_violation: f64,
    pub theta: f64,
    pub beta: f64,
    pub products: usize,
}

/// Computes every `Phi(k, s)` of the sequence and compares its distance
/// from `11^T / N` with the geometric envelope `theta beta^(k-s)`.
pub fn transition_bound_check(
    weights: &[WeightMatrix],
    q: usize,
    delta: f64,
) -> Result<TransitionReport, GraphError> {
    if q == 0 {
        return Err(GraphError::InvalidQ);
    }
    let Some(first) = weights.first() else {
        return Err(GraphError::TooFewNodes { n: 0, min: 1 });
    };
    let n = first.n();
    let mut topologies = Vec::with_capacity(weights.len());
    for w in weights {
        if w.n() != n {
            return Err(GraphError::Shape {
                rows: w.n(),
                cols: w.n(),
                n,
            });
        }
        w.check_doubly_stochastic()?;
        WeightMatrix::new(w.matrix().clone(), delta)?;
        topologies.push(Topology::from_pattern(w.matrix())?);
    }
    if !check_q_connectivity(&topologies, q) {
        return Err(GraphError::NotQConnected { q });
    }

    let (theta, beta) = geometric_constants(n, q, delta);
    let inv_n = 1.0 / n as f64;
    let mut max_violation = f64::NEG_INFINITY;
    let mut products = 0;
    for s in 0..weights.len() {
        let mut phi = weights[s].matrix().clone();
        for k in s..weights.len() {
            if k > s {
                phi = weights[k].matrix() * &phi;
            }
            let envelope = theta * beta.powi((k - s) as i32);
            let dev = phi.iter().fold(0.0f64, |m, v| m.max((v - inv_n).abs()));
            max_violation = max_violation.max(dev - envelope);
            products += 1;
        }
    }
    Ok(TransitionReport {
        max_violation,
        theta,
        beta,
        products,
    })
}

/// Probabilities `p_ij` that node `i`, once awake, contacts neighbour `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactProbabilities {
    p: DMatrix<f64>,
}

impl ContactProbabilities {
    /// `p_ij = 1 / |N_i|` for every neighbour.
    pub fn uniform(topology: &Topology) -> Result<Self, GraphError> {
        let n = topology.n();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            let d = topology.degree(i);
            if d == 0 {
                return Err(GraphError::ContactProbabilities(format!(
                    "node {i} has no neighbours"
                )));
            }
            for &j in topology.neighbors(i) {
                p[(i, j)] = 1.0 / d as f64;
            }
        }
        Ok(Self { p })
    }

    /// Validates support on neighbours and unit row sums.
    pub fn new(topology: &Topology, p: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = topology.n();
        if p.nrows() != n || p.ncols() != n {
            return Err(GraphError::Shape {
                rows: p.nrows(),
                cols: p.ncols(),
                n,
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = p[(i, j)];
                if !(v >= 0.0) {
                    return Err(GraphError::ContactProbabilities(format!("p[{i},{j}] = {v}")));
                }
                if v > 0.0 && !topology.has_edge(i, j) {
                    return Err(GraphError::ContactProbabilities(format!(
                        "p[{i},{j}] > 0 without an edge"
                    )));
                }
            }
            let sum: f64 = p.row(i).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(GraphError::ContactProbabilities(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(Self { p })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }
}

#[derive(Debug, Clone)]
pub struct MixingReport {
    pub expected_w: DMatrix<f64>,
    pub expected_dtd: DMatrix<f64>,
    /// Largest eigenvalue of `E[D^T D]`, `D = W - 11^T / N`.
    pub lambda: f64,
    /// Second largest eigenvalue of `E[W]`.
    pub second_eigenvalue_w: f64,
}

/// Enumerates every contact event `(I, J)` with probability `p_IJ / N` and
/// forms the expected pairwise matrix and the expected `D^T D`.
pub fn gossip_expected_mixing(
    topology: &Topology,
    contacts: &ContactProbabilities,
) -> Result<MixingReport, GraphError> {
    let n = topology.n();
    let contacts = ContactProbabilities::new(topology, contacts.matrix().clone())?;
    let avg = DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut ew = DMatrix::zeros(n, n);
    let mut edtd = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in topology.neighbors(i) {
            let prob = contacts.get(i, j) / n as f64;
            if prob == 0.0 {
                continue;
            }
            let w = pairwise_gossip_matrix(n, i, j);
            let d = &w - &avg;
            edtd += (d.transpose() * &d) * prob;
            ew += w * prob;
        }
    }
    let lambda = eigenvalues_desc(&edtd)[0];
    let second = eigenvalues_desc(&ew).get(1).copied().unwrap_or(0.0);
    Ok(MixingReport {
        expected_w: ew,
        expected_dtd: edtd,
        lambda,
        second_eigenvalue_w: second,
    })
}

fn eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn cycle_edges() {
        let t = build_topology(TopologyKind::Cycle, 5, &mut rng()).unwrap();
        let e: Vec<_> = t.edges().collect();
        assert_eq!(e, vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn wheel_is_hub_and_spokes() {
        let t = build_topology(TopologyKind::Wheel, 6, &mut rng()).unwrap();
        assert_eq!(t.edge_count(), 5);
        assert_eq!(t.neighbors(0), &[1, 2, 3, 4, 5]);
        for j in 1..6 {
            assert_eq!(t.neighbors(j), &[0]);
        }
    }

    #[test]
    fn grid_degrees() {
        let t = build_topology(TopologyKind::Grid, 20, &mut rng()).unwrap();
        let degs: Vec<_> = (0..20).map(|i| t.degree(i)).collect();
        assert_eq!(degs.iter().filter(|&&d| d == 2).count(), 4);
        assert_eq!(degs.iter().filter(|&&d| d == 4).count(), 6);
        assert_eq!(degs.iter().filter(|&&d| d == 3).count(), 10);
        assert!(matches!(
            build_topology(TopologyKind::Grid, 12, &mut rng()),
            Err(GraphError::GridSize(12))
        ));
    }

    #[test]
    fn random_tree_is_spanning() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let t = build_topology(TopologyKind::RandomConnected, 20, &mut r).unwrap();
            assert_eq!(t.edge_count(), 19);
            assert!(t.is_connected());
        }
    }

    #[test]
    fn metropolis_half_on_path() {
        let t = Topology::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[0.75, 0.25, 0.0, 0.25, 0.5, 0.25, 0.0, 0.25, 0.75],
        );
        assert_eq!(w.matrix(), &expected);
        assert_eq!(w.delta(), 0.25);
        w.verify(&t).unwrap();
    }

    #[test]
    fn metropolis_half_two_nodes() {
        let t = build_topology(TopologyKind::Complete, 2, &mut rng()).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        assert_eq!(w.matrix(), &DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn weight_verification_catches_missing_edge() {
        let t = Topology::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let other = Topology::from_edges(3, [(0, 1)]).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        assert!(w.verify(&other).is_err());
    }

    #[test]
    fn q_connectivity_pairs() {
        let g1 = Topology::from_edges(3, [(0, 1)]).unwrap();
        let g2 = Topology::from_edges(3, [(1, 2)]).unwrap();
        let seq = vec![g1, g2];
        assert!(check_q_connectivity(&seq, 2));
        assert!(!check_q_connectivity(&seq, 1));

        let k = build_topology(TopologyKind::Complete, 4, &mut rng()).unwrap();
        assert!(check_q_connectivity(&vec![k; 3], 1));

        let iso = Topology::from_edges(3, [(0, 1)]).unwrap();
        let seq = vec![iso; 4];
        assert!((1..6).all(|q| !check_q_connectivity(&seq, q)));
    }

    #[test]
    fn envelope_constants_two_nodes() {
        let (theta, beta) = geometric_constants(2, 1, 0.5);
        assert!((beta - 0.96875).abs() < 1e-15);
        assert!((theta - 1.0 / (0.96875f64 * 0.96875)).abs() < 1e-15);
        assert!((theta - 1.0656).abs() < 5e-5);
    }

    #[test]
    fn single_complete_step_within_envelope() {
        let t = build_topology(TopologyKind::Complete, 4, &mut rng()).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        let r = transition_bound_check(std::slice::from_ref(&w), 1, w.delta()).unwrap();
        assert!(r.max_violation <= 0.0);
        assert_eq!(r.products, 1);
    }

    #[test]
    fn transition_check_rejects_disconnected_sequences() {
        let t = Topology::from_edges(3, [(0, 1)]).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        assert_eq!(
            transition_bound_check(&[w.clone(), w], 2, 0.5).unwrap_err(),
            GraphError::NotQConnected { q: 2 }
        );
    }

    #[test]
    fn pairwise_matrix_properties() {
        let w = pairwise_gossip_matrix(5, 1, 3);
        assert_eq!(&w, &w.transpose());
        check_doubly_stochastic(&w, 1e-12).unwrap();
        assert!((&w * &w - &w).abs().max() <= 1e-12);
    }

    #[test]
    fn two_node_gossip_fully_averages() {
        let t = build_topology(TopologyKind::Complete, 2, &mut rng()).unwrap();
        let c = ContactProbabilities::uniform(&t).unwrap();
        let m = gossip_expected_mixing(&t, &c).unwrap();
        assert!(m.lambda.abs() < 1e-15);
    }

    #[test]
    fn nonstochastic_contacts_rejected() {
        let t = Topology::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut p = ContactProbabilities::uniform(&t).unwrap().matrix().clone();
        p[(1, 0)] = 0.9;
        assert!(ContactProbabilities::new(&t, p).is_err());
    }

    #[test]
    fn topology_serializes_as_edge_list() {
        let t = Topology::from_edges(3, [(0, 1), (2, 1)]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"nodes":3,"edges":[[0,1],[1,2]]}"#);
        let back: Topology = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<Topology>(r#"{"nodes":2,"edges":[[0,0]]}"#).is_err());
    }
}
