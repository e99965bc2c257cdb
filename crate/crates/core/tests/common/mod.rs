#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use aggnash::game::{AggregateMap, FeasibleSet, GameInstance, PlayerSpec, Relation};
use aggnash::graph::{build_topology, Topology, TopologyKind};
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

/// Serializes heavy tests so wall-clock budgets are measured fairly.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes one verdict line straight to stderr so it shows up even when the
/// harness captures output.
pub fn verdict(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "[{id}] {tag} {detail}");
}

/// Every window of `q` consecutive graphs contains a fixed random spanning
/// tree: its edges are split across `q` residue classes, and each graph also
/// gets a few random extra edges.
pub fn q_connected_sequence<R: Rng>(n: usize, q: usize, horizon: usize, extra: f64, rng: &mut R) -> Vec<Topology> {
    let tree = build_topology(TopologyKind::RandomConnected, n, rng).unwrap();
    let classes: Vec<((usize, usize), usize)> = tree.edges().map(|e| (e, rng.random_range(0..q))).collect();
    (0..horizon)
        .map(|k| {
            let mut edges: Vec<(usize, usize)> = classes
                .iter()
                .filter(|(_, c)| *c == k % q)
                .map(|(e, _)| *e)
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < extra {
                        edges.push((i, j));
                    }
                }
            }
            Topology::from_edges(n, edges).unwrap()
        })
        .collect()
}

/// Exact projection onto `{lower <= y <= upper, a^T y (=|>=) rhs}` by
/// enumerating active sets: every coordinate at its lower bound, upper bound
/// or free, with the coupling active (and, for `>=`, also inactive). The
/// closest feasible candidate is the projection.
pub fn active_set_projection(z: &[f64], lower: &[f64], upper: &[f64], a: &[f64], rel: Relation, rhs: f64) -> Vec<f64> {
    let n = z.len();
    let feas_tol = 1e-9;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |y: Vec<f64>| {
        let ok_box = y.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| *v >= l - feas_tol && *v <= u + feas_tol);
        let val: f64 = y.iter().zip(a).map(|(v, c)| v * c).sum();
        let ok_c = match rel {
            Relation::Eq => (val - rhs).abs() <= feas_tol * (1.0 + rhs.abs()),
            Relation::Ge => val >= rhs - feas_tol * (1.0 + rhs.abs()),
        };
        if ok_box && ok_c {
            let d: f64 = y.iter().zip(z).map(|(p, q)| (p - q).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    };
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let fixed = |i: usize| match state[i] {
            0 => Some(lower[i]),
            1 => Some(upper[i]),
            _ => None,
        };
        let mut fixed_val = 0.0;
        let mut free_val = 0.0;
        let mut free_norm = 0.0;
        for i in 0..n {
            match fixed(i) {
                Some(b) => fixed_val += a[i] * b,
                None => {
                    free_val += a[i] * z[i];
                    free_norm += a[i] * a[i];
                }
            }
        }
        if free_norm > 0.0 {
            let nu = (fixed_val + free_val - rhs) / free_norm;
            consider((0..n).map(|i| fixed(i).unwrap_or(z[i] - nu * a[i])).collect());
        } else {
            consider((0..n).map(|i| fixed(i).unwrap_or(z[i])).collect());
        }
        if rel == Relation::Ge {
            consider((0..n).map(|i| fixed(i).unwrap_or(z[i])).collect());
        }
    }
    best.expect("feasible set is nonempty").1
}

/// Three players with decision dimensions 1, 2 and 3 sharing a scalar
/// aggregate: identity, coordinate selection and a linear custom map.
/// `F_i(x_i, u) = q x_i + c_i + kappa w_i u`, strongly monotone.
pub fn heterogeneous_game() -> GameInstance {
    let q = 3.0;
    let kappa = 0.4;
    let mk_box = |d: usize| FeasibleSet::new_box(vec![0.0; d], vec![5.0; d]).unwrap();
    let p1 = PlayerSpec::new(mk_box(1), move |x, u, o| o[0] = q * x[0] - 4.0 + kappa * u[0], AggregateMap::Identity);
    let p2 = PlayerSpec::new(
        mk_box(2),
        move |x, u, o| {
            o[0] = q * x[0] - 6.0 + kappa * u[0];
            o[1] = q * x[1] - 2.0;
        },
        AggregateMap::Select(vec![0]),
    );
    let w3 = [0.5, 1.0, 0.25];
    let c3 = [-3.0, -5.0, -1.0];
    let p3 = PlayerSpec::new(
        mk_box(3),
        move |x, u, o| {
            for k in 0..3 {
                o[k] = q * x[k] + c3[k] + kappa * w3[k] * u[0];
            }
        },
        AggregateMap::custom(move |x, o| o[0] = w3.iter().zip(x).map(|(w, v)| w * v).sum()),
    );
    GameInstance::new(vec![p1, p2, p3], 1).unwrap()
}

/// Like [`heterogeneous_game`] but with a nonlinear aggregate for player 3
/// and a two-dimensional aggregate; used where only conservation matters.
pub fn nonlinear_aggregate_game(players: usize) -> GameInstance {
    let specs = (0..players)
        .map(|i| {
            let d = 1 + i % 3;
            let set = FeasibleSet::new_box(vec![-1.0; d], vec![2.0; d]).unwrap();
            let shift = 0.1 * i as f64;
            let grad = move |x: &[f64], u: &[f64], o: &mut [f64]| {
                for k in 0..x.len() {
                    o[k] = 2.0 * x[k] - shift + 0.3 * u[k % 2];
                }
            };
            let h = AggregateMap::custom(move |x: &[f64], o: &mut [f64]| {
                o[0] = x.iter().map(|v| v * v).sum::<f64>() + shift;
                o[1] = x.iter().map(|v| v.sin()).sum();
            });
            PlayerSpec::new(set, grad, h)
        })
        .collect();
    GameInstance::new(specs, 2).unwrap()
}
