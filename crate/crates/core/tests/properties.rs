mod common;

use aggnash::cournot::{build_game, sample_params};
use aggnash::game::{FeasibleSet, LinearCoupling, Relation};
use aggnash::gossip::{gossip_step, GossipModel};
use aggnash::graph::{build_topology, build_weights, check_doubly_stochastic, pairwise_gossip_matrix, transition_product, TopologyKind, WeightMatrix, WeightRule};
use aggnash::state::NetworkState;
use aggnash::sync::sync_step;
use aggnash::ProjectionWorkspace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coupled_set() -> impl Strategy<Value = (FeasibleSet, usize)> {
    (1usize..=4)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0f64..1.0, d),
                prop::collection::vec(0.0f64..3.0, d),
                prop::collection::vec(-2.0f64..2.0, d),
                prop::collection::vec(0.0f64..1.0, d),
                any::<bool>(),
            )
        })
        .prop_filter_map("feasible", |(lower, width, a, t, ge)| {
            let upper: Vec<f64> = lower.iter().zip(&width).map(|(l, w)| l + w).collect();
            let rhs: f64 = a
                .iter()
                .zip(lower.iter().zip(&upper).zip(&t))
                .map(|(c, ((l, u), s))| c * (l + s * (u - l)))
                .sum();
            let rel = if ge { Relation::Ge } else { Relation::Eq };
            let d = lower.len();
            FeasibleSet::with_coupling(lower, upper, LinearCoupling::new(a, rel, rhs))
                .ok()
                .map(|s| (s, d))
        })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projection_is_nonexpansive((set, d) in coupled_set(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z1: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z2: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut ws = ProjectionWorkspace::default();
        let p1 = set.project(&z1, &mut ws).unwrap();
        let p2 = set.project(&z2, &mut ws).unwrap();
        prop_assert!(dist(&p1, &p2) <= dist(&z1, &z2) + 1e-9);
    }

    #[test]
    fn projection_is_idempotent_and_feasible((set, d) in coupled_set(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut ws = ProjectionWorkspace::default();
        let p = set.project(&z, &mut ws).unwrap();
        prop_assert!(set.contains(&p, 1e-9));
        let pp = set.project(&p, &mut ws).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-9);
    }

    #[test]
    fn box_projection_is_exactly_idempotent(z in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let d = z.len();
        let set = FeasibleSet::new_box(vec![-1.0; d], vec![2.0; d]).unwrap();
        let mut ws = ProjectionWorkspace::default();
        let p = set.project(&z, &mut ws).unwrap();
        prop_assert_eq!(set.project(&p, &mut ws).unwrap(), p);
    }

    #[test]
    fn sync_step_conserves(seed in any::<u64>(), n in 2usize..8, alpha in 0.0f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = build_game(&sample_params(n, 2, &mut rng).unwrap()).unwrap();
        let t = build_topology(TopologyKind::RandomConnected, n, &mut rng).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        let mut ws = ProjectionWorkspace::default();
        let mut s = NetworkState::random(&game, &mut rng).unwrap();
        for _ in 0..5 {
            s = sync_step(&game, &s, &w, alpha, &mut ws).unwrap();
            prop_assert!(s.conservation_gap(&game) <= 1e-9);
        }
    }

    #[test]
    fn gossip_step_conserves(seed in any::<u64>(), n in 2usize..8) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = common::nonlinear_aggregate_game(n);
        let model = GossipModel::uniform(build_topology(TopologyKind::Cycle, n.max(3), &mut rng).unwrap()).unwrap();
        prop_assume!(model.n() == n);
        let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
        let mut ws = ProjectionWorkspace::default();
        let mut s = NetworkState::random(&game, &mut rng).unwrap();
        for _ in 0..20 {
            let e = model.draw_contact(&mut rng);
            s = gossip_step(&game, &s, e, &alphas, &mut ws).unwrap();
            prop_assert!(s.conservation_gap(&game) <= 1e-9);
        }
    }

    #[test]
    fn generated_weights_are_doubly_stochastic(seed in any::<u64>(), n in 2usize..25, kind in 0usize..4) {
        let kinds = [TopologyKind::Cycle, TopologyKind::Wheel, TopologyKind::Complete, TopologyKind::RandomConnected];
        let t = build_topology(kinds[kind], n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let w = build_weights(&t, WeightRule::MetropolisHalf);
        prop_assert!(w.verify(&t).is_ok());
    }

    #[test]
    fn products_stay_doubly_stochastic(seed in any::<u64>(), n in 2usize..8, len in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws: Vec<WeightMatrix> = (0..len)
            .map(|_| build_weights(&build_topology(TopologyKind::RandomConnected, n, &mut rng).unwrap(), WeightRule::MetropolisHalf))
            .collect();
        let phi = transition_product(&ws, len - 1, 0).phi;
        prop_assert!(check_doubly_stochastic(&phi, 1e-12).is_ok());
        prop_assert!(phi.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn pairwise_matrices_are_idempotent(n in 2usize..15, a in 0usize..15, b in 0usize..15) {
        prop_assume!(a < n && b < n && a != b);
        let w = pairwise_gossip_matrix(n, a, b);
        prop_assert!((&w * &w - &w).amax() <= 1e-12);
        prop_assert!((&w - w.transpose()).amax() == 0.0);
        prop_assert!(check_doubly_stochastic(&w, 1e-12).is_ok());
    }
}
