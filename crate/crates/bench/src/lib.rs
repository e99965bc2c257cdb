//! Fixtures shared by the benchmarks.

use aggnash::cournot::{build_game, sample_params};
use aggnash::graph::build_topology;
use aggnash::{GameInstance, NetworkState, Topology, TopologyKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub game: GameInstance,
    pub state: NetworkState,
    pub topology: Topology,
    pub rng: ChaCha8Rng,
}

/// A seeded Cournot game with a random feasible network state.
pub fn cournot_fixture(players: usize, locations: usize, topology: TopologyKind) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let game = build_game(&sample_params(players, locations, &mut rng).expect("valid sizes")).expect("valid game");
    let state = NetworkState::random(&game, &mut rng).expect("projection succeeds");
    let topology = build_topology(topology, players, &mut rng).expect("valid topology");
    Fixture {
        game,
        state,
        topology,
        rng,
    }
}
