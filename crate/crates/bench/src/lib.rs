//! Seeded fixtures shared by the benchmarks.

use ocf_core::generate::{self, GameBounds};
use ocf_core::{Game, Outcome, Resolution, Ttg};

/// A TTG with `agents` agents of weight up to `max_weight` and three tasks.
pub fn ttg(seed: u64, agents: usize, max_weight: u64) -> Ttg {
    let mut bounds = GameBounds::new(agents, max_weight, 3);
    bounds.max_utility = 50;
    match generate::generate_game(seed, &bounds, false).expect("bounds are valid") {
        Game::Ttg(t) => t,
        Game::Rules(_) => unreachable!("asked for a TTG"),
    }
}

/// A small rule-based game.
pub fn rule_game(seed: u64, agents: usize) -> Game {
    let mut bounds = GameBounds::new(agents, 3, 3);
    bounds.max_total_weight = Some(2 * agents as u64);
    generate::generate_game(seed, &bounds, true).expect("bounds are valid")
}

/// A seeded valid outcome of `game`.
pub fn outcome(seed: u64, game: &Game) -> Outcome {
    generate::generate_outcome(seed, game, Resolution::default()).expect("game is valid")
}
