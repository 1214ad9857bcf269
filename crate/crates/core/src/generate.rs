//! Seeded random games and outcomes. Every generator draws from a
//! ChaCha8 stream, so a seed reproduces its instance exactly on any
//! platform.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    self, CoalitionStructure, Game, Outcome, PartialCoalition, PayoffPolicy, Requirement, Resolution, Rule,
    RuleGame, TaskType, Ttg,
};
use crate::rational::{self, Rational};
use crate::stability;
use crate::welfare::Vstar;

/// Size bounds for a random game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameBounds {
    pub agents: usize,
    /// Weights are drawn from 1..=max_weight.
    pub max_weight: u64,
    /// Upper bound on the total weight, if any.
    pub max_total_weight: Option<u64>,
    /// Number of task types or rules.
    pub tasks: usize,
    /// Utilities and rule values are drawn from 1..=max_utility.
    pub max_utility: u64,
}

impl GameBounds {
    pub fn new(agents: usize, max_weight: u64, tasks: usize) -> Self {
        GameBounds { agents, max_weight, max_total_weight: None, tasks, max_utility: 10 }
    }

    fn check(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::Invalid("a game needs at least one agent".into()));
        }
        if self.agents > 16 {
            return Err(Error::Invalid("random games are limited to 16 agents".into()));
        }
        if self.max_weight == 0 || self.tasks == 0 || self.max_utility == 0 {
            return Err(Error::Invalid("weight, task and utility bounds must be positive".into()));
        }
        if let Some(t) = self.max_total_weight {
            if t < self.agents as u64 {
                return Err(Error::Invalid(format!("total weight {t} cannot cover {} agents", self.agents)));
            }
        }
        Ok(())
    }

    fn total_weight(&self) -> u64 {
        let all = self.max_weight.saturating_mul(self.agents as u64);
        self.max_total_weight.map_or(all, |t| t.min(all))
    }
}

fn int(x: u64) -> Rational {
    Rational::from_integer(x.into())
}

fn weights<R: Rng>(rng: &mut R, b: &GameBounds) -> Vec<u64> {
    let cap = b.total_weight();
    loop {
        let w: Vec<u64> = (0..b.agents).map(|_| rng.gen_range(1..=b.max_weight)).collect();
        if w.iter().sum::<u64>() <= cap {
            return w;
        }
    }
}

/// Random TTG with integer weights and tasks whose thresholds range up to
/// the total weight.
pub fn random_ttg<R: Rng>(rng: &mut R, bounds: &GameBounds) -> Result<Ttg> {
    bounds.check()?;
    let w = weights(rng, bounds);
    let total: u64 = w.iter().sum();
    let tasks = (0..bounds.tasks)
        .map(|_| TaskType::new(int(rng.gen_range(1..=total)), int(rng.gen_range(1..=bounds.max_utility))))
        .collect();
    Ttg::new(w.into_iter().map(int).collect(), tasks)
}

/// Random rule-based game: each rule has one or two requirements over
/// random agent groups.
pub fn random_rule_game<R: Rng>(rng: &mut R, bounds: &GameBounds) -> Result<RuleGame> {
    bounds.check()?;
    let w = weights(rng, bounds);
    let n = bounds.agents;
    let rules = (0..bounds.tasks)
        .map(|_| {
            let count = rng.gen_range(1..=2);
            let requirements = (0..count)
                .map(|_| {
                    let mut agents: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
                    if agents.is_empty() {
                        agents.push(rng.gen_range(0..n));
                    }
                    let supply: u64 = agents.iter().map(|&a| w[a]).sum();
                    Requirement { agents, min: int(rng.gen_range(1..=supply)) }
                })
                .collect();
            Rule { requirements, value: int(rng.gen_range(1..=bounds.max_utility)) }
        })
        .collect();
    RuleGame::new(w.into_iter().map(int).collect(), rules)
}

/// Seeded random game; `rules` selects the rule-based form.
pub fn generate_game(seed: u64, bounds: &GameBounds, rules: bool) -> Result<Game> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(if rules { random_rule_game(&mut rng, bounds)?.into() } else { random_ttg(&mut rng, bounds)?.into() })
}

/// Seeded random valid outcome of `game`, drawn from its own stream so it
/// does not disturb the game drawn from the same seed.
pub fn generate_outcome(seed: u64, game: &Game, res: Resolution) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    random_outcome(&mut rng, game, res)
}

/// Splits `value` among `support` in random nonnegative shares with
/// denominators dividing 6.
fn random_split<R: Rng>(rng: &mut R, value: &Rational, support: &[usize], n: usize) -> Vec<Rational> {
    let mut row = vec![Rational::zero(); n];
    if support.is_empty() {
        return row;
    }
    let mut shares: Vec<u64> = support.iter().map(|_| rng.gen_range(0..=3)).collect();
    if shares.iter().all(|&s| s == 0) {
        let pick = rng.gen_range(0..shares.len());
        shares[pick] = 1;
    }
    let total: u64 = shares.iter().sum();
    for (&j, &s) in support.iter().zip(&shares) {
        row[j] = value * int(s) / int(total);
    }
    row
}

/// Integer contributions for up to `cap` coalitions within capacity.
fn random_structure<R: Rng>(rng: &mut R, game: &Game, cap: usize) -> CoalitionStructure {
    let n = game.n();
    let mut room: Vec<u64> = game.weights().iter().map(|w| rational::floor_usize(w).unwrap_or(0) as u64).collect();
    let k = rng.gen_range(1..=cap);
    let mut coalitions = Vec::new();
    for _ in 0..k {
        let c: Vec<u64> = (0..n)
            .map(|j| if room[j] > 0 && rng.gen_bool(0.6) { rng.gen_range(1..=room[j]) } else { 0 })
            .collect();
        if c.iter().all(|&x| x == 0) {
            continue;
        }
        for j in 0..n {
            room[j] -= c[j];
        }
        coalitions.push(PartialCoalition::new(c.into_iter().map(int).collect()));
    }
    CoalitionStructure::new(coalitions)
}

fn with_payoffs<R: Rng>(rng: &mut R, game: &Game, cs: CoalitionStructure) -> Result<Outcome> {
    let n = game.n();
    let payoffs = cs
        .coalitions
        .iter()
        .map(|c| Ok(random_split(rng, &game.value(c)?, &c.support(), n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome::new(cs, payoffs))
}

/// Each agent working alone at its best, keeping everything it earns.
/// Always a valid outcome.
fn solo_outcome(oracle: &Vstar<'_>) -> Outcome {
    let n = oracle.game().n();
    let mut coalitions = Vec::new();
    let mut payoffs = Vec::new();
    for j in 0..n {
        let (_, cs) = oracle.witness(&[j]);
        for c in cs.coalitions {
            let mut row = vec![Rational::zero(); n];
            row[j] = oracle.game().value(&c).expect("dimension matches");
            coalitions.push(c);
            payoffs.push(row);
        }
    }
    Outcome::new(CoalitionStructure::new(coalitions), payoffs)
}

/// A random valid outcome (nonnegative payoffs, individually rational).
/// Draws mix arbitrary structures, welfare-optimal structures with random
/// splits, and for TTGs the c-core stabilizer when one exists, so sweeps see
/// both stable and unstable outcomes.
pub fn random_outcome<R: Rng>(rng: &mut R, game: &Game, res: Resolution) -> Result<Outcome> {
    let oracle = Vstar::new(game, res)?;
    let all: Vec<usize> = (0..game.n()).collect();
    let modes: &[u8] = if game.as_ttg().is_some() { &[0, 0, 1, 1, 2] } else { &[0, 0, 1, 1] };
    for _ in 0..50 {
        let candidate = match modes.choose(rng).copied().unwrap_or(0) {
            0 => {
                let cs = random_structure(rng, game, res.cap);
                with_payoffs(rng, game, cs)?
            }
            1 => {
                let (_, cs) = oracle.witness(&all);
                with_payoffs(rng, game, cs)?
            }
            _ => match stability::stabilize(game.as_ttg().expect("mode reserved for TTGs"))?.stabilizer() {
                Some(o) => o.clone(),
                None => continue,
            },
        };
        if model::validate_outcome_with(&oracle, &candidate, PayoffPolicy::Nonnegative).is_ok() {
            return Ok(candidate);
        }
    }
    Ok(solo_outcome(&oracle))
}
