//! Convexity of OCF games: a falsifier for the convexity condition and the
//! round-by-round construction of a core element.
//!
//! For threshold task games both are exact. A set S can pool its weight
//! into proportional task copies in which every member takes part, so any
//! split of the pooled value U(w(S)) that respects individual rationality
//! is a feasible agreement. Convexity then reduces to
//!
//! U(w(T)) + U(w(S ∪ R)) - a(S) <= U(w(T ∪ R))
//!
//! for all nonempty R and S ⊊ T ⊆ N \ R, where a_i = U(w_i) is the
//! individually rational payoff. Rule-based games are searched on the grid.

use std::collections::HashMap;
use std::fmt;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deviations::{rule_structures, RuleCoalition};
use crate::error::{Error, Result};
use crate::lp::{self, Direction, LinearProgram, LpResult, Relation, VarKind};
use crate::model::{CoalitionStructure, Game, Outcome, Resolution, RuleGame, Ttg};
use crate::rational::{self, Rational};
use crate::subsets;
use crate::welfare::{self, TtgProfile, SUBSET_GUARD};

/// The agreement chosen in one round of the construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundState {
    /// 1-based round number; the round covers the first `round` agents of the ordering.
    pub round: usize,
    pub agents: Vec<usize>,
    /// Lower bounds each earlier agent had to keep, indexed by agent.
    pub bounds: Vec<Rational>,
    pub outcome: Outcome,
    pub payoffs: Vec<Rational>,
}

fn check_ordering(n: usize, ordering: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if ordering.len() != n {
        return Err(Error::Invalid(format!("ordering lists {} agents, game has {n}", ordering.len())));
    }
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Invalid("ordering is not a permutation of the agents".into()));
        }
    }
    Ok(())
}

/// Runs the construction and returns the final outcome.
pub fn construct_core_element(game: &Game, ordering: &[usize], res: Resolution) -> Result<Outcome> {
    let rounds = construct_rounds(game, ordering, res)?;
    Ok(rounds.last().map_or_else(Outcome::empty, |r| r.outcome.clone()))
}

/// Every round of the construction: round k maximizes the payoff of the
/// k-th agent over agreements on the first k agents that keep each earlier
/// agent at least at its previous payoff.
pub fn construct_rounds(game: &Game, ordering: &[usize], res: Resolution) -> Result<Vec<RoundState>> {
    check_ordering(game.n(), ordering)?;
    match game {
        Game::Ttg(t) => Ok(ttg_rounds(t, ordering)?),
        Game::Rules(rg) => rule_rounds(rg, ordering, res),
    }
}

/// Outcome paying `p` over the welfare-optimal pooled structure on `set`.
fn pooled_outcome(ttg: &Ttg, profile: &TtgProfile, set: &[usize], p: &[Rational]) -> Outcome {
    let opt = welfare::canonical_optimum(ttg, profile, set);
    if opt.value.is_zero() {
        return Outcome::empty();
    }
    let payoffs = opt
        .structure
        .coalitions
        .iter()
        .map(|c| {
            let share = ttg.best_task_value(&c.total()) / &opt.value;
            p.iter().map(|pi| pi * &share).collect()
        })
        .collect();
    Outcome::new(opt.structure, payoffs)
}

/// Exact rounds for threshold task games: round k pays agent k its
/// marginal pooled value and leaves everyone else where they were.
fn ttg_rounds(ttg: &Ttg, ordering: &[usize]) -> Result<Vec<RoundState>> {
    let profile = TtgProfile::new(ttg)?;
    let n = ttg.n();
    let mut p = vec![Rational::zero(); n];
    let mut rounds = Vec::with_capacity(n);
    let mut previous = Rational::zero();
    for k in 0..n {
        let agents: Vec<usize> = ordering[..=k].to_vec();
        let bounds = p.clone();
        let total = profile.value_of_set(&agents).clone();
        p[ordering[k]] = &total - &previous;
        previous = total;
        let outcome = pooled_outcome(ttg, &profile, &agents, &p);
        rounds.push(RoundState { round: k + 1, agents, bounds, outcome, payoffs: p.clone() });
    }
    Ok(rounds)
}

/// Best payoff split over one structure: maximizes `objective · p` subject
/// to `p_j >= lower_j`. Returns the objective value and per-coalition rows.
fn best_split(
    structure: &[RuleCoalition],
    n: usize,
    lower: &[(usize, Rational)],
    objective: &[(usize, Rational)],
) -> Option<(Rational, Vec<Vec<Rational>>)> {
    let mut prog = LinearProgram::new();
    let mut vars = Vec::new();
    for (c, rc) in structure.iter().enumerate() {
        let mut terms = Vec::new();
        for j in subsets::members(rc.support) {
            let v = prog.add_variable(format!("y{c}_{j}"), VarKind::NonNegative);
            vars.push((c, j, v));
            terms.push((v, rational::int(1)));
        }
        prog.add_sparse(&terms, Relation::Eq, rc.value.clone());
    }
    for (j, bound) in lower {
        let terms: Vec<(usize, Rational)> =
            vars.iter().filter(|v| v.1 == *j).map(|v| (v.2, rational::int(1))).collect();
        if terms.is_empty() {
            if bound.is_positive() {
                return None;
            }
            continue;
        }
        prog.add_sparse(&terms, Relation::Ge, bound.clone());
    }
    let obj: Vec<(usize, Rational)> = vars
        .iter()
        .filter_map(|v| objective.iter().find(|o| o.0 == v.1).map(|o| (v.2, o.1.clone())))
        .collect();
    prog.set_sparse_objective(&obj, Direction::Maximize);
    let LpResult::Feasible { assignment, .. } = lp::solve(&prog) else {
        return None;
    };
    let mut rows = vec![vec![Rational::zero(); n]; structure.len()];
    for (c, j, v) in vars {
        rows[c][j] = assignment[v].clone();
    }
    let value = objective.iter().fold(Rational::zero(), |a, (j, w)| {
        a + w * rational::sum(rows.iter().map(|r| &r[*j]))
    });
    Some((value, rows))
}

/// Best grid structure each agent forms alone, with its value.
fn solo_structures(rg: &RuleGame, res: Resolution) -> Result<Vec<(Rational, Vec<RuleCoalition>)>> {
    (0..rg.n())
        .map(|i| {
            let mut best = (Rational::zero(), Vec::new());
            for s in rule_structures(rg, 1 << i, res)? {
                let v = rational::sum(s.iter().map(|c| &c.value));
                if v > best.0 {
                    best = (v, s);
                }
            }
            Ok(best)
        })
        .collect()
}

fn rule_rounds(rg: &RuleGame, ordering: &[usize], res: Resolution) -> Result<Vec<RoundState>> {
    let n = rg.n();
    let solo = solo_structures(rg, res)?;
    let mut p = vec![Rational::zero(); n];
    let mut previous = Outcome::empty();
    let mut rounds = Vec::with_capacity(n);
    for k in 0..n {
        let agents: Vec<usize> = ordering[..=k].to_vec();
        let me = ordering[k];
        let bounds = p.clone();
        let mut lower: Vec<(usize, Rational)> = agents[..k].iter().map(|&i| (i, p[i].clone())).collect();
        lower.push((me, solo[me].0.clone()));
        let mut best: Option<(Rational, CoalitionStructure, Vec<Vec<Rational>>)> = None;
        for s in rule_structures(rg, subsets::mask_of(&agents), res)? {
            if let Some((value, rows)) = best_split(&s, n, &lower, &[(me, rational::int(1))]) {
                if best.as_ref().map_or(true, |b| value > b.0) {
                    let structure = CoalitionStructure::new(s.into_iter().map(|c| c.coalition).collect());
                    best = Some((value, structure, rows));
                }
            }
        }
        // The earlier agreement plus the newcomer working alone always keeps
        // everyone whole, even when it needs more than `cap` coalitions.
        if best.as_ref().map_or(true, |b| solo[me].0 > b.0) {
            let mut coalitions = previous.structure.coalitions.clone();
            let mut rows = previous.payoffs.clone();
            for c in &solo[me].1 {
                let mut row = vec![Rational::zero(); n];
                row[me] = c.value.clone();
                coalitions.push(c.coalition.clone());
                rows.push(row);
            }
            best = Some((solo[me].0.clone(), CoalitionStructure::new(coalitions), rows));
        }
        let (_, structure, rows) = best.expect("the carried agreement is always available");
        p = vec![Rational::zero(); n];
        for row in &rows {
            for (pj, x) in p.iter_mut().zip(row) {
                *pj += x;
            }
        }
        previous = Outcome::new(structure, rows);
        rounds.push(RoundState { round: k + 1, agents, bounds, outcome: previous.clone(), payoffs: p.clone() });
    }
    Ok(rounds)
}

/// A premise of the convexity condition with no matching agreement on T ∪ R.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvexityViolation {
    pub r: Vec<usize>,
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    /// Payoffs of the agreements on S, T and S ∪ R, indexed by agent.
    pub p_s: Vec<Rational>,
    pub p_t: Vec<Rational>,
    pub p_sr: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Falsification {
    Violation(ConvexityViolation),
    NoneFound { resolution: Resolution, budget: usize },
}

impl Falsification {
    pub fn found(&self) -> bool {
        matches!(self, Falsification::Violation(_))
    }
}

impl fmt::Display for Falsification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Falsification::NoneFound { resolution, budget } => write!(
                f,
                "no violation found at resolution (U={}, D={}, budget={budget})",
                resolution.cap, resolution.grid
            ),
            Falsification::Violation(v) => {
                let set = |s: &[usize]| subsets::format_one_based(s);
                writeln!(f, "convexity violated for R={} S={} T={}", set(&v.r), set(&v.s), set(&v.t))?;
                writeln!(f, "  agreement on S pays ({})", rational::format_list(&v.p_s))?;
                writeln!(f, "  agreement on T pays ({})", rational::format_list(&v.p_t))?;
                write!(
                    f,
                    "  agreement on S+R pays ({}); no agreement on T+R keeps T and R whole",
                    rational::format_list(&v.p_sr)
                )
            }
        }
    }
}

/// Searches for a violation of the convexity condition. Exact for threshold
/// task games (`res` and `budget` unused); for rule-based games each
/// (R, S, T) is tried with `budget` payoff directions over grid structures.
pub fn falsify_convexity(game: &Game, res: Resolution, budget: usize) -> Result<Falsification> {
    let n = game.n();
    if n > SUBSET_GUARD {
        return Err(Error::GuardExceeded { n, limit: SUBSET_GUARD });
    }
    let found = match game {
        Game::Ttg(t) => falsify_ttg(t)?,
        Game::Rules(rg) => falsify_rules(rg, res, budget)?,
    };
    Ok(found.map_or(Falsification::NoneFound { resolution: res, budget }, Falsification::Violation))
}

/// All (R, S, T) with R nonempty, T ⊆ N \ R nonempty and S ⊊ T, as masks.
fn premises(n: usize) -> Vec<(u64, u64, u64)> {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = Vec::new();
    for r in subsets::lexicographic(n) {
        let rm = subsets::mask_of(&r);
        let rest = full & !rm;
        let mut ts: Vec<u64> = subsets::submasks(rest).collect();
        ts.sort_by(|a, b| if subsets::lex_less(*a, *b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
        for t in ts {
            out.push((rm, 0, t));
            let mut ss: Vec<u64> = subsets::submasks(t).filter(|&s| s != t).collect();
            ss.sort_by(|a, b| if subsets::lex_less(*a, *b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
            out.extend(ss.into_iter().map(|s| (rm, s, t)));
        }
    }
    out
}

/// Payoffs with `a_j` for every member of `set` and the excess of `total`
/// on `receiver`.
fn floor_plus_excess(n: usize, a: &[Rational], set: u64, total: &Rational, receiver: usize) -> Vec<Rational> {
    let mut p = vec![Rational::zero(); n];
    let mut rest = total.clone();
    for j in subsets::members(set) {
        p[j] = a[j].clone();
        rest -= &a[j];
    }
    p[receiver] += rest;
    p
}

fn falsify_ttg(ttg: &Ttg) -> Result<Option<ConvexityViolation>> {
    let n = ttg.n();
    let profile = TtgProfile::new(ttg)?;
    let u = |m: u64| profile.value_units(profile.units_of_mask(m)).clone();
    let a: Vec<Rational> = (0..n).map(|i| u(1 << i)).collect();
    let a_of = |m: u64| rational::sum(subsets::members(m).iter().map(|&j| &a[j]));
    for (r, s, t) in premises(n) {
        let lhs = u(t) + u(s | r) - a_of(s);
        if lhs > u(t | r) {
            let first = |m: u64| subsets::members(m)[0];
            return Ok(Some(ConvexityViolation {
                r: subsets::members(r),
                s: subsets::members(s),
                t: subsets::members(t),
                p_s: floor_plus_excess(n, &a, s, &a_of(s), first(t)),
                p_t: floor_plus_excess(n, &a, t, &u(t), first(t)),
                p_sr: floor_plus_excess(n, &a, s | r, &u(s | r), first(r)),
            }));
        }
    }
    Ok(None)
}

fn falsify_rules(rg: &RuleGame, res: Resolution, budget: usize) -> Result<Option<ConvexityViolation>> {
    let n = rg.n();
    let a: Vec<Rational> = solo_structures(rg, res)?.into_iter().map(|s| s.0).collect();
    let mut cache: HashMap<u64, Vec<Vec<RuleCoalition>>> = HashMap::new();
    let mut structures = |m: u64| -> Result<Vec<Vec<RuleCoalition>>> {
        if let Some(s) = cache.get(&m) {
            return Ok(s.clone());
        }
        let s = rule_structures(rg, m, res)?;
        cache.insert(m, s.clone());
        Ok(s)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let floors = |m: u64| -> Vec<(usize, Rational)> { subsets::members(m).into_iter().map(|j| (j, a[j].clone())).collect() };
    let payoffs = |rows: &[Vec<Rational>]| -> Vec<Rational> {
        (0..n).map(|j| rational::sum(rows.iter().map(|r| &r[j]))).collect()
    };
    for (r, s, t) in premises(n) {
        let on_t = structures(t)?;
        let on_sr = structures(s | r)?;
        let on_tr = structures(t | r)?;
        for d in 0..budget.max(1) {
            let weights: Vec<Rational> =
                (0..n).map(|_| if d == 0 { rational::int(1) } else { rational::int(rng.gen_range(1..=9)) }).collect();
            let direction = |m: u64| -> Vec<(usize, Rational)> {
                subsets::members(m).into_iter().map(|j| (j, weights[j].clone())).collect()
            };
            let best = |options: &[Vec<RuleCoalition>], lower: &[(usize, Rational)], obj: &[(usize, Rational)]| {
                let mut top: Option<(Rational, Vec<Vec<Rational>>)> = None;
                for st in options {
                    if let Some((v, rows)) = best_split(st, n, lower, obj) {
                        if top.as_ref().map_or(true, |b| v > b.0) {
                            top = Some((v, rows));
                        }
                    }
                }
                top
            };
            let Some((_, rows_t)) = best(&on_t, &floors(t), &direction(t)) else { continue };
            let Some((_, rows_sr)) = best(&on_sr, &floors(s | r), &direction(r)) else { continue };
            let p_t = payoffs(&rows_t);
            let p_sr = payoffs(&rows_sr);
            let mut need = floors(t | r);
            for (j, bound) in need.iter_mut() {
                if t >> *j & 1 == 1 {
                    *bound = p_t[*j].clone();
                } else if r >> *j & 1 == 1 {
                    *bound = p_sr[*j].clone();
                }
            }
            let answered = on_tr.iter().any(|st| best_split(st, n, &need, &[]).is_some());
            if !answered {
                let mut p_s = vec![Rational::zero(); n];
                for j in subsets::members(s) {
                    p_s[j] = a[j].clone();
                }
                return Ok(Some(ConvexityViolation {
                    r: subsets::members(r),
                    s: subsets::members(s),
                    t: subsets::members(t),
                    p_s,
                    p_t,
                    p_sr,
                }));
            }
        }
    }
    Ok(None)
}
