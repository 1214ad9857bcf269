//! Profitable-deviation search for the conservative (c), refined (r) and
//! optimistic (o) cores.
//!
//! A deviation by J yields a list of payoff sources, each an amount that
//! may be split among an eligible subset of J: new coalitions pay their
//! contributors, kept coalitions keep paying the old shares, and under the
//! optimistic rule a modified coalition pays J whatever is left after the
//! outsiders receive their old shares. The deviation is profitable iff the
//! sources can be split so that every member of J strictly gains, which by
//! Hall's theorem holds iff for every nonempty T in J the sources reaching
//! T are worth more than p(T).
//!
//! For threshold task games newly formed coalitions are valued exactly: J
//! pools its free weight and earns the knapsack value of the pool. For
//! rule-based games new coalitions are enumerated as (rule, contributors)
//! pairs, at most `cap` of them, with contributions on the `1/grid` lattice.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::flow::{self, Demand};
use crate::lp::{self, Direction, LinearProgram, LpResult, Relation, VarKind};
use crate::model::{
    self, CoalitionStructure, Game, Outcome, PartialCoalition, Resolution, RuleGame, Ttg,
};
use crate::rational::{self, Rational};
use crate::stability::{CoreVerdict, Witness};
use crate::subsets;
use crate::welfare::{self, TaskMultiset, TtgProfile, SUBSET_GUARD};

/// Upper limit on search nodes visited by one optimistic search.
pub const O_CONFIG_LIMIT: u128 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeviationKind {
    Conservative,
    Refined,
    Optimistic,
}

impl DeviationKind {
    pub fn letter(self) -> char {
        match self {
            DeviationKind::Conservative => 'c',
            DeviationKind::Refined => 'r',
            DeviationKind::Optimistic => 'o',
        }
    }
}

impl std::str::FromStr for DeviationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(DeviationKind::Conservative),
            "r" => Ok(DeviationKind::Refined),
            "o" => Ok(DeviationKind::Optimistic),
            _ => Err(Error::Invalid(format!("unknown deviation kind {s:?} (expected c, r or o)"))),
        }
    }
}

/// What the deviators did with an original coalition they belonged to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fate {
    /// Only deviators contributed; the coalition is gone.
    Dissolved,
    /// Deviators withdrew everything.
    Abandoned,
    /// Deviator contributions unchanged.
    Kept,
    /// Deviator contributions changed but not all withdrawn.
    Modified,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionChange {
    /// Index in the original structure.
    pub original: usize,
    pub fate: Fate,
    /// Index in the deviation's structure, for kept and modified coalitions.
    pub post: Option<usize>,
}

/// A profitable deviation. Rows of `payoffs` align with `structure`; only
/// deviator columns are modeled, other entries are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationResult {
    pub kind: DeviationKind,
    pub deviators: Vec<usize>,
    pub changes: Vec<CoalitionChange>,
    /// Surviving coalitions that deviators still support, then new ones.
    pub structure: CoalitionStructure,
    pub payoffs: Vec<Vec<Rational>>,
    /// Payoff of each deviator before, aligned with `deviators`.
    pub before: Vec<Rational>,
    pub after: Vec<Rational>,
}

impl DeviationResult {
    pub fn gains(&self) -> Vec<Rational> {
        self.after.iter().zip(&self.before).map(|(a, b)| a - b).collect()
    }

    /// Pairs (original index, post index) of coalitions that survive.
    pub fn matching(&self) -> Vec<(usize, usize)> {
        self.changes.iter().filter_map(|c| c.post.map(|p| (c.original, p))).collect()
    }

    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.structure.clone(), self.payoffs.clone())
    }

    /// Total payoff each deviator collects from the deviation.
    fn collected(&self) -> Vec<Rational> {
        self.deviators
            .iter()
            .map(|&j| rational::sum(self.payoffs.iter().map(|row| &row[j])))
            .collect()
    }

    /// Re-checks the deviation against the outcome it deviates from:
    /// capacities, agreement outside J, payoff rules and strict gains.
    pub fn verify(&self, game: &Game, outcome: &Outcome) -> std::result::Result<(), String> {
        let n = game.n();
        let jmask = subsets::mask_of(&self.deviators);
        let inside = |k: usize| jmask >> k & 1 == 1;
        let cs = &outcome.structure;
        if self.payoffs.len() != self.structure.len() {
            return Err("payoff rows do not match coalitions".into());
        }
        let used = self.structure.committed(n);
        for &j in &self.deviators {
            if used[j] > game.weights()[j] {
                return Err(format!("agent {} over capacity", j + 1));
            }
        }
        let mut origin = vec![None; self.structure.len()];
        for change in &self.changes {
            let r = &cs.coalitions[change.original];
            let involved = r.support().iter().any(|&k| inside(k));
            if !involved {
                return Err(format!("coalition {} does not involve J", change.original + 1));
            }
            if let Some(post) = change.post {
                if self.kind == DeviationKind::Conservative {
                    return Err("conservative deviations keep no coalitions".into());
                }
                origin[post] = Some(change.original);
                let s = &self.structure.coalitions[post];
                if (0..n).any(|k| !inside(k) && s.get(k) != r.get(k)) {
                    return Err(format!("coalition {} changed outside J", change.original + 1));
                }
            }
        }
        for (l, (s, row)) in self.structure.coalitions.iter().zip(&self.payoffs).enumerate() {
            for k in 0..n {
                if s.get(k).is_negative() {
                    return Err("negative contribution".into());
                }
                if !inside(k) && !row[k].is_zero() {
                    return Err("payoff recorded for a non-deviator".into());
                }
                if inside(k) && row[k].is_negative() {
                    return Err("negative deviator payoff".into());
                }
                if inside(k) && s.get(k).is_zero() && !row[k].is_zero() {
                    return Err(format!("agent {} paid by coalition it does not support", k + 1));
                }
            }
            let paid = rational::sum(row);
            let value = game.value(s).map_err(|e| e.to_string())?;
            match origin[l] {
                None => {
                    if (0..n).any(|k| !inside(k) && !s.get(k).is_zero()) {
                        return Err("new coalition includes a non-deviator".into());
                    }
                    if paid != value {
                        return Err(format!("new coalition pays {paid}, worth {value}"));
                    }
                }
                Some(i) => {
                    let r = &cs.coalitions[i];
                    let x = &outcome.payoffs[i];
                    match self.kind {
                        DeviationKind::Refined => {
                            if s != r || self.deviators.iter().any(|&j| row[j] != x[j]) {
                                return Err("refined deviation altered a kept coalition".into());
                            }
                        }
                        DeviationKind::Optimistic => {
                            let outside = rational::sum((0..n).filter(|&k| !inside(k)).map(|k| &x[k]));
                            let left = &value - &outside;
                            let left = if left.is_positive() { left } else { Rational::zero() };
                            if paid != left {
                                return Err(format!("modified coalition pays J {paid}, leftover {left}"));
                            }
                        }
                        DeviationKind::Conservative => unreachable!("checked above"),
                    }
                }
            }
        }
        let p = model::payoff_vector_n(outcome, n).map_err(|e| e.to_string())?;
        let got = self.collected();
        for (idx, &j) in self.deviators.iter().enumerate() {
            if self.before[idx] != p[j] || self.after[idx] != got[idx] {
                return Err("recorded payoffs are inconsistent".into());
            }
            if got[idx] <= p[j] {
                return Err(format!("agent {} does not gain", j + 1));
            }
        }
        Ok(())
    }

    /// Human-readable description: fates, new coalitions, per-agent gains.
    pub fn narrate(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}-deviation by {}",
            self.kind.letter(),
            subsets::format_one_based(&self.deviators)
        );
        for c in &self.changes {
            let fate = match c.fate {
                Fate::Dissolved => "dissolved",
                Fate::Abandoned => "abandoned",
                Fate::Kept => "kept",
                Fate::Modified => "modified",
            };
            let _ = write!(out, "  coalition {}: {fate}", c.original + 1);
            if let Some(post) = c.post {
                let _ = write!(
                    out,
                    " -> ({}) paying ({})",
                    rational::format_list(self.structure.coalitions[post].contributions()),
                    rational::format_list(&self.payoffs[post])
                );
            }
            out.push('\n');
        }
        let matched: Vec<usize> = self.changes.iter().filter_map(|c| c.post).collect();
        for (l, (s, row)) in self.structure.coalitions.iter().zip(&self.payoffs).enumerate() {
            if matched.contains(&l) {
                continue;
            }
            let _ = writeln!(
                out,
                "  new coalition ({}) paying ({})",
                rational::format_list(s.contributions()),
                rational::format_list(row)
            );
        }
        for ((j, b), a) in self.deviators.iter().zip(&self.before).zip(&self.after) {
            let _ = writeln!(out, "  agent {}: {b} -> {a} (gain {})", j + 1, a - b);
        }
        out
    }
}

impl fmt::Display for DeviationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.narrate())
    }
}

/// An amount J may split among `eligible`, paid through `rows` (post
/// coalition index and the fraction of the amount it carries).
#[derive(Clone, Debug)]
struct Source {
    amount: Rational,
    eligible: u64,
    rows: Vec<(usize, Rational)>,
}

/// Hall condition for a strict improvement of every member of J.
fn hall_holds(sources: &[Source], p: &[Rational], jmask: u64) -> bool {
    subsets::submasks(jmask).all(|t| {
        let reach = sources
            .iter()
            .filter(|s| s.eligible & t != 0)
            .fold(Rational::zero(), |a, s| a + &s.amount);
        let need = subsets::members(t).iter().fold(Rational::zero(), |a, &j| a + &p[j]);
        reach > need
    })
}

/// Splits each source among its eligible deviators, maximizing the
/// smallest gain. Returns `alloc[source][agent]`.
fn allocate(sources: &[Source], p: &[Rational], deviators: &[usize]) -> Vec<Vec<Rational>> {
    let n = p.len();
    let mut lp = LinearProgram::new();
    let eps = lp.add_variable("eps", VarKind::Free);
    let mut var = Vec::new();
    for (s, src) in sources.iter().enumerate() {
        for j in subsets::members(src.eligible) {
            var.push((s, j, lp.add_variable(format!("y{s}_{j}"), VarKind::NonNegative)));
        }
    }
    for (s, src) in sources.iter().enumerate() {
        let terms: Vec<(usize, Rational)> =
            var.iter().filter(|v| v.0 == s).map(|v| (v.2, rational::int(1))).collect();
        lp.add_sparse(&terms, Relation::Eq, src.amount.clone());
    }
    for &j in deviators {
        let mut terms: Vec<(usize, Rational)> =
            var.iter().filter(|v| v.1 == j).map(|v| (v.2, rational::int(1))).collect();
        terms.push((eps, rational::int(-1)));
        lp.add_sparse(&terms, Relation::Ge, p[j].clone());
    }
    // Gains never need to exceed the total on offer.
    let total = sources.iter().fold(Rational::zero(), |a, s| a + &s.amount);
    lp.add_sparse(&[(eps, rational::int(1))], Relation::Le, total);
    lp.set_sparse_objective(&[(eps, rational::int(1))], Direction::Maximize);
    let LpResult::Feasible { assignment, .. } = lp::solve(&lp) else {
        unreachable!("the allocation program is feasible and bounded")
    };
    debug_assert!(assignment[eps].is_positive());
    let mut alloc = vec![vec![Rational::zero(); n]; sources.len()];
    for (s, j, k) in var {
        alloc[s][j] = assignment[k].clone();
    }
    alloc
}

/// Builds the result from the post-deviation coalitions and their sources.
#[allow(clippy::too_many_arguments)]
fn assemble(
    kind: DeviationKind,
    deviators: &[usize],
    p: &[Rational],
    changes: Vec<CoalitionChange>,
    coalitions: Vec<PartialCoalition>,
    fixed_rows: Vec<(usize, Vec<Rational>)>,
    sources: &[Source],
) -> DeviationResult {
    let n = p.len();
    let mut payoffs = vec![vec![Rational::zero(); n]; coalitions.len()];
    for (row, vals) in fixed_rows {
        payoffs[row] = vals;
    }
    // Fixed amounts enter the allocation as sources without rows.
    let alloc = allocate(sources, p, deviators);
    for (src, a) in sources.iter().zip(&alloc) {
        for (row, frac) in &src.rows {
            for &j in deviators {
                if !a[j].is_zero() {
                    payoffs[*row][j] += &a[j] * frac;
                }
            }
        }
    }
    let before: Vec<Rational> = deviators.iter().map(|&j| p[j].clone()).collect();
    let after: Vec<Rational> = deviators
        .iter()
        .map(|&j| rational::sum(payoffs.iter().map(|row| &row[j])))
        .collect();
    DeviationResult {
        kind,
        deviators: deviators.to_vec(),
        changes,
        structure: CoalitionStructure::new(coalitions),
        payoffs,
        before,
        after,
    }
}

/// A (rule, contributor set) pair usable as a new coalition.
#[derive(Clone, Debug)]
struct Pair {
    rule: usize,
    support: u64,
    value: Rational,
}

/// Grid search over multisets of (rule, contributors) pairs.
struct RuleEngine<'a> {
    rg: &'a RuleGame,
    grid: BigInt,
    cap: usize,
    pairs: Vec<Pair>,
    /// Per rule: binding requirements as (agent mask, minimum in grid units).
    reqs: Vec<Vec<(u64, Rational)>>,
    disjoint: bool,
}

impl<'a> RuleEngine<'a> {
    fn new(rg: &'a RuleGame, jmask: u64, res: Resolution) -> Self {
        let grid = BigInt::from(res.grid);
        let g = Rational::from_integer(grid.clone());
        let reqs: Vec<Vec<(u64, Rational)>> = rg
            .rules()
            .iter()
            .map(|r| {
                r.binding()
                    .map(|q| (subsets::mask_of(&q.agents), (&q.min * &g).ceil()))
                    .collect()
            })
            .collect();
        let mut pairs = Vec::new();
        for (ri, rule) in rg.rules().iter().enumerate() {
            for support in subsets::submasks(jmask).collect::<Vec<_>>().into_iter().rev() {
                if reqs[ri].iter().all(|(m, _)| m & support != 0) {
                    pairs.push(Pair { rule: ri, support, value: rule.value.clone() });
                }
            }
        }
        pairs.sort_by(|a, b| b.value.cmp(&a.value).then(a.rule.cmp(&b.rule)).then(a.support.cmp(&b.support)));
        let disjoint = rg.rules().iter().all(|r| r.has_disjoint_groups());
        RuleEngine { rg, grid, cap: res.cap, pairs, reqs, disjoint }
    }

    fn to_units(&self, amount: &Rational) -> Rational {
        (amount * Rational::from_integer(self.grid.clone())).floor()
    }

    /// Contributions in grid units for one coalition per chosen pair, or
    /// `None` if the supplies cannot cover them. Every contributor gives at
    /// least one unit, counted toward the first requirement naming it.
    fn realize(&self, units: &[Rational], chosen: &[usize]) -> Option<Vec<Vec<Rational>>> {
        let n = units.len();
        let mut left = units.to_vec();
        let mut demands = Vec::new();
        let mut owners = Vec::new();
        let mut base = vec![vec![Rational::zero(); n]; chosen.len()];
        for (c, &pi) in chosen.iter().enumerate() {
            let pair = &self.pairs[pi];
            let reqs = &self.reqs[pair.rule];
            let mut need: Vec<Rational> = reqs.iter().map(|(_, m)| m.clone()).collect();
            for j in subsets::members(pair.support) {
                left[j] -= rational::int(1);
                if left[j].is_negative() {
                    return None;
                }
                base[c][j] = rational::int(1);
                if let Some(k) = reqs.iter().position(|(m, _)| m >> j & 1 == 1) {
                    need[k] -= rational::int(1);
                }
            }
            for ((mask, _), amount) in reqs.iter().zip(need) {
                if amount.is_positive() {
                    demands.push(Demand { mask: mask & pair.support, amount });
                    owners.push(c);
                }
            }
        }
        let amounts = flow::assign_demands(&left, &demands)?;
        for (k, &c) in owners.iter().enumerate() {
            for (j, row) in amounts.iter().enumerate() {
                base[c][j] += &row[k];
            }
        }
        Some(base)
    }

    /// Upper bound on what new coalitions can earn from the given supplies.
    fn value_bound(&self, supplies: &[Rational]) -> Rational {
        if self.disjoint {
            welfare::best_rule_multiset(self.rg, supplies, self.cap).0
        } else {
            self.pairs.first().map_or_else(Rational::zero, |p| &p.value * rational::from_usize(self.cap))
        }
    }

    /// First multiset of pairs (in search order) that together with `fixed`
    /// passes the Hall test, with its coalitions in grid units.
    fn search(
        &self,
        supplies: &[Rational],
        fixed: &[Source],
        p: &[Rational],
        jmask: u64,
    ) -> Option<(Vec<usize>, Vec<Vec<Rational>>)> {
        let units: Vec<Rational> = supplies.iter().map(|s| self.to_units(s)).collect();
        let usable: u64 = (0..units.len()).filter(|&j| units[j].is_positive()).fold(0, |m, j| m | 1 << j);
        let candidates: Vec<usize> =
            (0..self.pairs.len()).filter(|&i| self.pairs[i].support & !usable == 0).collect();
        let fixed_total = fixed.iter().fold(Rational::zero(), |a, s| a + &s.amount);
        let target = subsets::members(jmask).iter().fold(Rational::zero(), |a, &j| a + &p[j]);
        let mut state = PairSearch {
            engine: self,
            units: &units,
            candidates: &candidates,
            sources: fixed.to_vec(),
            chosen: Vec::new(),
            p,
            jmask,
            target,
        };
        if hall_holds(&state.sources, p, jmask) {
            return Some((Vec::new(), Vec::new()));
        }
        state.descend(0, fixed_total)
    }
}

struct PairSearch<'e, 'a> {
    engine: &'e RuleEngine<'a>,
    units: &'e [Rational],
    candidates: &'e [usize],
    sources: Vec<Source>,
    chosen: Vec<usize>,
    p: &'e [Rational],
    jmask: u64,
    target: Rational,
}

impl PairSearch<'_, '_> {
    fn descend(&mut self, start: usize, total: Rational) -> Option<(Vec<usize>, Vec<Vec<Rational>>)> {
        if self.chosen.len() == self.engine.cap {
            return None;
        }
        let slots = rational::from_usize(self.engine.cap - self.chosen.len());
        for pos in start..self.candidates.len() {
            let pi = self.candidates[pos];
            let pair = &self.engine.pairs[pi];
            if &total + &slots * &pair.value <= self.target {
                break;
            }
            self.chosen.push(pi);
            if let Some(coalitions) = self.engine.realize(self.units, &self.chosen) {
                self.sources.push(Source { amount: pair.value.clone(), eligible: pair.support, rows: Vec::new() });
                if hall_holds(&self.sources, self.p, self.jmask) {
                    return Some((self.chosen.clone(), coalitions));
                }
                if let Some(found) = self.descend(pos, &total + &pair.value) {
                    return Some(found);
                }
                self.sources.pop();
            }
            self.chosen.pop();
        }
        None
    }
}

/// Agents of `supplies` with something to give.
fn positive_mask(supplies: &[Rational]) -> u64 {
    supplies.iter().enumerate().filter(|(_, s)| s.is_positive()).fold(0, |m, (j, _)| m | 1 << j)
}

/// Proportional task copies over pooled supplies, skipping any remainder.
fn pooled_structure(ttg: &Ttg, profile: &TtgProfile, supplies: &[Rational]) -> (Rational, Vec<PartialCoalition>) {
    let total = rational::sum(supplies);
    let units = profile.integral.units_floor(&total);
    let value = profile.value_units(units).clone();
    if value.is_zero() {
        return (value, Vec::new());
    }
    let TaskMultiset { counts } = profile.knapsack.multiset(units);
    let mut out = Vec::new();
    for (j, &k) in counts.iter().enumerate() {
        let t = &ttg.tasks()[j].threshold;
        for _ in 0..k {
            out.push(PartialCoalition::new(supplies.iter().map(|s| s * t / &total).collect()));
        }
    }
    (value, out)
}

/// Deviation search against one outcome; reuse it across many J.
pub struct DeviationSearch<'a> {
    game: &'a Game,
    outcome: &'a Outcome,
    res: Resolution,
    profile: Option<TtgProfile>,
    p: Vec<Rational>,
}

/// Per-J view of the outcome.
struct Split {
    jmask: u64,
    deviators: Vec<usize>,
    mixed: Vec<usize>,
    pure: Vec<usize>,
    /// Units each deviator has outside the mixed coalitions.
    base_free: Vec<Rational>,
}

impl<'a> DeviationSearch<'a> {
    pub fn new(game: &'a Game, outcome: &'a Outcome, res: Resolution) -> Result<Self> {
        model::validate_structure(game, &outcome.structure)?;
        let n = game.n();
        let p = model::payoff_vector_n(outcome, n)?;
        if outcome.payoffs.len() != outcome.structure.len() {
            return Err(Error::DimensionMismatch {
                expected: outcome.structure.len(),
                found: outcome.payoffs.len(),
            });
        }
        let profile = match game {
            Game::Ttg(t) => Some(TtgProfile::new(t)?),
            Game::Rules(_) => None,
        };
        Ok(DeviationSearch { game, outcome, res, profile, p })
    }

    pub fn payoffs(&self) -> &[Rational] {
        &self.p
    }

    fn split(&self, deviators: &[usize]) -> Result<Split> {
        let n = self.game.n();
        if deviators.is_empty() {
            return Err(Error::Invalid("the deviating set must be nonempty".into()));
        }
        if let Some(&bad) = deviators.iter().find(|&&j| j >= n) {
            return Err(Error::Invalid(format!("agent index {bad} out of range")));
        }
        let mut deviators = deviators.to_vec();
        deviators.sort_unstable();
        deviators.dedup();
        let jmask = subsets::mask_of(&deviators);
        let mut mixed = Vec::new();
        let mut pure = Vec::new();
        for (i, c) in self.outcome.structure.coalitions.iter().enumerate() {
            let supp = c.support_mask();
            if supp & jmask == 0 {
                continue;
            }
            if supp & !jmask == 0 {
                pure.push(i);
            } else {
                mixed.push(i);
            }
        }
        let mut base_free = vec![Rational::zero(); n];
        for &j in &deviators {
            let mut free = self.game.weights()[j].clone();
            for &i in &mixed {
                free -= self.outcome.structure.coalitions[i].get(j);
            }
            base_free[j] = free;
        }
        Ok(Split { jmask, deviators, mixed, pure, base_free })
    }

    fn target(&self, split: &Split) -> Rational {
        rational::sum(split.deviators.iter().map(|&j| &self.p[j]))
    }

    pub fn find(&self, kind: DeviationKind, deviators: &[usize]) -> Result<Option<DeviationResult>> {
        let split = self.split(deviators)?;
        let found = match kind {
            DeviationKind::Conservative => self.conservative(&split),
            DeviationKind::Refined => self.refined(&split),
            DeviationKind::Optimistic => self.optimistic(&split)?,
        };
        #[cfg(debug_assertions)]
        if let Some(Err(e)) = found.as_ref().map(|d| d.verify(self.game, self.outcome)) {
            panic!("returned deviation fails verification: {e}\n{}", found.as_ref().map(|d| d.narrate()).unwrap_or_default());
        }
        Ok(found)
    }

    /// New coalitions funded by `supplies`: sources, their coalitions
    /// (appended after `offset` existing rows), or `None` if no mix of new
    /// coalitions makes the deviation profitable.
    fn fund(
        &self,
        split: &Split,
        supplies: &[Rational],
        fixed: &[Source],
        offset: usize,
        engine: Option<&RuleEngine<'_>>,
    ) -> Option<(Vec<Source>, Vec<PartialCoalition>)> {
        match self.game {
            Game::Ttg(t) => {
                let profile = self.profile.as_ref().expect("TTG profile");
                let (value, copies) = pooled_structure(t, profile, supplies);
                let mut sources = fixed.to_vec();
                if value.is_positive() {
                    let rows = copies
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (offset + k, t.best_task_value(&c.total()) / &value))
                        .collect();
                    sources.push(Source { amount: value, eligible: positive_mask(supplies), rows });
                }
                hall_holds(&sources, &self.p, split.jmask).then_some((sources, copies))
            }
            Game::Rules(_) => {
                let engine = engine.expect("rule engine");
                let (chosen, units) = engine.search(supplies, fixed, &self.p, split.jmask)?;
                let g = Rational::from_integer(engine.grid.clone());
                let mut sources = fixed.to_vec();
                let mut coalitions = Vec::new();
                for (k, (&pi, u)) in chosen.iter().zip(units).enumerate() {
                    let pair = &engine.pairs[pi];
                    let coalition = PartialCoalition::new(u.iter().map(|x| x / &g).collect());
                    // The realized coalition may meet a richer rule than the one it was
                    // built for; it is worth the best one, never less.
                    let amount = self.game.value(&coalition).expect("dimension");
                    debug_assert!(amount >= pair.value);
                    sources.push(Source { amount, eligible: pair.support, rows: vec![(offset + k, rational::int(1))] });
                    coalitions.push(coalition);
                }
                Some((sources, coalitions))
            }
        }
    }

    fn new_value_bound(&self, supplies: &[Rational], engine: Option<&RuleEngine<'_>>) -> Rational {
        match self.game {
            Game::Ttg(_) => {
                let profile = self.profile.as_ref().expect("TTG profile");
                profile.value_of_weight(&rational::sum(supplies))
            }
            Game::Rules(_) => engine.expect("rule engine").value_bound(supplies),
        }
    }

    fn engine(&self, split: &Split) -> Option<RuleEngine<'_>> {
        match self.game {
            Game::Rules(rg) => Some(RuleEngine::new(rg, split.jmask, self.res)),
            Game::Ttg(_) => None,
        }
    }

    fn conservative(&self, split: &Split) -> Option<DeviationResult> {
        let engine = self.engine(split);
        let supplies: Vec<Rational> = (0..self.game.n())
            .map(|j| if split.jmask >> j & 1 == 1 { self.game.weights()[j].clone() } else { Rational::zero() })
            .collect();
        if self.new_value_bound(&supplies, engine.as_ref()) <= self.target(split) {
            return None;
        }
        let (sources, coalitions) = self.fund(split, &supplies, &[], 0, engine.as_ref())?;
        let mut changes: Vec<CoalitionChange> = split
            .pure
            .iter()
            .map(|&i| CoalitionChange { original: i, fate: Fate::Dissolved, post: None })
            .chain(split.mixed.iter().map(|&i| CoalitionChange { original: i, fate: Fate::Abandoned, post: None }))
            .collect();
        changes.sort_by_key(|c| c.original);
        Some(assemble(
            DeviationKind::Conservative,
            &split.deviators,
            &self.p,
            changes,
            coalitions,
            Vec::new(),
            &sources,
        ))
    }

    fn refined(&self, split: &Split) -> Option<DeviationResult> {
        let engine = self.engine(split);
        let cs = &self.outcome.structure;
        let m = split.mixed.len();
        let target = self.target(split);
        for keep in 0..(1u64 << m) {
            let mut supplies = split.base_free.clone();
            let mut fixed = Vec::new();
            let mut fixed_rows = Vec::new();
            let mut post = Vec::new();
            let mut changes = Vec::new();
            for (k, &i) in split.mixed.iter().enumerate() {
                if keep >> k & 1 == 1 {
                    let row = post.len();
                    post.push(cs.coalitions[i].clone());
                    let mut vals = vec![Rational::zero(); self.game.n()];
                    for &j in &split.deviators {
                        let x = &self.outcome.payoffs[i][j];
                        vals[j] = x.clone();
                        if !x.is_zero() {
                            fixed.push(Source { amount: x.clone(), eligible: 1 << j, rows: Vec::new() });
                        }
                    }
                    fixed_rows.push((row, vals));
                    changes.push(CoalitionChange { original: i, fate: Fate::Kept, post: Some(row) });
                } else {
                    for &j in &split.deviators {
                        supplies[j] += cs.coalitions[i].get(j);
                    }
                    changes.push(CoalitionChange { original: i, fate: Fate::Abandoned, post: None });
                }
            }
            let fixed_total = fixed.iter().fold(Rational::zero(), |a, s: &Source| a + &s.amount);
            if &fixed_total + self.new_value_bound(&supplies, engine.as_ref()) <= target {
                continue;
            }
            let Some((sources, coalitions)) = self.fund(split, &supplies, &fixed, post.len(), engine.as_ref())
            else {
                continue;
            };
            post.extend(coalitions);
            changes.extend(split.pure.iter().map(|&i| CoalitionChange { original: i, fate: Fate::Dissolved, post: None }));
            changes.sort_by_key(|c| c.original);
            return Some(assemble(
                DeviationKind::Refined,
                &split.deviators,
                &self.p,
                changes,
                post,
                fixed_rows,
                &sources,
            ));
        }
        None
    }

    /// Candidate new contributions of deviator `j` to mixed coalition `i`:
    /// grid points up to `w_j`, plus the current contribution.
    fn levels(&self, i: usize, j: usize) -> Vec<Rational> {
        let w = &self.game.weights()[j];
        let d = BigInt::from(self.res.grid);
        let top = (w * Rational::from_integer(d.clone())).floor().to_integer();
        let mut out = Vec::new();
        let mut k = BigInt::zero();
        while k <= top {
            out.push(Rational::new(k.clone(), d.clone()));
            k += 1;
        }
        let cur = self.outcome.structure.coalitions[i].get(j).clone();
        if !out.contains(&cur) {
            out.push(cur);
            out.sort();
        }
        out
    }

    fn optimistic(&self, split: &Split) -> Result<Option<DeviationResult>> {
        let n = self.game.n();
        let cs = &self.outcome.structure;
        let engine = self.engine(split);
        let target = self.target(split);
        let outside_paid: Vec<Rational> = split
            .mixed
            .iter()
            .map(|&i| rational::sum((0..n).filter(|&k| split.jmask >> k & 1 == 0).map(|k| &self.outcome.payoffs[i][k])))
            .collect();

        // Optimistic bound: each mixed coalition at its best, plus J's full weight in new coalitions.
        let full: Vec<Rational> = (0..n)
            .map(|j| if split.jmask >> j & 1 == 1 { self.game.weights()[j].clone() } else { Rational::zero() })
            .collect();
        let top_left: Vec<Rational> = split
            .mixed
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let mut top = cs.coalitions[i].contributions().to_vec();
                for &j in &split.deviators {
                    top[j] = self.game.weights()[j].clone();
                }
                let v = self.game.value(&PartialCoalition::new(top)).expect("dimension");
                let left = v - &outside_paid[k];
                if left.is_positive() { left } else { Rational::zero() }
            })
            .collect();

        // Every (mixed coalition, deviator) slot with its candidate levels,
        // coalition-major so each coalition settles before the next starts.
        let slots: Vec<(usize, usize, Vec<Rational>)> = split
            .mixed
            .iter()
            .enumerate()
            .flat_map(|(k, &i)| split.deviators.iter().map(move |&j| (j, k, i)))
            .map(|(j, k, i)| (j, k, self.levels(i, j)))
            .collect();
        let mut pooled = match self.game {
            Game::Ttg(t) => Some(PooledBound::new(t, self.profile.as_ref().expect("TTG profile"), split, &slots, &outside_paid, cs)),
            Game::Rules(_) => None,
        };
        let bound = match pooled.as_mut() {
            Some(pb) => pb.suffix(0, rational::sum(&full)),
            None => self.new_value_bound(&full, engine.as_ref()) + rational::sum(&top_left),
        };
        if bound <= target {
            return Ok(None);
        }

        let mut walker = ProfileWalk {
            search: self,
            split,
            engine: engine.as_ref(),
            slots: &slots,
            outside_paid: &outside_paid,
            top_left: &top_left,
            settled: vec![Rational::zero(); split.mixed.len()],
            target: &target,
            chosen: vec![vec![Rational::zero(); n]; split.mixed.len()],
            remaining: full.clone(),
            bound_cache: HashMap::new(),
            pooled,
            visits: 0,
        };
        let found = walker.walk(0);
        if walker.visits > O_CONFIG_LIMIT {
            return Err(Error::TooLarge(format!(
                "more than {O_CONFIG_LIMIT} search nodes for deviators {}",
                subsets::format_one_based(&split.deviators)
            )));
        }
        Ok(found)
    }
}

/// Upper bound for TTG o-deviations that pools J's weight: coalition k
/// yields f_k(t) for a J-total t, and whatever J keeps back earns the
/// knapsack value of the pool. Per-agent limits are relaxed, so the bound
/// never undercuts a realizable deviation.
struct PooledBound<'p> {
    profile: &'p TtgProfile,
    /// Candidate J-totals per mixed coalition with the share each leaves J.
    options: Vec<Vec<(Rational, Rational)>>,
    memo: HashMap<(usize, Rational), Rational>,
}

impl<'p> PooledBound<'p> {
    fn new(
        ttg: &Ttg,
        profile: &'p TtgProfile,
        split: &Split,
        slots: &[(usize, usize, Vec<Rational>)],
        outside_paid: &[Rational],
        cs: &CoalitionStructure,
    ) -> Self {
        let jtotal = rational::sum(split.deviators.iter().map(|&j| &ttg.weights()[j]));
        let options = split
            .mixed
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let rest = rational::sum(
                    (0..ttg.n()).filter(|&x| split.jmask >> x & 1 == 0).map(|x| cs.coalitions[i].get(x)),
                );
                let mut totals = vec![Rational::zero()];
                for (_, _, levels) in slots.iter().filter(|s| s.1 == k) {
                    let mut next: Vec<Rational> =
                        totals.iter().flat_map(|t| levels.iter().map(move |l| t + l)).filter(|t| t <= &jtotal).collect();
                    next.sort();
                    next.dedup();
                    totals = next;
                }
                totals
                    .into_iter()
                    .map(|t| {
                        let share = if t.is_zero() {
                            Rational::zero()
                        } else {
                            let left = ttg.best_task_value(&(&rest + &t)) - &outside_paid[k];
                            if left.is_positive() { left } else { Rational::zero() }
                        };
                        (t, share)
                    })
                    .collect()
            })
            .collect();
        PooledBound { profile, options, memo: HashMap::new() }
    }

    /// Most J can earn from coalitions `k..` and new coalitions with `pool`.
    fn suffix(&mut self, k: usize, pool: Rational) -> Rational {
        if k == self.options.len() {
            return self.profile.value_of_weight(&pool);
        }
        if let Some(v) = self.memo.get(&(k, pool.clone())) {
            return v.clone();
        }
        let mut best = Rational::zero();
        for idx in 0..self.options[k].len() {
            let (t, share) = self.options[k][idx].clone();
            if t > pool {
                break;
            }
            let v = share + self.suffix(k + 1, &pool - &t);
            if v > best {
                best = v;
            }
        }
        self.memo.insert((k, pool), best.clone());
        best
    }
}

struct ProfileWalk<'s, 'a> {
    search: &'s DeviationSearch<'a>,
    split: &'s Split,
    engine: Option<&'s RuleEngine<'s>>,
    slots: &'s [(usize, usize, Vec<Rational>)],
    outside_paid: &'s [Rational],
    /// Best share each mixed coalition could leave J, with J at full weight.
    top_left: &'s [Rational],
    /// Exact share left to J by each coalition whose slots are all chosen.
    settled: Vec<Rational>,
    target: &'s Rational,
    /// New deviator contributions, per mixed coalition.
    chosen: Vec<Vec<Rational>>,
    remaining: Vec<Rational>,
    bound_cache: HashMap<Vec<Rational>, Rational>,
    pooled: Option<PooledBound<'s>>,
    visits: u128,
}

impl ProfileWalk<'_, '_> {
    fn walk(&mut self, idx: usize) -> Option<DeviationResult> {
        self.visits += 1;
        if self.visits > O_CONFIG_LIMIT {
            return None;
        }
        let done = idx == self.slots.len();
        if idx > 0 && (done || self.slots[idx].1 != self.slots[idx - 1].1) && !self.promising(self.slots[idx - 1].1) {
            return None;
        }
        if done {
            return self.evaluate();
        }
        let (j, k, levels) = &self.slots[idx];
        for l in levels {
            if l > &self.remaining[*j] {
                break;
            }
            self.remaining[*j] -= l;
            self.chosen[*k][*j] = l.clone();
            let found = self.walk(idx + 1);
            self.remaining[*j] += l;
            if found.is_some() {
                return found;
            }
        }
        self.chosen[*k][*j] = Rational::zero();
        None
    }

    /// Settles mixed coalition `k` and bounds what J can still reach.
    /// Values are monotone in contributions, so the bound never undercuts.
    fn promising(&mut self, k: usize) -> bool {
        let s = self.search;
        let jmask = self.split.jmask;
        let r = &s.outcome.structure.coalitions[self.split.mixed[k]];
        let c: Vec<Rational> = (0..s.game.n())
            .map(|x| if jmask >> x & 1 == 1 { self.chosen[k][x].clone() } else { r.get(x).clone() })
            .collect();
        let coalition = PartialCoalition::new(c);
        self.settled[k] = if coalition.support_mask() & jmask == 0 {
            Rational::zero()
        } else {
            let left = s.game.value(&coalition).expect("dimension") - &self.outside_paid[k];
            if left.is_positive() { left } else { Rational::zero() }
        };
        let future = match self.pooled.as_mut() {
            Some(pb) => pb.suffix(k + 1, rational::sum(&self.remaining)),
            None => self.cached_bound() + rational::sum(&self.top_left[k + 1..]),
        };
        future + rational::sum(&self.settled[..=k]) > *self.target
    }

    fn cached_bound(&mut self) -> Rational {
        if let Some(b) = self.bound_cache.get(&self.remaining) {
            return b.clone();
        }
        let b = self.search.new_value_bound(&self.remaining, self.engine);
        self.bound_cache.insert(self.remaining.clone(), b.clone());
        b
    }

    fn evaluate(&mut self) -> Option<DeviationResult> {
        let s = self.search;
        let n = s.game.n();
        let cs = &s.outcome.structure;
        let jmask = self.split.jmask;
        let mut post = Vec::new();
        let mut changes = Vec::new();
        let mut sources = Vec::new();
        let mut total = Rational::zero();
        for (k, &i) in self.split.mixed.iter().enumerate() {
            let r = &cs.coalitions[i];
            let c: Vec<Rational> = (0..n)
                .map(|x| if jmask >> x & 1 == 1 { self.chosen[k][x].clone() } else { r.get(x).clone() })
                .collect();
            let coalition = PartialCoalition::new(c);
            let stays = coalition.support_mask() & jmask;
            if stays == 0 {
                changes.push(CoalitionChange { original: i, fate: Fate::Abandoned, post: None });
                continue;
            }
            let fate = if &coalition == r { Fate::Kept } else { Fate::Modified };
            let value = s.game.value(&coalition).expect("dimension");
            let left = value - &self.outside_paid[k];
            let row = post.len();
            if left.is_positive() {
                total += &left;
                sources.push(Source { amount: left, eligible: stays, rows: vec![(row, rational::int(1))] });
            }
            post.push(coalition);
            changes.push(CoalitionChange { original: i, fate, post: Some(row) });
        }
        let supplies = self.remaining.clone();
        let bound = self.cached_bound();
        if &total + &bound <= *self.target {
            return None;
        }
        let (sources, coalitions) = s.fund(self.split, &supplies, &sources, post.len(), self.engine)?;
        post.extend(coalitions);
        changes.extend(self.split.pure.iter().map(|&i| CoalitionChange { original: i, fate: Fate::Dissolved, post: None }));
        changes.sort_by_key(|c| c.original);
        Some(assemble(DeviationKind::Optimistic, &self.split.deviators, &s.p, changes, post, Vec::new(), &sources))
    }
}

pub fn find_c_deviation(game: &Game, outcome: &Outcome, deviators: &[usize], res: Resolution) -> Result<Option<DeviationResult>> {
    DeviationSearch::new(game, outcome, res)?.find(DeviationKind::Conservative, deviators)
}

pub fn find_r_deviation(game: &Game, outcome: &Outcome, deviators: &[usize], res: Resolution) -> Result<Option<DeviationResult>> {
    DeviationSearch::new(game, outcome, res)?.find(DeviationKind::Refined, deviators)
}

pub fn find_o_deviation(game: &Game, outcome: &Outcome, deviators: &[usize], res: Resolution) -> Result<Option<DeviationResult>> {
    DeviationSearch::new(game, outcome, res)?.find(DeviationKind::Optimistic, deviators)
}

/// Upper limit on the grid structures [`rule_structures`] will list.
pub const STRUCTURE_LIMIT: usize = 200_000;

/// One coalition of an enumerated rule-game structure.
#[derive(Clone, Debug)]
pub(crate) struct RuleCoalition {
    pub value: Rational,
    pub support: u64,
    pub coalition: PartialCoalition,
}

/// Every grid structure over the agents in `mask` with at most `cap`
/// rule-earning coalitions, the empty structure first.
pub(crate) fn rule_structures(rg: &RuleGame, mask: u64, res: Resolution) -> Result<Vec<Vec<RuleCoalition>>> {
    let engine = RuleEngine::new(rg, mask, res);
    let g = Rational::from_integer(engine.grid.clone());
    let units: Vec<Rational> = (0..rg.n())
        .map(|j| if mask >> j & 1 == 1 { engine.to_units(&rg.weights()[j]) } else { Rational::zero() })
        .collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    fn rec(
        engine: &RuleEngine<'_>,
        units: &[Rational],
        g: &Rational,
        start: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<RuleCoalition>>,
    ) -> Result<()> {
        let Some(coalitions) = engine.realize(units, chosen) else {
            return Ok(());
        };
        if out.len() >= STRUCTURE_LIMIT {
            return Err(Error::TooLarge(format!("more than {STRUCTURE_LIMIT} grid structures")));
        }
        out.push(
            chosen
                .iter()
                .zip(coalitions)
                .map(|(&pi, u)| {
                    let contributions: Vec<Rational> = u.iter().map(|x| x / g).collect();
                    // Worth its best rule, which may beat the one it was built for.
                    RuleCoalition {
                        value: engine.rg.value_of(&contributions),
                        support: engine.pairs[pi].support,
                        coalition: PartialCoalition::new(contributions),
                    }
                })
                .collect(),
        );
        if chosen.len() == engine.cap {
            return Ok(());
        }
        for pi in start..engine.pairs.len() {
            chosen.push(pi);
            rec(engine, units, g, pi, chosen, out)?;
            chosen.pop();
        }
        Ok(())
    }
    rec(&engine, &units, &g, 0, &mut chosen, &mut out)?;
    Ok(out)
}

/// Membership in the c-, r- or o-core at the given resolution: no
/// nonempty J (tried in lexicographic order) has a profitable deviation.
pub fn core_membership(game: &Game, outcome: &Outcome, kind: DeviationKind, res: Resolution) -> Result<CoreVerdict> {
    let n = game.n();
    if n > SUBSET_GUARD {
        return Err(Error::GuardExceeded { n, limit: SUBSET_GUARD });
    }
    let search = DeviationSearch::new(game, outcome, res)?;
    for set in subsets::lexicographic(n) {
        if let Some(d) = search.find(kind, &set)? {
            return Ok(CoreVerdict::unstable(Witness::Deviation(Box::new(d))).at(res));
        }
    }
    Ok(CoreVerdict::stable().at(res))
}
