//! Social welfare: knapsack profiles, overlapping and non-overlapping
//! optima, and the superadditive cover v*.

use std::cell::RefCell;
use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::flow::{self, Demand};
use crate::model::{
    CoalitionStructure, Game, IntegralTtg, PartialCoalition, Resolution, RuleGame, Ttg,
};
use crate::rational::{self, Rational};
use crate::subsets;

/// Default agent-count limit for routines that enumerate subsets.
pub const SUBSET_GUARD: usize = 16;

/// Best utility of every integral weight budget, with backpointers.
#[derive(Clone, Debug)]
pub struct KnapsackProfile {
    values: Vec<Rational>,
    choice: Vec<Option<usize>>,
    thresholds: Vec<usize>,
}

/// Copies of each task, indexed like the game's normalized task list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskMultiset {
    pub counts: Vec<usize>,
}

impl TaskMultiset {
    pub fn copies(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl KnapsackProfile {
    /// Largest budget covered.
    pub fn max_weight(&self) -> usize {
        self.values.len() - 1
    }

    /// U[w], saturating at the largest budget covered.
    pub fn value(&self, w: usize) -> &Rational {
        &self.values[w.min(self.max_weight())]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// Optimal multiset for budget `w`: walks the backpointers, taking the
    /// smallest task index that attains U at each step.
    pub fn multiset(&self, w: usize) -> TaskMultiset {
        let mut counts = vec![0; self.thresholds.len()];
        let mut w = w.min(self.max_weight());
        while w > 0 && self.values[w].is_positive() {
            match self.choice[w] {
                Some(j) => {
                    counts[j] += 1;
                    w -= self.thresholds[j];
                }
                None => w -= 1,
            }
        }
        TaskMultiset { counts }
    }
}

/// Unbounded-knapsack table U[0..=W] over the game's tasks. Thresholds must
/// already be integral (see [`Ttg::scaled`]); weights are not consulted.
pub fn knapsack_profile(ttg: &Ttg, max_weight: usize) -> Result<KnapsackProfile> {
    let mut thresholds = Vec::with_capacity(ttg.tasks().len());
    for t in ttg.tasks() {
        if !t.threshold.is_integer() {
            return Err(Error::NonIntegral(format!("threshold {}", t.threshold)));
        }
        // Thresholds beyond the budget never fit; clamp so they are skipped.
        thresholds.push(rational::to_usize(&t.threshold).unwrap_or(usize::MAX));
    }
    let utilities: Vec<&Rational> = ttg.tasks().iter().map(|t| &t.utility).collect();
    let mut values = Vec::with_capacity(max_weight + 1);
    let mut choice = Vec::with_capacity(max_weight + 1);
    values.push(Rational::zero());
    choice.push(None);
    for w in 1..=max_weight {
        let mut best = values[w - 1].clone();
        let mut pick = None;
        for (j, &t) in thresholds.iter().enumerate() {
            if t > w {
                break;
            }
            let cand = utilities[j] + &values[w - t];
            if cand > best {
                best = cand;
            }
        }
        if best.is_positive() {
            pick = thresholds
                .iter()
                .enumerate()
                .take_while(|(_, &t)| t <= w)
                .find(|(j, &t)| utilities[*j] + &values[w - t] == best)
                .map(|(j, _)| j);
        }
        values.push(best);
        choice.push(pick);
    }
    Ok(KnapsackProfile { values, choice, thresholds })
}

/// A TTG scaled to integral units together with its full knapsack profile.
#[derive(Clone, Debug)]
pub struct TtgProfile {
    pub integral: IntegralTtg,
    pub knapsack: KnapsackProfile,
    pub scaled: Ttg,
}

impl TtgProfile {
    pub fn new(ttg: &Ttg) -> Result<Self> {
        let integral = IntegralTtg::new(ttg)?;
        let scaled = ttg.scaled_by(&integral.factor);
        let knapsack = knapsack_profile(&scaled, integral.total())?;
        Ok(TtgProfile { integral, knapsack, scaled })
    }

    pub fn total_units(&self) -> usize {
        self.integral.total()
    }

    /// U at a budget given in scaled units.
    pub fn value_units(&self, units: usize) -> &Rational {
        self.knapsack.value(units)
    }

    /// Best pooled value of an amount of original weight.
    pub fn value_of_weight(&self, weight: &Rational) -> Rational {
        self.knapsack.value(self.integral.units_floor(weight)).clone()
    }

    pub fn units_of_set(&self, set: &[usize]) -> usize {
        set.iter().map(|&i| self.integral.weights[i]).sum()
    }

    pub fn units_of_mask(&self, mask: u64) -> usize {
        subsets::members(mask).iter().map(|&i| self.integral.weights[i]).sum()
    }

    pub fn value_of_set(&self, set: &[usize]) -> &Rational {
        self.value_units(self.units_of_set(set))
    }
}

/// Welfare-optimal overlapping solution.
#[derive(Clone, Debug)]
pub struct OverlappingOptimum {
    pub value: Rational,
    pub multiset: TaskMultiset,
    pub structure: CoalitionStructure,
}

/// U[w(N)] with the canonical proportional structure.
pub fn max_welfare_overlapping(ttg: &Ttg) -> Result<OverlappingOptimum> {
    let profile = TtgProfile::new(ttg)?;
    let all: Vec<usize> = (0..ttg.n()).collect();
    Ok(canonical_optimum(ttg, &profile, &all))
}

/// Optimal multiset for the pooled weight of `set`, realized by one
/// coalition per task copy in which each member contributes in proportion
/// to its weight. Weight left over after the copies goes into one extra
/// zero-value coalition so that members commit everything.
pub fn canonical_optimum(ttg: &Ttg, profile: &TtgProfile, set: &[usize]) -> OverlappingOptimum {
    let units = profile.units_of_set(set);
    let value = profile.value_units(units).clone();
    let multiset = profile.knapsack.multiset(units);
    let structure = proportional_structure(ttg, set, &multiset);
    OverlappingOptimum { value, multiset, structure }
}

/// One proportional coalition per copy in `multiset`, plus the leftover.
pub fn proportional_structure(ttg: &Ttg, set: &[usize], multiset: &TaskMultiset) -> CoalitionStructure {
    let n = ttg.n();
    let total = ttg.weight_of(set);
    let mut coalitions = Vec::new();
    if total.is_zero() {
        return CoalitionStructure::new(coalitions);
    }
    let share = |amount: &Rational| {
        let mut c = vec![Rational::zero(); n];
        for &i in set {
            c[i] = &ttg.weights()[i] * amount / &total;
        }
        PartialCoalition::new(c)
    };
    let mut used = Rational::zero();
    for (j, &k) in multiset.counts.iter().enumerate() {
        let t = &ttg.tasks()[j].threshold;
        for _ in 0..k {
            coalitions.push(share(t));
            used += t;
        }
    }
    let leftover = &total - &used;
    if leftover.is_positive() {
        coalitions.push(share(&leftover));
    }
    CoalitionStructure::new(coalitions)
}

/// Best partition of N into crisp coalitions.
pub fn max_welfare_nonoverlapping(ttg: &Ttg) -> Result<(Rational, Vec<Vec<usize>>)> {
    max_welfare_nonoverlapping_with(ttg, SUBSET_GUARD)
}

/// Subset DP over partitions. Among optimal blocks containing the lowest
/// remaining agent, the lexicographically smallest is chosen.
pub fn max_welfare_nonoverlapping_with(ttg: &Ttg, limit: usize) -> Result<(Rational, Vec<Vec<usize>>)> {
    let n = ttg.n();
    if n > limit {
        return Err(Error::GuardExceeded { n, limit });
    }
    let full: u64 = (1u64 << n) - 1;
    let size = 1usize << n;
    let mut weight = vec![Rational::zero(); size];
    let mut crisp = vec![Rational::zero(); size];
    for m in 1..size {
        let low = m.trailing_zeros() as usize;
        weight[m] = &weight[m & (m - 1)] + &ttg.weights()[low];
        crisp[m] = ttg.best_task_value(&weight[m]);
    }
    let mut best = vec![Rational::zero(); size];
    let mut block = vec![0u64; size];
    for s in 1..size as u64 {
        let low = s & s.wrapping_neg();
        let rest = s & !low;
        let mut top: Option<(Rational, u64)> = None;
        // Blocks are `low | sub` for every submask `sub` of the rest, including 0.
        let mut sub = rest;
        loop {
            let t = low | sub;
            let cand = &crisp[t as usize] + &best[(s & !t) as usize];
            let take = match &top {
                None => true,
                Some((v, b)) => cand > *v || (cand == *v && subsets::lex_less(t, *b)),
            };
            if take {
                top = Some((cand, t));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        let (v, t) = top.expect("at least the singleton block");
        best[s as usize] = v;
        block[s as usize] = t;
    }
    let mut partition = Vec::new();
    let mut s = full;
    while s != 0 {
        let t = block[s as usize];
        partition.push(subsets::members(t));
        s &= !t;
    }
    Ok((best[full as usize].clone(), partition))
}

/// v*(S) for one set. Build a [`Vstar`] when querying many sets.
pub fn vstar(game: &Game, set: &[usize], res: Resolution) -> Result<Rational> {
    if set.is_empty() {
        return Ok(Rational::zero());
    }
    Ok(Vstar::new(game, res)?.value(set))
}

/// Cached v* oracle.
///
/// For TTGs the value is exact: members pool their weight, so v*(S) is the
/// knapsack value of w(S). For rule-based games it is the best total over
/// at most `res.cap` rule copies that members can satisfy simultaneously,
/// found by branch-and-bound with a max-flow feasibility test.
pub struct Vstar<'a> {
    game: &'a Game,
    res: Resolution,
    profile: Option<TtgProfile>,
    cache: RefCell<HashMap<u64, Rational>>,
}

impl<'a> Vstar<'a> {
    pub fn new(game: &'a Game, res: Resolution) -> Result<Self> {
        let profile = match game {
            Game::Ttg(t) => Some(TtgProfile::new(t)?),
            Game::Rules(_) => None,
        };
        Ok(Vstar { game, res, profile, cache: RefCell::new(HashMap::new()) })
    }

    pub fn game(&self) -> &Game {
        self.game
    }

    pub fn resolution(&self) -> Resolution {
        self.res
    }

    pub fn profile(&self) -> Option<&TtgProfile> {
        self.profile.as_ref()
    }

    pub fn value(&self, set: &[usize]) -> Rational {
        self.value_mask(subsets::mask_of(set))
    }

    pub fn value_mask(&self, mask: u64) -> Rational {
        if mask == 0 {
            return Rational::zero();
        }
        if let Some(p) = &self.profile {
            return p.value_units(p.units_of_mask(mask)).clone();
        }
        if let Some(v) = self.cache.borrow().get(&mask) {
            return v.clone();
        }
        let Game::Rules(rg) = self.game else { unreachable!("profile exists for TTGs") };
        let v = best_rule_multiset(rg, &crisp_supplies(rg.weights(), mask), self.res.cap).0;
        self.cache.borrow_mut().insert(mask, v.clone());
        v
    }

    /// v*(S) together with a structure over S attaining it.
    pub fn witness(&self, set: &[usize]) -> (Rational, CoalitionStructure) {
        match self.game {
            Game::Ttg(t) => {
                let opt = canonical_optimum(t, self.profile.as_ref().expect("TTG profile"), set);
                (opt.value, opt.structure)
            }
            Game::Rules(rg) => {
                let supplies = crisp_supplies(rg.weights(), subsets::mask_of(set));
                let (v, copies) = best_rule_multiset(rg, &supplies, self.res.cap);
                let cs = realize_rules(rg, &supplies, &copies)
                    .expect("the chosen multiset passed the feasibility test");
                (v, cs)
            }
        }
    }
}

fn crisp_supplies(weights: &[Rational], mask: u64) -> Vec<Rational> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| if mask >> i & 1 == 1 { w.clone() } else { Rational::zero() })
        .collect()
}

fn rule_demands(rg: &RuleGame, supplies: &[Rational], copies: &[usize]) -> Vec<Demand> {
    let avail = supplies
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_positive())
        .fold(0u64, |m, (i, _)| m | 1 << i);
    copies
        .iter()
        .flat_map(|&r| rg.rules()[r].binding())
        .map(|req| Demand { mask: subsets::mask_of(&req.agents) & avail, amount: req.min.clone() })
        .collect()
}

/// Whether one coalition per entry of `copies` can satisfy its rule using
/// the given per-agent supplies. Exact when each rule's requirement groups
/// are disjoint; otherwise a contribution is charged to one group only, so
/// a `true` answer is always sound.
pub fn rules_feasible(rg: &RuleGame, supplies: &[Rational], copies: &[usize]) -> bool {
    flow::demands_feasible(supplies, &rule_demands(rg, supplies, copies))
}

/// Builds one coalition per entry of `copies` from a feasible assignment.
pub fn realize_rules(
    rg: &RuleGame,
    supplies: &[Rational],
    copies: &[usize],
) -> Option<CoalitionStructure> {
    let demands = rule_demands(rg, supplies, copies);
    let amounts = flow::assign_demands(supplies, &demands)?;
    let n = rg.n();
    let mut coalitions = Vec::new();
    let mut k = 0;
    for &r in copies {
        let mut c = vec![Rational::zero(); n];
        for _ in rg.rules()[r].binding() {
            for (i, row) in amounts.iter().enumerate() {
                c[i] += &row[k];
            }
            k += 1;
        }
        coalitions.push(PartialCoalition::new(c));
    }
    Some(CoalitionStructure::new(coalitions))
}

/// Branch-and-bound over nondecreasing multisets of rule indices (rules
/// visited in order of decreasing value), at most `cap` copies. Returns the
/// best total and the multiset attaining it.
pub fn best_rule_multiset(rg: &RuleGame, supplies: &[Rational], cap: usize) -> (Rational, Vec<usize>) {
    let mut order: Vec<usize> = (0..rg.rules().len()).collect();
    order.sort_by(|&a, &b| rg.rules()[b].value.cmp(&rg.rules()[a].value).then(a.cmp(&b)));
    let mut search = RuleSearch {
        rg,
        supplies,
        order,
        cap,
        best: Rational::zero(),
        best_copies: Vec::new(),
        current: Vec::new(),
    };
    search.descend(0, Rational::zero());
    (search.best, search.best_copies)
}

struct RuleSearch<'r> {
    rg: &'r RuleGame,
    supplies: &'r [Rational],
    order: Vec<usize>,
    cap: usize,
    best: Rational,
    best_copies: Vec<usize>,
    current: Vec<usize>,
}

impl RuleSearch<'_> {
    fn descend(&mut self, start: usize, value: Rational) {
        if value > self.best {
            self.best = value.clone();
            self.best_copies = self.current.clone();
        }
        if self.current.len() == self.cap {
            return;
        }
        let remaining = rational::from_usize(self.cap - self.current.len());
        for pos in start..self.order.len() {
            let r = self.order[pos];
            let v = &self.rg.rules()[r].value;
            if &value + &remaining * v <= self.best {
                break;
            }
            self.current.push(r);
            if rules_feasible(self.rg, self.supplies, &self.current) {
                self.descend(pos, &value + v);
            }
            self.current.pop();
        }
    }
}
