//! c-core and non-overlapping core decisions, LP stabilization, and
//! balanced-collection certificates.
//!
//! An outcome is in the c-core exactly when every nonempty S receives at
//! least v*(S). For TTGs this reduces to comparing, for each total weight
//! w, the cheapest coalition of weight w against the knapsack value U[w].

use std::fmt;

use num_traits::{Signed, Zero};

use crate::deviations::DeviationResult;
use crate::error::{Error, Result};
use crate::lp::{self, Constraint, LinearProgram, LpResult, Relation, VarKind};
use crate::model::{
    self, CoalitionStructure, Game, IntegralTtg, Outcome, PartialCoalition, PayoffPolicy,
    Resolution, Ttg,
};
use crate::rational::{self, Rational};
use crate::subsets;
use crate::welfare::{self, TtgProfile, Vstar, SUBSET_GUARD};

/// Largest `agents x weight` table the min-payoff DP builds.
pub const MAX_TABLE_CELLS: usize = 20_000_000;

/// Evidence attached to a verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// `set` can secure `value` on its own but is paid only `payoff`.
    Blocking { set: Vec<usize>, value: Rational, payoff: Rational },
    /// An outcome in the core.
    Stabilizer(Outcome),
    /// Dual proof that no imputation for a fixed structure is stable.
    Certificate(BalancedCollection),
    /// Dual proof that no c-core payoff vector exists.
    Empty(EmptinessCertificate),
    /// A profitable deviation.
    Deviation(Box<DeviationResult>),
}

/// Result of a core-style check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreVerdict {
    pub stable: bool,
    pub witness: Option<Witness>,
    /// Search resolution, for verdicts that depend on one.
    pub resolution: Option<Resolution>,
}

impl CoreVerdict {
    pub fn stable() -> Self {
        CoreVerdict { stable: true, witness: None, resolution: None }
    }

    pub fn stable_with(w: Witness) -> Self {
        CoreVerdict { stable: true, witness: Some(w), resolution: None }
    }

    pub fn unstable(w: Witness) -> Self {
        CoreVerdict { stable: false, witness: Some(w), resolution: None }
    }

    pub fn at(mut self, res: Resolution) -> Self {
        self.resolution = Some(res);
        self
    }

    pub fn blocking_set(&self) -> Option<&[usize]> {
        match &self.witness {
            Some(Witness::Blocking { set, .. }) => Some(set),
            _ => None,
        }
    }

    pub fn stabilizer(&self) -> Option<&Outcome> {
        match &self.witness {
            Some(Witness::Stabilizer(o)) => Some(o),
            _ => None,
        }
    }
}

impl Witness {
    fn blocking(set: Vec<usize>, value: Rational, payoff: Rational) -> Self {
        Witness::Blocking { set, value, payoff }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Blocking { set, value, payoff } => write!(
                f,
                "coalition {} can secure {value} but is paid {payoff} (shortfall {})",
                subsets::format_one_based(set),
                value - payoff
            ),
            Witness::Stabilizer(o) => write!(f, "stable outcome with {} coalitions", o.structure.len()),
            Witness::Certificate(b) => write!(f, "balanced collection over {} sets", b.lambda.len()),
            Witness::Empty(e) => write!(f, "infeasibility certificate over {} sets", e.sets.len()),
            Witness::Deviation(d) => write!(f, "profitable deviation by {}", subsets::format_one_based(&d.deviators)),
        }
    }
}

/// P[i][w]: least total payoff of a subset of the first `i` agents whose
/// weights sum to exactly `w`, or `None` when no such subset exists.
#[derive(Clone, Debug)]
pub struct MinPayoffTable {
    weights: Vec<usize>,
    table: Vec<Vec<Option<Rational>>>,
}

impl MinPayoffTable {
    pub fn new(weights: &[usize], payoffs: &[Rational]) -> Result<Self> {
        if weights.len() != payoffs.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), found: payoffs.len() });
        }
        let total: usize = weights.iter().sum();
        if (weights.len() + 1).saturating_mul(total + 1) > MAX_TABLE_CELLS {
            return Err(Error::TooLarge(format!("payoff table {} x {}", weights.len() + 1, total + 1)));
        }
        let mut table = Vec::with_capacity(weights.len() + 1);
        let mut first = vec![None; total + 1];
        first[0] = Some(Rational::zero());
        table.push(first);
        for (i, (&wi, pi)) in weights.iter().zip(payoffs).enumerate() {
            let prev = &table[i];
            let mut row = prev.clone();
            for w in wi..=total {
                if let Some(base) = &prev[w - wi] {
                    let cand = pi + base;
                    if row[w].as_ref().map_or(true, |cur| cand < *cur) {
                        row[w] = Some(cand);
                    }
                }
            }
            table.push(row);
        }
        Ok(MinPayoffTable { weights: weights.to_vec(), table })
    }

    pub fn total_weight(&self) -> usize {
        self.table[0].len() - 1
    }

    pub fn get(&self, i: usize, w: usize) -> Option<&Rational> {
        self.table[i][w].as_ref()
    }

    /// Least payoff over all subsets of weight `w`.
    pub fn min_payoff(&self, w: usize) -> Option<&Rational> {
        self.get(self.weights.len(), w)
    }

    /// A subset attaining [`Self::min_payoff`]; excludes an agent whenever
    /// that keeps the minimum.
    pub fn subset(&self, w: usize) -> Option<Vec<usize>> {
        self.min_payoff(w)?;
        let mut out = Vec::new();
        let mut w = w;
        for i in (1..=self.weights.len()).rev() {
            if self.table[i][w] == self.table[i - 1][w] {
                continue;
            }
            out.push(i - 1);
            w -= self.weights[i - 1];
        }
        debug_assert_eq!(w, 0);
        out.reverse();
        Some(out)
    }

    /// First weight (ascending) where the cheapest coalition is paid less
    /// than `target(w)`.
    pub fn first_shortfall<F>(&self, mut target: F) -> Option<(usize, Rational, Rational)>
    where
        F: FnMut(usize) -> Rational,
    {
        (1..=self.total_weight()).find_map(|w| {
            let paid = self.min_payoff(w)?;
            let need = target(w);
            (paid < &need).then(|| (w, need, paid.clone()))
        })
    }
}

/// Shortfall search for TTG payoffs: the first w with a coalition of weight
/// w paid below U[w], as a blocking witness.
fn ttg_shortfall(profile: &TtgProfile, p: &[Rational]) -> Result<Option<Witness>> {
    let table = MinPayoffTable::new(&profile.integral.weights, p)?;
    Ok(table
        .first_shortfall(|w| profile.value_units(w).clone())
        .map(|(w, need, paid)| Witness::blocking(table.subset(w).expect("weight is attained"), need, paid)))
}

/// c-core membership of a TTG outcome via the min-payoff table.
pub fn ttg_membership(ttg: &Ttg, outcome: &Outcome) -> Result<CoreVerdict> {
    let p = model::payoff_vector_n(outcome, ttg.n())?;
    ttg_payoff_membership(&TtgProfile::new(ttg)?, &p)
}

/// The same check for a bare payoff vector.
pub fn ttg_payoff_membership(profile: &TtgProfile, p: &[Rational]) -> Result<CoreVerdict> {
    Ok(match ttg_shortfall(profile, p)? {
        Some(w) => CoreVerdict::unstable(w),
        None => CoreVerdict::stable(),
    })
}

/// c-core membership by comparing p(S) with v*(S) for every nonempty S,
/// in lexicographic order of S.
pub fn check_theorem1(game: &Game, outcome: &Outcome, res: Resolution) -> Result<CoreVerdict> {
    let oracle = Vstar::new(game, res)?;
    check_theorem1_with(&oracle, outcome)
}

pub fn check_theorem1_with(oracle: &Vstar<'_>, outcome: &Outcome) -> Result<CoreVerdict> {
    let n = oracle.game().n();
    if n > SUBSET_GUARD {
        return Err(Error::GuardExceeded { n, limit: SUBSET_GUARD });
    }
    let p = model::payoff_vector_n(outcome, n)?;
    for set in subsets::lexicographic(n) {
        let paid = rational::sum(set.iter().map(|&j| &p[j]));
        let value = oracle.value(&set);
        if paid < value {
            return Ok(CoreVerdict::unstable(Witness::blocking(set, value, paid)).at(oracle.resolution()));
        }
    }
    Ok(CoreVerdict::stable().at(oracle.resolution()))
}

/// Farkas multipliers proving that no payoff vector p >= 0 with
/// p(N) = v*(N) meets every listed constraint p(S) >= v*(S).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmptinessCertificate {
    /// Sets whose constraints take part; the first one is N (efficiency).
    pub sets: Vec<Vec<usize>>,
    pub values: Vec<Rational>,
    pub multipliers: Vec<Rational>,
}

impl EmptinessCertificate {
    /// Checks the Farkas conditions exactly: multipliers of the covering
    /// constraints are nonnegative, every agent's column is nonpositive,
    /// and the weighted values are positive.
    pub fn verify(&self, n: usize) -> bool {
        if self.sets.len() != self.multipliers.len() || self.sets.len() != self.values.len() {
            return false;
        }
        if self.multipliers.iter().skip(1).any(Signed::is_negative) {
            return false;
        }
        let columns_ok = (0..n).all(|j| {
            let col = self
                .sets
                .iter()
                .zip(&self.multipliers)
                .filter(|(s, _)| s.contains(&j))
                .fold(Rational::zero(), |a, (_, y)| a + y);
            !col.is_positive()
        });
        let gain = self.values.iter().zip(&self.multipliers).fold(Rational::zero(), |a, (v, y)| a + v * y);
        columns_ok && gain.is_positive()
    }
}

/// Searches for a c-core outcome of a TTG by constraint generation over
/// payoff vectors on the canonical welfare-optimal structure.
pub fn stabilize(ttg: &Ttg) -> Result<CoreVerdict> {
    let profile = TtgProfile::new(ttg)?;
    let n = ttg.n();
    let all: Vec<usize> = (0..n).collect();
    let opt = welfare::canonical_optimum(ttg, &profile, &all);
    if opt.value.is_zero() {
        return Ok(CoreVerdict::stable_with(Witness::Stabilizer(Outcome::empty())));
    }
    let mut base = LinearProgram::new();
    for i in 0..n {
        base.add_variable(format!("p{}", i + 1), VarKind::NonNegative);
    }
    base.add_sparse(
        &all.iter().map(|&i| (i, Rational::from_integer(1.into()))).collect::<Vec<_>>(),
        Relation::Eq,
        opt.value.clone(),
    );
    let sep = lp::solve_with_separation(base, |p| {
        let table = MinPayoffTable::new(&profile.integral.weights, p).ok()?;
        let (w, need, _) = table.first_shortfall(|w| profile.value_units(w).clone())?;
        let set = table.subset(w)?;
        let mut coeffs = vec![Rational::zero(); n];
        for &j in &set {
            coeffs[j] = rational::int(1);
        }
        Some(Constraint::new(coeffs, Relation::Ge, need))
    })?;
    match sep.result {
        LpResult::Feasible { assignment: p, .. } => {
            let g: Game = ttg.clone().into();
            let total = &opt.value;
            let mut payoffs = Vec::with_capacity(opt.structure.len());
            for c in &opt.structure.coalitions {
                let v = g.value(c)?;
                payoffs.push(p.iter().map(|pi| pi * &v / total).collect());
            }
            let outcome = Outcome::new(opt.structure, payoffs);
            Ok(CoreVerdict::stable_with(Witness::Stabilizer(outcome)))
        }
        LpResult::Infeasible { certificate } => {
            let sets: Vec<Vec<usize>> = sep
                .program
                .constraints()
                .iter()
                .map(|c| (0..n).filter(|&j| !c.coeffs[j].is_zero()).collect())
                .collect();
            let values = sep.program.constraints().iter().map(|c| c.rhs.clone()).collect();
            Ok(CoreVerdict::unstable(Witness::Empty(EmptinessCertificate {
                sets,
                values,
                multipliers: certificate,
            })))
        }
        LpResult::Unbounded { .. } => unreachable!("no objective is set"),
    }
}

/// Weights over agent sets and coalitions meeting, for each coalition i and
/// each agent j it uses, `sum over S containing j of lambda_S + mu_i (+ nu_ij) = 1`.
///
/// `nu` is empty when payoffs may be negative. Under the nonnegative policy
/// it holds slack weights `nu_ij >= 0` for the sign constraints x_ij >= 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedCollection {
    pub lambda: Vec<(Vec<usize>, Rational)>,
    pub mu: Vec<Rational>,
    pub nu: Vec<(usize, usize, Rational)>,
}

impl BalancedCollection {
    /// Exact check of the per-(coalition, agent) equalities and signs.
    pub fn satisfies_equalities(&self, cs: &CoalitionStructure) -> bool {
        if self.mu.len() != cs.len() || self.lambda.iter().any(|(_, l)| l.is_negative()) {
            return false;
        }
        if self.nu.iter().any(|(_, _, v)| v.is_negative()) {
            return false;
        }
        for (i, c) in cs.coalitions.iter().enumerate() {
            for j in c.support() {
                let mut total = self.mu[i].clone();
                for (s, l) in &self.lambda {
                    if s.contains(&j) {
                        total += l;
                    }
                }
                for (ci, cj, v) in &self.nu {
                    if *ci == i && *cj == j {
                        total += v;
                    }
                }
                if total != rational::int(1) {
                    return false;
                }
            }
        }
        true
    }

    /// sum of lambda_S v*(S) plus sum of mu_i v(r^i).
    pub fn weighted_value(&self, oracle: &Vstar<'_>, cs: &CoalitionStructure) -> Result<Rational> {
        let mut total = Rational::zero();
        for (s, l) in &self.lambda {
            total += l * oracle.value(s);
        }
        for (m, c) in self.mu.iter().zip(&cs.coalitions) {
            total += m * oracle.game().value(c)?;
        }
        Ok(total)
    }

    /// True when the collection proves the structure cannot be stabilized:
    /// its weighted value strictly exceeds v*(N).
    pub fn violates_balancedness(&self, oracle: &Vstar<'_>, cs: &CoalitionStructure) -> Result<bool> {
        let all: Vec<usize> = (0..oracle.game().n()).collect();
        Ok(self.weighted_value(oracle, cs)? > oracle.value(&all))
    }
}

/// Looks for payoffs on the fixed structure `cs` that put the outcome in
/// the c-core. On failure the LP dual is returned as a balanced collection.
pub fn stabilize_structure(
    game: &Game,
    cs: &CoalitionStructure,
    policy: PayoffPolicy,
    res: Resolution,
) -> Result<CoreVerdict> {
    let oracle = Vstar::new(game, res)?;
    stabilize_structure_with(&oracle, cs, policy)
}

pub fn stabilize_structure_with(
    oracle: &Vstar<'_>,
    cs: &CoalitionStructure,
    policy: PayoffPolicy,
) -> Result<CoreVerdict> {
    let game = oracle.game();
    let n = game.n();
    if n > SUBSET_GUARD {
        return Err(Error::GuardExceeded { n, limit: SUBSET_GUARD });
    }
    model::validate_structure(game, cs)?;
    let kind = match policy {
        PayoffPolicy::Nonnegative => VarKind::NonNegative,
        PayoffPolicy::AllowNegative => VarKind::Free,
    };
    let mut base = LinearProgram::new();
    // (coalition, agent) of each variable.
    let mut vars: Vec<(usize, usize)> = Vec::new();
    for (i, c) in cs.coalitions.iter().enumerate() {
        for j in c.support() {
            base.add_variable(format!("x{}_{}", i + 1, j + 1), kind);
            vars.push((i, j));
        }
    }
    let mut values = Vec::with_capacity(cs.len());
    for (i, c) in cs.coalitions.iter().enumerate() {
        let v = game.value(c)?;
        let terms: Vec<(usize, Rational)> = vars
            .iter()
            .enumerate()
            .filter(|(_, (ci, _))| *ci == i)
            .map(|(k, _)| (k, rational::int(1)))
            .collect();
        base.add_sparse(&terms, Relation::Eq, v.clone());
        values.push(v);
    }
    let lex = subsets::lexicographic(n);
    let values_of_sets: Vec<Rational> = lex.iter().map(|s| oracle.value(s)).collect();
    let covering = |set: &[usize]| -> Constraint {
        let coeffs = vars
            .iter()
            .map(|(_, j)| if set.contains(j) { rational::int(1) } else { Rational::zero() })
            .collect();
        Constraint::new(coeffs, Relation::Ge, oracle.value(set))
    };
    // Sets in the order their rows are added. Agents outside every
    // coalition have no variables, so rows alone cannot recover the set.
    let mut added: Vec<&[usize]> = Vec::new();
    let sep = lp::solve_with_separation(base, |x| {
        let mut p = vec![Rational::zero(); n];
        for (k, (_, j)) in vars.iter().enumerate() {
            p[*j] += &x[k];
        }
        let (s, _) = lex
            .iter()
            .zip(&values_of_sets)
            .find(|(s, v)| rational::sum(s.iter().map(|&j| &p[j])) < **v)?;
        added.push(s);
        Some(covering(s))
    })?;
    match sep.result {
        LpResult::Feasible { assignment, .. } => {
            let mut payoffs = vec![vec![Rational::zero(); n]; cs.len()];
            for (k, (i, j)) in vars.iter().enumerate() {
                payoffs[*i][*j] = assignment[k].clone();
            }
            let outcome = Outcome::new(cs.clone(), payoffs);
            Ok(CoreVerdict::stable_with(Witness::Stabilizer(outcome)).at(oracle.resolution()))
        }
        LpResult::Infeasible { certificate } => {
            let m = cs.len();
            let mu: Vec<Rational> = certificate[..m].to_vec();
            let mut lambda: Vec<(Vec<usize>, Rational)> = Vec::new();
            for (set, y) in added.iter().zip(&certificate[m..]) {
                if !y.is_zero() {
                    lambda.push((set.to_vec(), y.clone()));
                }
            }
            // Unit weight on N turns the homogeneous dual into a collection
            // with the required row sums of one.
            let all: Vec<usize> = (0..n).collect();
            match lambda.iter_mut().find(|(s, _)| *s == all) {
                Some((_, l)) => *l += rational::int(1),
                None => lambda.push((all, rational::int(1))),
            }
            let mut nu = Vec::new();
            if policy == PayoffPolicy::Nonnegative {
                for &(i, j) in &vars {
                    let col = lambda
                        .iter()
                        .filter(|(s, _)| s.contains(&j))
                        .fold(mu[i].clone(), |a, (_, l)| a + l);
                    let slack = rational::int(1) - col;
                    if !slack.is_zero() {
                        nu.push((i, j, slack));
                    }
                }
            }
            let collection = BalancedCollection { lambda, mu, nu };
            debug_assert!(collection.satisfies_equalities(cs));
            Ok(CoreVerdict::unstable(Witness::Certificate(collection)).at(oracle.resolution()))
        }
        LpResult::Unbounded { .. } => unreachable!("no objective is set"),
    }
}

fn check_partition(n: usize, partition: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; n];
    for block in partition {
        if block.is_empty() {
            return Err(Error::Invalid("partition blocks must be nonempty".into()));
        }
        for &j in block {
            if j >= n || seen[j] {
                return Err(Error::Invalid("blocks must partition the agents".into()));
            }
            seen[j] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Invalid("blocks must cover every agent".into()));
    }
    Ok(())
}

fn best_task_units(scaled: &Ttg, w: usize) -> Rational {
    scaled.best_task_value(&rational::from_usize(w))
}

/// Core check for a partition of crisp coalitions: every coalition must be
/// paid at least the best single task its weight reaches. Payoffs must be
/// efficient on every block.
pub fn nonoverlapping_core_check(ttg: &Ttg, partition: &[Vec<usize>], p: &[Rational]) -> Result<CoreVerdict> {
    let n = ttg.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.len() });
    }
    check_partition(n, partition)?;
    for block in partition {
        let value = ttg.best_task_value(&ttg.weight_of(block));
        let paid = rational::sum(block.iter().map(|&j| &p[j]));
        if paid != value {
            return Err(Error::Inefficient(format!(
                "block {} is worth {value} but is paid {paid}",
                subsets::format_one_based(block)
            )));
        }
    }
    let integral = IntegralTtg::new(ttg)?;
    let scaled = ttg.scaled_by(&integral.factor);
    let table = MinPayoffTable::new(&integral.weights, p)?;
    Ok(match table.first_shortfall(|w| best_task_units(&scaled, w)) {
        Some((w, need, paid)) => {
            CoreVerdict::unstable(Witness::blocking(table.subset(w).expect("attained"), need, paid))
        }
        None => CoreVerdict::stable(),
    })
}

/// Looks for a payoff vector that is efficient on every block of
/// `partition` and leaves no crisp coalition blocking.
pub fn stabilize_partition(ttg: &Ttg, partition: &[Vec<usize>]) -> Result<CoreVerdict> {
    let n = ttg.n();
    check_partition(n, partition)?;
    let integral = IntegralTtg::new(ttg)?;
    let scaled = ttg.scaled_by(&integral.factor);
    let mut base = LinearProgram::new();
    for i in 0..n {
        base.add_variable(format!("p{}", i + 1), VarKind::NonNegative);
    }
    for block in partition {
        let terms: Vec<(usize, Rational)> = block.iter().map(|&j| (j, rational::int(1))).collect();
        base.add_sparse(&terms, Relation::Eq, ttg.best_task_value(&ttg.weight_of(block)));
    }
    let sep = lp::solve_with_separation(base, |p| {
        let table = MinPayoffTable::new(&integral.weights, p).ok()?;
        let (w, need, _) = table.first_shortfall(|w| best_task_units(&scaled, w))?;
        let mut coeffs = vec![Rational::zero(); n];
        for j in table.subset(w)? {
            coeffs[j] = rational::int(1);
        }
        Some(Constraint::new(coeffs, Relation::Ge, need))
    })?;
    Ok(match sep.result {
        LpResult::Feasible { assignment, .. } => {
            let mut coalitions = Vec::new();
            let mut payoffs = Vec::new();
            for block in partition {
                coalitions.push(PartialCoalition::crisp(ttg.weights(), block));
                let mut row = vec![Rational::zero(); n];
                for &j in block {
                    row[j] = assignment[j].clone();
                }
                payoffs.push(row);
            }
            let outcome = Outcome::new(CoalitionStructure::new(coalitions), payoffs);
            CoreVerdict::stable_with(Witness::Stabilizer(outcome))
        }
        LpResult::Infeasible { certificate } => {
            let sets = sep
                .program
                .constraints()
                .iter()
                .map(|c| (0..n).filter(|&j| !c.coeffs[j].is_zero()).collect())
                .collect();
            let values = sep.program.constraints().iter().map(|c| c.rhs.clone()).collect();
            CoreVerdict::unstable(Witness::Empty(EmptinessCertificate { sets, values, multipliers: certificate }))
        }
        LpResult::Unbounded { .. } => unreachable!("no objective is set"),
    })
}
