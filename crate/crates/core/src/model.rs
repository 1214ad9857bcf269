//! Games, partial coalitions, coalition structures and outcomes.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::subsets;
use crate::welfare;

/// A task: coalitions whose pooled weight reaches `threshold` may earn `utility`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskType {
    pub threshold: Rational,
    pub utility: Rational,
}

impl TaskType {
    pub fn new(threshold: Rational, utility: Rational) -> Self {
        TaskType { threshold, utility }
    }
}

/// Threshold task game. Tasks are kept normalized: strictly increasing in
/// both threshold and utility, with dominated and zero-utility tasks removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ttg {
    weights: Vec<Rational>,
    tasks: Vec<TaskType>,
}

impl Ttg {
    pub fn new(weights: Vec<Rational>, tasks: Vec<TaskType>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("a game needs at least one agent".into()));
        }
        check_weights(&weights)?;
        for t in &tasks {
            if t.threshold.is_negative() || t.utility.is_negative() {
                return Err(Error::Invalid("task thresholds and utilities must be >= 0".into()));
            }
            if t.threshold.is_zero() && t.utility.is_positive() {
                return Err(Error::Invalid(
                    "a task with threshold 0 and positive utility gives the empty coalition value"
                        .into(),
                ));
            }
        }
        Ok(Ttg { weights, tasks: normalize_tasks(tasks) })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn tasks(&self) -> &[TaskType] {
        &self.tasks
    }

    pub fn total_weight(&self) -> Rational {
        rational::sum(&self.weights)
    }

    pub fn weight_of(&self, set: &[usize]) -> Rational {
        rational::sum(set.iter().map(|&i| &self.weights[i]))
    }

    /// Best single task utility reachable with `weight` units, or 0.
    pub fn best_task_value(&self, weight: &Rational) -> Rational {
        self.tasks
            .iter()
            .rev()
            .find(|t| &t.threshold <= weight)
            .map(|t| t.utility.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// LCM of the denominators of all weights and thresholds.
    pub fn scale_factor(&self) -> BigInt {
        rational::lcm_of_denominators(
            self.weights.iter().chain(self.tasks.iter().map(|t| &t.threshold)),
        )
    }

    /// The same game with weights and thresholds multiplied by `factor`.
    pub fn scaled_by(&self, factor: &BigInt) -> Ttg {
        let f = Rational::from_integer(factor.clone());
        Ttg {
            weights: self.weights.iter().map(|w| w * &f).collect(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskType::new(&t.threshold * &f, t.utility.clone()))
                .collect(),
        }
    }

    /// The game scaled so that every weight and threshold is an integer.
    pub fn scaled(&self) -> (Ttg, BigInt) {
        let f = self.scale_factor();
        (self.scaled_by(&f), f)
    }

    /// Encodes every task as a rule with a single requirement over all agents.
    pub fn to_rules(&self) -> RuleGame {
        let all: Vec<usize> = (0..self.n()).collect();
        let rules = self
            .tasks
            .iter()
            .map(|t| Rule {
                requirements: vec![Requirement { agents: all.clone(), min: t.threshold.clone() }],
                value: t.utility.clone(),
            })
            .collect();
        RuleGame::new(self.weights.clone(), rules).expect("a valid TTG encodes to a valid rule game")
    }
}

/// Sorts by threshold and keeps only tasks that strictly improve on every
/// cheaper task.
pub fn normalize_tasks(mut tasks: Vec<TaskType>) -> Vec<TaskType> {
    tasks.sort_by(|a, b| a.threshold.cmp(&b.threshold).then(b.utility.cmp(&a.utility)));
    let mut out: Vec<TaskType> = Vec::new();
    for t in tasks {
        let best = out.last().map(|l| l.utility.clone()).unwrap_or_else(Rational::zero);
        if t.utility > best {
            out.push(t);
        }
    }
    out
}

fn check_weights(weights: &[Rational]) -> Result<()> {
    if weights.iter().any(|w| !w.is_positive()) {
        return Err(Error::Invalid("agent weights must be positive".into()));
    }
    if weights.len() > 64 {
        return Err(Error::TooLarge(format!("{} agents (at most 64 supported)", weights.len())));
    }
    Ok(())
}

/// A group of agents that must jointly contribute at least `min` units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub agents: Vec<usize>,
    pub min: Rational,
}

/// A rule is satisfied when all of its requirements are met; it then yields `value`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub requirements: Vec<Requirement>,
    pub value: Rational,
}

impl Rule {
    pub fn satisfied_by(&self, contributions: &[Rational]) -> bool {
        self.requirements.iter().all(|req| {
            rational::sum(req.agents.iter().map(|&j| &contributions[j])) >= req.min
        })
    }

    /// Requirements that actually demand something.
    pub fn binding(&self) -> impl Iterator<Item = &Requirement> {
        self.requirements.iter().filter(|r| r.min.is_positive())
    }

    /// True when no agent appears in two binding requirements.
    pub fn has_disjoint_groups(&self) -> bool {
        let mut seen = 0u64;
        for r in self.binding() {
            let m = subsets::mask_of(&r.agents);
            if seen & m != 0 {
                return false;
            }
            seen |= m;
        }
        true
    }
}

/// Game whose value is the best rule satisfied by a coalition, or 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleGame {
    weights: Vec<Rational>,
    rules: Vec<Rule>,
}

impl RuleGame {
    pub fn new(weights: Vec<Rational>, rules: Vec<Rule>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("a game needs at least one agent".into()));
        }
        check_weights(&weights)?;
        let n = weights.len();
        let mut kept = Vec::new();
        for mut rule in rules {
            if rule.value.is_negative() {
                return Err(Error::Invalid("rule values must be >= 0".into()));
            }
            for req in &mut rule.requirements {
                if req.agents.is_empty() {
                    return Err(Error::Invalid("requirement agent sets must be nonempty".into()));
                }
                if let Some(&bad) = req.agents.iter().find(|&&a| a >= n) {
                    return Err(Error::Invalid(format!("requirement names agent {bad} of {n}")));
                }
                if req.min.is_negative() {
                    return Err(Error::Invalid("requirement minimums must be >= 0".into()));
                }
                req.agents.sort_unstable();
                req.agents.dedup();
            }
            if rule.value.is_zero() {
                continue;
            }
            if rule.binding().next().is_none() {
                return Err(Error::Invalid(
                    "a rule with positive value must require some contribution".into(),
                ));
            }
            kept.push(rule);
        }
        Ok(RuleGame { weights, rules: kept })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn value_of(&self, contributions: &[Rational]) -> Rational {
        self.rules
            .iter()
            .filter(|r| r.satisfied_by(contributions))
            .map(|r| r.value.clone())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Either game representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Game {
    Ttg(Ttg),
    Rules(RuleGame),
}

impl From<Ttg> for Game {
    fn from(t: Ttg) -> Self {
        Game::Ttg(t)
    }
}

impl From<RuleGame> for Game {
    fn from(r: RuleGame) -> Self {
        Game::Rules(r)
    }
}

impl Game {
    pub fn n(&self) -> usize {
        self.weights().len()
    }

    pub fn weights(&self) -> &[Rational] {
        match self {
            Game::Ttg(t) => t.weights(),
            Game::Rules(r) => r.weights(),
        }
    }

    pub fn as_ttg(&self) -> Option<&Ttg> {
        match self {
            Game::Ttg(t) => Some(t),
            Game::Rules(_) => None,
        }
    }

    /// v(r): TTG value of pooled weight, or best satisfied rule.
    pub fn value(&self, coalition: &PartialCoalition) -> Result<Rational> {
        if coalition.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: coalition.len() });
        }
        if coalition.is_zero() {
            return Ok(Rational::zero());
        }
        Ok(match self {
            Game::Ttg(t) => t.best_task_value(&coalition.total()),
            Game::Rules(r) => r.value_of(coalition.contributions()),
        })
    }

    /// Value of the crisp coalition in which every member of `set` contributes everything.
    pub fn crisp_value(&self, set: &[usize]) -> Rational {
        let r = PartialCoalition::crisp(self.weights(), set);
        self.value(&r).expect("crisp coalition has the game's dimension")
    }
}

/// Contributions in absolute weight units, one entry per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialCoalition {
    contributions: Vec<Rational>,
}

impl PartialCoalition {
    pub fn new(contributions: Vec<Rational>) -> Self {
        PartialCoalition { contributions }
    }

    pub fn zero(n: usize) -> Self {
        PartialCoalition { contributions: vec![Rational::zero(); n] }
    }

    /// Every member of `set` contributes its full weight.
    pub fn crisp(weights: &[Rational], set: &[usize]) -> Self {
        let mut c = vec![Rational::zero(); weights.len()];
        for &i in set {
            c[i] = weights[i].clone();
        }
        PartialCoalition { contributions: c }
    }

    pub fn len(&self) -> usize {
        self.contributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contributions.is_empty()
    }

    pub fn contributions(&self) -> &[Rational] {
        &self.contributions
    }

    pub fn get(&self, j: usize) -> &Rational {
        &self.contributions[j]
    }

    pub fn is_zero(&self) -> bool {
        self.contributions.iter().all(Zero::is_zero)
    }

    pub fn total(&self) -> Rational {
        rational::sum(&self.contributions)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.contributions[j].is_zero()).collect()
    }

    pub fn support_mask(&self) -> u64 {
        subsets::mask_of(&self.support())
    }

    /// Fractions r_j = units_j / w_j.
    pub fn fractions(&self, weights: &[Rational]) -> Vec<Rational> {
        self.contributions.iter().zip(weights).map(|(c, w)| c / w).collect()
    }
}

/// Finite list of partial coalitions; duplicates are allowed.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CoalitionStructure {
    pub coalitions: Vec<PartialCoalition>,
    pub cap: Option<usize>,
}

impl CoalitionStructure {
    pub fn new(coalitions: Vec<PartialCoalition>) -> Self {
        CoalitionStructure { coalitions, cap: None }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    /// Drops all-zero coalitions.
    pub fn normalized(&self) -> CoalitionStructure {
        CoalitionStructure {
            coalitions: self.coalitions.iter().filter(|c| !c.is_zero()).cloned().collect(),
            cap: self.cap,
        }
    }

    /// Total units each agent commits across the structure.
    pub fn committed(&self, n: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for c in &self.coalitions {
            for (o, x) in out.iter_mut().zip(c.contributions()) {
                *o += x;
            }
        }
        out
    }
}

/// Coalition structure together with one payoff row per coalition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub structure: CoalitionStructure,
    pub payoffs: Vec<Vec<Rational>>,
}

impl Outcome {
    pub fn new(structure: CoalitionStructure, payoffs: Vec<Vec<Rational>>) -> Self {
        Outcome { structure, payoffs }
    }

    /// The empty outcome: no coalitions, no payoffs.
    pub fn empty() -> Self {
        Outcome { structure: CoalitionStructure::default(), payoffs: Vec::new() }
    }

    /// Drops all-zero coalitions together with their payoff rows.
    pub fn normalized(&self) -> Outcome {
        let mut structure = CoalitionStructure { coalitions: Vec::new(), cap: self.structure.cap };
        let mut payoffs = Vec::new();
        for (c, row) in self.structure.coalitions.iter().zip(&self.payoffs) {
            if !c.is_zero() {
                structure.coalitions.push(c.clone());
                payoffs.push(row.clone());
            }
        }
        Outcome { structure, payoffs }
    }
}

/// Per-agent total payoff.
pub type PayoffVector = Vec<Rational>;

/// Whether per-coalition payoff entries may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PayoffPolicy {
    #[default]
    Nonnegative,
    AllowNegative,
}

/// Search resolution: at most `cap` newly formed coalitions, contributions
/// in multiples of `1/grid` weight units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub cap: usize,
    pub grid: u64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { cap: 3, grid: 1 }
    }
}

impl Resolution {
    pub fn new(cap: usize, grid: u64) -> Result<Self> {
        if cap == 0 || grid == 0 {
            return Err(Error::Invalid("cap and grid must both be at least 1".into()));
        }
        Ok(Resolution { cap, grid })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cap {} grid 1/{}", self.cap, self.grid)
    }
}

/// A violated structural or payoff constraint. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Dimension { coalition: usize, found: usize, expected: usize },
    NegativeContribution { coalition: usize, agent: usize },
    OverCapacity { agent: usize, excess: Rational },
    CapExceeded { len: usize, cap: usize },
    PayoffShape { rows: usize, coalitions: usize },
    RowSum { coalition: usize, expected: Rational, found: Rational },
    NonContributorPaid { coalition: usize, agent: usize },
    IndividualRationality { agent: usize, payoff: Rational, required: Rational },
    NegativePayoff { coalition: usize, agent: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { coalition, found, expected } => {
                write!(f, "coalition {} has {found} entries, expected {expected}", coalition + 1)
            }
            Violation::NegativeContribution { coalition, agent } => {
                write!(f, "agent {} contributes a negative amount to coalition {}", agent + 1, coalition + 1)
            }
            Violation::OverCapacity { agent, excess } => {
                write!(f, "agent {} over capacity by {excess}", agent + 1)
            }
            Violation::CapExceeded { len, cap } => {
                write!(f, "structure has {len} coalitions, cap is {cap}")
            }
            Violation::PayoffShape { rows, coalitions } => {
                write!(f, "{rows} payoff rows for {coalitions} coalitions")
            }
            Violation::RowSum { coalition, expected, found } => write!(
                f,
                "payoffs of coalition {} sum to {found}, its value is {expected}",
                coalition + 1
            ),
            Violation::NonContributorPaid { coalition, agent } => write!(
                f,
                "agent {} is paid by coalition {} without contributing",
                agent + 1,
                coalition + 1
            ),
            Violation::IndividualRationality { agent, payoff, required } => write!(
                f,
                "agent {} receives {payoff}, below its stand-alone value {required}",
                agent + 1
            ),
            Violation::NegativePayoff { coalition, agent } => write!(
                f,
                "agent {} receives a negative payoff from coalition {}",
                agent + 1,
                coalition + 1
            ),
        }
    }
}

/// Sum of coalition values.
pub fn structure_value(game: &Game, cs: &CoalitionStructure) -> Result<Rational> {
    let mut total = Rational::zero();
    for c in &cs.coalitions {
        total += game.value(c)?;
    }
    Ok(total)
}

/// Per-agent column sums of the payoff matrix.
pub fn payoff_vector(outcome: &Outcome) -> Result<PayoffVector> {
    let n = outcome
        .structure
        .coalitions
        .first()
        .map(PartialCoalition::len)
        .or_else(|| outcome.payoffs.first().map(Vec::len))
        .unwrap_or(0);
    payoff_vector_n(outcome, n)
}

/// Column sums for an `n`-agent game (handles the empty outcome).
pub fn payoff_vector_n(outcome: &Outcome, n: usize) -> Result<PayoffVector> {
    let mut p = vec![Rational::zero(); n];
    for row in &outcome.payoffs {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        for (acc, x) in p.iter_mut().zip(row) {
            *acc += x;
        }
    }
    Ok(p)
}

/// Reports every capacity, sign, dimension and cap violation as
/// [`Error::Validation`].
pub fn validate_structure(game: &Game, cs: &CoalitionStructure) -> Result<()> {
    let n = game.n();
    let mut out = Vec::new();
    let mut used = vec![Rational::zero(); n];
    for (i, c) in cs.coalitions.iter().enumerate() {
        if c.len() != n {
            out.push(Violation::Dimension { coalition: i, found: c.len(), expected: n });
            continue;
        }
        for (j, x) in c.contributions().iter().enumerate() {
            if x.is_negative() {
                out.push(Violation::NegativeContribution { coalition: i, agent: j });
            }
            used[j] += x;
        }
    }
    for (j, (u, w)) in used.iter().zip(game.weights()).enumerate() {
        if u > w {
            out.push(Violation::OverCapacity { agent: j, excess: u - w });
        }
    }
    if let Some(cap) = cs.cap {
        if cs.len() > cap {
            out.push(Violation::CapExceeded { len: cs.len(), cap });
        }
    }
    report(out)
}

fn report(violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}

/// Checks the structure, row sums, the support rule, individual
/// rationality against v*({j}), and the sign policy. Violations are
/// reported as [`Error::Validation`].
pub fn validate_outcome(
    game: &Game,
    outcome: &Outcome,
    policy: PayoffPolicy,
    res: Resolution,
) -> Result<()> {
    let oracle = welfare::Vstar::new(game, res)?;
    validate_outcome_with(&oracle, outcome, policy)
}

/// [`validate_outcome`] with a prebuilt v* oracle.
pub fn validate_outcome_with(
    oracle: &welfare::Vstar<'_>,
    outcome: &Outcome,
    policy: PayoffPolicy,
) -> Result<()> {
    let game = oracle.game();
    validate_structure(game, &outcome.structure)?;
    let n = game.n();
    let cs = &outcome.structure;
    let mut out = Vec::new();
    if outcome.payoffs.len() != cs.len() {
        return report(vec![Violation::PayoffShape {
            rows: outcome.payoffs.len(),
            coalitions: cs.len(),
        }]);
    }
    for (i, (c, row)) in cs.coalitions.iter().zip(&outcome.payoffs).enumerate() {
        if row.len() != n {
            out.push(Violation::Dimension { coalition: i, found: row.len(), expected: n });
            continue;
        }
        let value = game.value(c).expect("dimension checked");
        let found = rational::sum(row);
        if found != value {
            out.push(Violation::RowSum { coalition: i, expected: value, found });
        }
        for j in 0..n {
            if c.get(j).is_zero() && !row[j].is_zero() {
                out.push(Violation::NonContributorPaid { coalition: i, agent: j });
            }
            if policy == PayoffPolicy::Nonnegative && row[j].is_negative() {
                out.push(Violation::NegativePayoff { coalition: i, agent: j });
            }
        }
    }
    if out.is_empty() {
        let p = payoff_vector_n(outcome, n)?;
        for (j, pj) in p.iter().enumerate() {
            let required = oracle.value(&[j]);
            if pj < &required {
                out.push(Violation::IndividualRationality { agent: j, payoff: pj.clone(), required });
            }
        }
    }
    report(out)
}

/// v^no(S): value of the crisp coalition of `set`.
pub fn to_nonoverlapping(game: &Game, set: &[usize]) -> Rational {
    game.crisp_value(set)
}

/// Integral view of a TTG after LCM scaling, with sizes checked to fit tables.
#[derive(Clone, Debug)]
pub struct IntegralTtg {
    pub weights: Vec<usize>,
    pub thresholds: Vec<usize>,
    pub utilities: Vec<Rational>,
    pub factor: BigInt,
}

/// Largest table width (in scaled weight units) the DP routines accept.
pub const MAX_TABLE_UNITS: usize = 4_000_000;

impl IntegralTtg {
    pub fn new(ttg: &Ttg) -> Result<Self> {
        let (scaled, factor) = ttg.scaled();
        let weights = scaled
            .weights()
            .iter()
            .map(|w| rational::to_usize(w).ok_or_else(|| Error::TooLarge(format!("weight {w}"))))
            .collect::<Result<Vec<_>>>()?;
        let total: usize = weights.iter().sum();
        if total > MAX_TABLE_UNITS {
            return Err(Error::TooLarge(format!(
                "total weight {total} scaled units exceeds {MAX_TABLE_UNITS}"
            )));
        }
        let thresholds = scaled
            .tasks()
            .iter()
            .map(|t| {
                rational::to_usize(&t.threshold)
                    .ok_or_else(|| Error::TooLarge(format!("threshold {}", t.threshold)))
            })
            .collect::<Result<Vec<_>>>()?;
        let utilities = scaled.tasks().iter().map(|t| t.utility.clone()).collect();
        Ok(IntegralTtg { weights, thresholds, utilities, factor })
    }

    pub fn total(&self) -> usize {
        self.weights.iter().sum()
    }

    /// Scaled units of a rational amount of original weight, rounded down.
    pub fn units_floor(&self, amount: &Rational) -> usize {
        let scaled = amount * Rational::from_integer(self.factor.clone());
        rational::floor_usize(&scaled).unwrap_or(0)
    }

    pub fn factor_rational(&self) -> Rational {
        Rational::from_integer(self.factor.clone())
    }

    pub fn is_unit_scale(&self) -> bool {
        self.factor.is_one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn two_tasks() -> Game {
        Ttg::new(
            vec![int(4), int(6)],
            vec![TaskType::new(int(5), int(15)), TaskType::new(int(4), int(10))],
        )
        .unwrap()
        .into()
    }

    fn units(rows: &[&[i64]]) -> CoalitionStructure {
        CoalitionStructure::new(
            rows.iter()
                .map(|r| PartialCoalition::new(r.iter().map(|&x| int(x)).collect()))
                .collect(),
        )
    }

    fn matrix(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
        rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()
    }

    #[test]
    fn value_examples() {
        let g = two_tasks();
        assert_eq!(g.value(&PartialCoalition::new(vec![int(1), int(4)])).unwrap(), int(15));
        assert_eq!(g.value(&PartialCoalition::zero(2)).unwrap(), int(0));
        assert_eq!(g.value(&PartialCoalition::new(vec![int(0), int(3)])).unwrap(), int(0));
        assert!(g.value(&PartialCoalition::zero(3)).is_err());
    }

    #[test]
    fn structure_value_examples() {
        let three_twos: Game =
            Ttg::new(vec![int(2); 3], vec![TaskType::new(int(3), int(1))]).unwrap().into();
        assert_eq!(structure_value(&three_twos, &units(&[&[2, 1, 0], &[0, 1, 2]])).unwrap(), int(2));
        assert_eq!(structure_value(&three_twos, &CoalitionStructure::default()).unwrap(), int(0));
        assert_eq!(structure_value(&two_tasks(), &units(&[&[1, 4], &[3, 2]])).unwrap(), int(30));
    }

    #[test]
    fn payoff_vector_examples() {
        let cs = units(&[&[1, 4], &[3, 2]]);
        let x = Outcome::new(cs.clone(), matrix(&[&[7, 8], &[9, 6]]));
        assert_eq!(payoff_vector(&x).unwrap(), vec![int(16), int(14)]);
        let y = Outcome::new(cs, matrix(&[&[7, 8], &[8, 7]]));
        assert_eq!(payoff_vector(&y).unwrap(), vec![int(15), int(15)]);
        assert_eq!(payoff_vector_n(&Outcome::empty(), 3).unwrap(), vec![int(0); 3]);
    }

    #[test]
    fn structure_validation() {
        let g = two_tasks();
        assert!(validate_structure(&g, &units(&[&[1, 4], &[3, 2]])).is_ok());
        let err = validate_structure(&g, &units(&[&[3, 0], &[3, 0]])).unwrap_err();
        assert_eq!(err, Error::Validation(vec![Violation::OverCapacity { agent: 0, excess: int(2) }]));
        let capped = units(&[&[1, 1], &[1, 1], &[1, 1]]).with_cap(2);
        assert_eq!(
            validate_structure(&g, &capped).unwrap_err(),
            Error::Validation(vec![Violation::CapExceeded { len: 3, cap: 2 }])
        );
    }

    #[test]
    fn outcome_validation() {
        let g = two_tasks();
        let res = Resolution::default();
        let pol = PayoffPolicy::Nonnegative;
        let y = Outcome::new(units(&[&[1, 4], &[3, 2]]), matrix(&[&[7, 8], &[8, 7]]));
        assert!(validate_outcome(&g, &y, pol, res).is_ok());

        let paid_outsider = Outcome::new(units(&[&[0, 5], &[3, 0]]), matrix(&[&[1, 14], &[0, 0]]));
        let Error::Validation(err) = validate_outcome(&g, &paid_outsider, pol, res).unwrap_err()
        else {
            panic!("expected violations")
        };
        assert!(err.contains(&Violation::NonContributorPaid { coalition: 0, agent: 0 }));

        let bad_row = Outcome::new(units(&[&[1, 4], &[3, 2]]), matrix(&[&[8, 8], &[8, 7]]));
        let err = validate_outcome(&g, &bad_row, pol, res).unwrap_err();
        assert_eq!(
            err,
            Error::Validation(vec![Violation::RowSum {
                coalition: 0,
                expected: int(15),
                found: int(16)
            }])
        );

        let negative = Outcome::new(units(&[&[1, 4], &[3, 2]]), matrix(&[&[-1, 16], &[16, -1]]));
        assert!(validate_outcome(&g, &negative, pol, res).is_err());
        assert!(validate_outcome(&g, &negative, PayoffPolicy::AllowNegative, res).is_ok());

        // Agent 2 alone can earn 15 (6 units >= threshold 5).
        let poor = Outcome::new(units(&[&[1, 4], &[3, 2]]), matrix(&[&[8, 7], &[8, 7]]));
        let err = validate_outcome(&g, &poor, pol, res).unwrap_err();
        assert_eq!(
            err,
            Error::Validation(vec![Violation::IndividualRationality {
                agent: 1,
                payoff: int(14),
                required: int(15)
            }])
        );
    }

    #[test]
    fn nonoverlapping_values() {
        let three_twos: Game =
            Ttg::new(vec![int(2); 3], vec![TaskType::new(int(3), int(1))]).unwrap().into();
        assert_eq!(to_nonoverlapping(&three_twos, &[0, 1]), int(1));
        assert_eq!(to_nonoverlapping(&three_twos, &[]), int(0));
        assert_eq!(to_nonoverlapping(&three_twos, &[0]), int(0));
    }

    #[test]
    fn normalization_drops_dominated_tasks() {
        let t = Ttg::new(
            vec![int(1)],
            vec![
                TaskType::new(int(5), int(3)),
                TaskType::new(int(2), int(4)),
                TaskType::new(int(2), int(1)),
                TaskType::new(int(7), int(0)),
                TaskType::new(int(9), int(6)),
            ],
        )
        .unwrap();
        assert_eq!(
            t.tasks(),
            &[TaskType::new(int(2), int(4)), TaskType::new(int(9), int(6))]
        );
    }

    #[test]
    fn invalid_games_rejected() {
        assert!(Ttg::new(vec![int(0)], vec![]).is_err());
        assert!(Ttg::new(vec![int(1)], vec![TaskType::new(int(0), int(1))]).is_err());
        let free_rule = Rule {
            requirements: vec![Requirement { agents: vec![0], min: int(0) }],
            value: int(3),
        };
        assert!(RuleGame::new(vec![int(1)], vec![free_rule]).is_err());
        let out_of_range = Rule {
            requirements: vec![Requirement { agents: vec![2], min: int(1) }],
            value: int(3),
        };
        assert!(RuleGame::new(vec![int(1)], vec![out_of_range]).is_err());
    }

    #[test]
    fn scaling_makes_integral() {
        let t = Ttg::new(
            vec![ratio(1, 2), ratio(2, 3)],
            vec![TaskType::new(ratio(5, 6), int(1))],
        )
        .unwrap();
        let iv = IntegralTtg::new(&t).unwrap();
        assert_eq!(iv.factor, BigInt::from(6));
        assert_eq!(iv.weights, vec![3, 4]);
        assert_eq!(iv.thresholds, vec![5]);
    }
}
