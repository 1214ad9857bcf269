//! Regression corpus of small worked instances with known verdicts, and a
//! deterministic runner that reports one PASS/FAIL line per record.

use std::fmt;

use crate::convexity;
use crate::deviations::{self, DeviationKind};
use crate::error::Result;
use crate::fuzzy;
use crate::model::{
    CoalitionStructure, Game, Outcome, PartialCoalition, Requirement, Resolution, Rule, RuleGame, TaskType, Ttg,
};
use crate::rational::{self, int, ratio, Rational};
use crate::stability;
use crate::subsets;
use crate::welfare;

/// What a record checks. `ExampleRecord::expected` is the anticipated
/// boolean outcome: stable, found, holds, or equal.
#[derive(Clone, Debug)]
pub enum Check {
    /// Maximum overlapping welfare equals the value.
    OverlappingWelfare(Rational),
    /// Maximum welfare over partitions equals the value.
    NonoverlappingWelfare(Rational),
    /// Exact TTG c-core membership of the record's outcome.
    TtgCore,
    /// Deviation-search core membership of the record's outcome.
    Core(DeviationKind, Resolution),
    /// A profitable deviation by `deviators` exists; when `total` is set,
    /// the deviators' new payoffs must sum to it.
    Deviation { kind: DeviationKind, deviators: Vec<usize>, res: Resolution, total: Option<Rational> },
    /// The c-core is nonempty.
    CCoreNonempty,
    /// The partition with payoffs `p` is in the core of the crisp game.
    Partition { partition: Vec<Vec<usize>>, p: Vec<Rational> },
    /// Some partition admits a core payoff vector in the crisp game.
    SomePartitionStabilizable,
    /// `p` lies in the Aubin core of the fuzzy game.
    Aubin(Vec<Rational>),
    /// `p` lies in the f-core of the fuzzy game.
    FCore(Vec<Rational>),
    /// Convexity falsification finds no violation.
    NoConvexityViolation { res: Resolution, budget: usize },
}

#[derive(Clone, Debug)]
pub struct ExampleRecord {
    pub id: String,
    pub game: Game,
    pub outcome: Option<Outcome>,
    pub check: Check,
    pub expected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordResult {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleReport {
    pub results: Vec<RecordResult>,
}

impl ExampleReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect()
    }
}

impl fmt::Display for ExampleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.detail)?;
        }
        let passed = self.results.iter().filter(|r| r.passed).count();
        writeln!(f, "{passed}/{} records passed", self.results.len())
    }
}

fn ttg(weights: &[i64], tasks: &[(i64, i64)]) -> Ttg {
    Ttg::new(
        weights.iter().map(|&w| int(w)).collect(),
        tasks.iter().map(|&(t, u)| TaskType::new(int(t), int(u))).collect(),
    )
    .expect("corpus game is valid")
}

fn outcome(structure: Vec<Vec<Rational>>, payoffs: Vec<Vec<Rational>>) -> Outcome {
    Outcome::new(CoalitionStructure::new(structure.into_iter().map(PartialCoalition::new).collect()), payoffs)
}

fn ints(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()
}

fn record(id: &str, game: impl Into<Game>, outcome: Option<Outcome>, check: Check, expected: bool) -> ExampleRecord {
    ExampleRecord { id: id.to_string(), game: game.into(), outcome, check, expected }
}

/// Seven agents; the valuable task needs one unit from a light agent and
/// two from its heavy partner (agent 4 pairs with any heavy agent), and a
/// small task needs two units pooled from the heavy agents.
pub fn seven_agent_game() -> RuleGame {
    let pair = |light: usize, heavy: usize| Rule {
        requirements: vec![
            Requirement { agents: vec![light], min: int(1) },
            Requirement { agents: vec![heavy], min: int(2) },
        ],
        value: int(100),
    };
    let mut rules = vec![pair(0, 4), pair(1, 5), pair(2, 6), pair(3, 4), pair(3, 5), pair(3, 6)];
    rules.push(Rule { requirements: vec![Requirement { agents: vec![4, 5, 6], min: int(2) }], value: int(2) });
    RuleGame::new(vec![int(1), int(1), int(1), int(1), int(3), int(3), int(3)], rules).expect("valid rule game")
}

/// Three pairs doing the valuable task and a pooled small task, with the
/// heavy agents taking all of the payoff.
pub fn seven_agent_outcome() -> Outcome {
    outcome(
        ints(&[&[1, 0, 0, 0, 2, 0, 0], &[0, 1, 0, 0, 0, 2, 0], &[0, 0, 1, 0, 0, 0, 2], &[0, 0, 0, 0, 1, 1, 0]]),
        ints(&[&[0, 0, 0, 0, 100, 0, 0], &[0, 0, 0, 0, 0, 100, 0], &[0, 0, 0, 0, 0, 0, 100], &[0, 0, 0, 0, 1, 1, 0]]),
    )
}

/// Three agents of weight 8; a rule worth 300 needs 6 units from each,
/// and a rule worth 2 needs 4 units from anyone.
pub fn three_agent_rule_game() -> RuleGame {
    RuleGame::new(
        vec![int(8); 3],
        vec![
            Rule { requirements: (0..3).map(|j| Requirement { agents: vec![j], min: int(6) }).collect(), value: int(300) },
            Rule { requirements: vec![Requirement { agents: vec![0, 1, 2], min: int(4) }], value: int(2) },
        ],
    )
    .expect("valid rule game")
}

pub fn three_agent_rule_outcome() -> Outcome {
    outcome(
        ints(&[&[7, 7, 6], &[1, 1, 2]]),
        vec![vec![int(100); 3], vec![ratio(1, 2), ratio(1, 2), int(1)]],
    )
}

/// The built-in corpus.
pub fn corpus() -> Vec<ExampleRecord> {
    let res = Resolution::default();
    let three_twos = ttg(&[2, 2, 2], &[(3, 1)]);
    let two_tasks = ttg(&[4, 6], &[(5, 15), (4, 10)]);
    let cs = ints(&[&[1, 4], &[3, 2]]);
    let cs2 = ints(&[&[2, 3], &[2, 3]]);
    let x = outcome(cs.clone(), ints(&[&[7, 8], &[9, 6]]));
    let y = outcome(cs, ints(&[&[7, 8], &[8, 7]]));
    let x2 = outcome(cs2.clone(), ints(&[&[3, 12], &[12, 3]]));
    let y2 = outcome(cs2, ints(&[&[7, 8], &[8, 7]]));
    let z = outcome(ints(&[&[4, 3], &[0, 3]]), ints(&[&[3, 12], &[0, 0]]));
    let spread_outcome = outcome(
        ints(&[&[2, 1, 0], &[0, 1, 2]]),
        vec![vec![ratio(2, 3), ratio(1, 3), int(0)], vec![int(0), ratio(1, 3), ratio(2, 3)]],
    );
    let heavy_and_lights = ttg(&[9, 1, 1], &[(8, 100), (2, 1)]);
    let split_game = ttg(&[10, 10], &[(20, 20), (7, 9)]);
    let split_outcome = outcome(ints(&[&[10, 10]]), ints(&[&[10, 10]]));
    let dev = |kind, deviators: &[usize], total: Option<i64>| Check::Deviation {
        kind,
        deviators: deviators.to_vec(),
        res,
        total: total.map(int),
    };
    use DeviationKind::{Optimistic, Refined};
    vec![
        record("example-1-overlapping", three_twos.clone(), None, Check::OverlappingWelfare(int(2)), true),
        record("example-1-nonoverlapping", three_twos.clone(), None, Check::NonoverlappingWelfare(int(1)), true),
        record("example-2-x", two_tasks.clone(), Some(x), Check::TtgCore, false),
        record("example-2-y", two_tasks.clone(), Some(y.clone()), Check::TtgCore, true),
        record("example-4-y", two_tasks.clone(), Some(y), dev(Refined, &[1], Some(17)), true),
        record("example-4-x-prime", two_tasks.clone(), Some(x2.clone()), Check::Core(Refined, res), true),
        record("example-5-z", two_tasks.clone(), Some(z), dev(Refined, &[0, 1], Some(30)), true),
        record("example-6-x-prime", two_tasks.clone(), Some(x2), dev(Optimistic, &[1], Some(17)), true),
        record("example-6-y", two_tasks, Some(y2), Check::Core(Optimistic, res), true),
        record(
            "prop-1-r-deviation",
            seven_agent_game(),
            Some(seven_agent_outcome()),
            dev(Refined, &[1, 2, 5, 6], None),
            true,
        ),
        record("prop-2-r-stable", three_agent_rule_game(), Some(three_agent_rule_outcome()), Check::Core(Refined, res), true),
        record(
            "prop-2-o-deviation",
            three_agent_rule_game(),
            Some(three_agent_rule_outcome()),
            dev(Optimistic, &[1, 2], None),
            true,
        ),
        record("prop-3-partitions", three_twos.clone(), None, Check::SomePartitionStabilizable, false),
        record("prop-3-o-stable", three_twos, Some(spread_outcome), Check::Core(Optimistic, res), true),
        record("prop-4-c-core", heavy_and_lights.clone(), None, Check::CCoreNonempty, false),
        record(
            "prop-4-partition",
            heavy_and_lights.clone(),
            None,
            Check::Partition { partition: vec![vec![0], vec![1, 2]], p: vec![int(100), ratio(1, 2), ratio(1, 2)] },
            true,
        ),
        record("prop-4-convexity", heavy_and_lights, None, Check::NoConvexityViolation { res, budget: 1 }, false),
        record("prop-5-aubin", split_game.clone(), None, Check::Aubin(vec![int(10), int(10)]), false),
        record("prop-5-f-core", split_game.clone(), None, Check::FCore(vec![int(10), int(10)]), true),
        record("prop-5-o-stable", split_game, Some(split_outcome), Check::Core(Optimistic, res), true),
    ]
}

fn word(check: &Check, value: bool) -> &'static str {
    match (check, value) {
        (Check::OverlappingWelfare(_) | Check::NonoverlappingWelfare(_), true) => "equal",
        (Check::OverlappingWelfare(_) | Check::NonoverlappingWelfare(_), false) => "different",
        (Check::TtgCore | Check::Core(..) | Check::Partition { .. }, true) => "stable",
        (Check::TtgCore | Check::Core(..) | Check::Partition { .. }, false) => "unstable",
        (Check::Deviation { .. }, true) => "found",
        (Check::Deviation { .. }, false) => "none",
        (Check::CCoreNonempty | Check::SomePartitionStabilizable, true) => "nonempty",
        (Check::CCoreNonempty | Check::SomePartitionStabilizable, false) => "empty",
        (Check::Aubin(_) | Check::FCore(_) | Check::NoConvexityViolation { .. }, true) => "holds",
        (Check::Aubin(_) | Check::FCore(_) | Check::NoConvexityViolation { .. }, false) => "fails",
    }
}

fn label(check: &Check) -> String {
    match check {
        Check::OverlappingWelfare(v) => format!("overlapping welfare = {v}"),
        Check::NonoverlappingWelfare(v) => format!("nonoverlapping welfare = {v}"),
        Check::TtgCore => "c-core membership".into(),
        Check::Core(kind, res) => format!("{}-core membership (D={}, U={})", kind.letter(), res.grid, res.cap),
        Check::Deviation { kind, deviators, total, .. } => {
            let sum = total.as_ref().map(|t| format!(" with payoffs summing to {t}")).unwrap_or_default();
            format!("{}-deviation by {}{sum}", kind.letter(), subsets::format_one_based(deviators))
        }
        Check::CCoreNonempty => "c-core".into(),
        Check::Partition { partition, .. } => {
            let blocks: Vec<String> = partition.iter().map(|b| subsets::format_one_based(b)).collect();
            format!("partition {} core check", blocks.join(""))
        }
        Check::SomePartitionStabilizable => "crisp core over all partitions".into(),
        Check::Aubin(p) => format!("Aubin core at ({})", rational::format_list(p)),
        Check::FCore(p) => format!("f-core at ({})", rational::format_list(p)),
        Check::NoConvexityViolation { .. } => "convexity".into(),
    }
}

fn need_outcome(r: &ExampleRecord) -> Result<&Outcome> {
    r.outcome.as_ref().ok_or_else(|| crate::Error::Invalid(format!("record {} has no outcome", r.id)))
}

fn need_ttg(r: &ExampleRecord) -> Result<&Ttg> {
    r.game.as_ttg().ok_or_else(|| crate::Error::Invalid(format!("record {} needs a threshold task game", r.id)))
}

/// Evaluates a record, returning the observed boolean and a short note.
fn evaluate(r: &ExampleRecord) -> Result<(bool, String)> {
    Ok(match &r.check {
        Check::OverlappingWelfare(v) => {
            let got = welfare::max_welfare_overlapping(need_ttg(r)?)?.value;
            (got == *v, format!("value {got}"))
        }
        Check::NonoverlappingWelfare(v) => {
            let (got, _) = welfare::max_welfare_nonoverlapping(need_ttg(r)?)?;
            (got == *v, format!("value {got}"))
        }
        Check::TtgCore => {
            let v = stability::ttg_membership(need_ttg(r)?, need_outcome(r)?)?;
            let note = v.witness.as_ref().map(|w| w.to_string()).unwrap_or_default();
            (v.stable, note)
        }
        Check::Core(kind, res) => {
            let v = deviations::core_membership(&r.game, need_outcome(r)?, *kind, *res)?;
            let note = v.witness.as_ref().map(|w| w.to_string()).unwrap_or_default();
            (v.stable, note)
        }
        Check::Deviation { kind, deviators, res, total } => {
            let o = need_outcome(r)?;
            match deviations::DeviationSearch::new(&r.game, o, *res)?.find(*kind, deviators)? {
                None => (false, String::new()),
                Some(d) => {
                    if let Err(e) = d.verify(&r.game, o) {
                        return Ok((false, format!("deviation failed verification: {e}")));
                    }
                    let sum = rational::sum(&d.after);
                    let ok = total.as_ref().map_or(true, |t| *t == sum);
                    (ok, format!("new payoffs ({}) sum to {sum}", rational::format_list(&d.after)))
                }
            }
        }
        Check::CCoreNonempty => {
            let v = stability::stabilize(need_ttg(r)?)?;
            (v.stable, String::new())
        }
        Check::Partition { partition, p } => {
            let v = stability::nonoverlapping_core_check(need_ttg(r)?, partition, p)?;
            let note = v.witness.as_ref().map(|w| w.to_string()).unwrap_or_default();
            (v.stable, note)
        }
        Check::SomePartitionStabilizable => {
            let g = need_ttg(r)?;
            let mut found = None;
            for partition in subsets::set_partitions(g.n()) {
                if stability::stabilize_partition(g, &partition)?.stable {
                    found = Some(partition);
                    break;
                }
            }
            let note = match &found {
                Some(p) => format!("partition {} is stabilizable", p.iter().map(|b| subsets::format_one_based(b)).collect::<String>()),
                None => format!("all {} partitions infeasible", subsets::set_partitions(g.n()).len()),
            };
            (found.is_some(), note)
        }
        Check::Aubin(p) => {
            let rep = fuzzy::aubin_core_check(need_ttg(r)?, p)?;
            (rep.holds, fuzzy_note(&rep))
        }
        Check::FCore(p) => {
            let rep = fuzzy::f_core_check(need_ttg(r)?, p)?;
            (rep.holds, fuzzy_note(&rep))
        }
        Check::NoConvexityViolation { res, budget } => {
            let f = convexity::falsify_convexity(&r.game, *res, *budget)?;
            (!f.found(), f.to_string())
        }
    })
}

fn fuzzy_note(rep: &fuzzy::FuzzyCheckReport) -> String {
    match (&rep.witness, &rep.value, &rep.granted) {
        (Some(w), Some(v), Some(g)) => format!("coalition ({}) earns {v} but is granted {g}", rational::format_list(w)),
        _ => String::new(),
    }
}

/// Runs the given records in order.
pub fn run_records(records: &[ExampleRecord]) -> ExampleReport {
    let results = records
        .iter()
        .map(|r| {
            let what = label(&r.check);
            let expected = word(&r.check, r.expected);
            match evaluate(r) {
                Ok((observed, note)) => {
                    let got = word(&r.check, observed);
                    let mut detail = format!("{what}: expected {expected}, observed {got}");
                    if !note.is_empty() {
                        detail.push_str(&format!(" ({})", note.lines().map(str::trim).collect::<Vec<_>>().join("; ")));
                    }
                    RecordResult { id: r.id.clone(), passed: observed == r.expected, detail }
                }
                Err(e) => RecordResult {
                    id: r.id.clone(),
                    passed: false,
                    detail: format!("{what}: expected {expected}, error: {e}"),
                },
            }
        })
        .collect();
    ExampleReport { results }
}

/// Runs the built-in corpus.
pub fn run_examples() -> ExampleReport {
    run_records(&corpus())
}
