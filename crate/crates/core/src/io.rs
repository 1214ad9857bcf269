//! JSON file formats. Numbers are rational strings such as `"7/3"` or JSON
//! integers; floating-point literals are rejected. Agents are 1-based in
//! files.
//!
//! ```json
//! {"agents": 2, "weights": ["4", "6"],
//!  "tasks": [{"threshold": "5", "utility": "15"}]}
//! {"agents": 3, "weights": [8, 8, 8],
//!  "rules": [{"requirements": [{"agents": [1, 2, 3], "min": "4"}], "value": 2}]}
//! {"structure": [["1", "4"], ["3", "2"]], "payoffs": [["7", "8"], ["9", "6"]]}
//! ```

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{CoalitionStructure, Game, Outcome, PartialCoalition, Requirement, Rule, RuleGame, TaskType, Ttg};
use crate::rational::{self, Rational};
use crate::reductions::{BicliqueInstance, Item, KnapsackInstance};

/// A rational read from a string or an integer literal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Num(pub Rational);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => rational::parse(&s).map(Num).map_err(D::Error::custom),
            Value::Number(n) if n.is_i64() || n.is_u64() => {
                rational::parse(&n.to_string()).map(Num).map_err(D::Error::custom)
            }
            Value::Number(n) => Err(D::Error::custom(format!("floating-point literal {n} is not allowed"))),
            other => Err(D::Error::custom(format!("expected a number, found {other}"))),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&rational::format(&self.0))
    }
}

/// A nonnegative integer read from a string or an integer literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Count(u64);

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let Num(q) = Num::deserialize(d)?;
        if !q.is_integer() {
            return Err(D::Error::custom(format!("expected an integer, found {q}")));
        }
        let v: u64 = q.to_integer().try_into().map_err(|_| D::Error::custom(format!("{q} is not a nonnegative integer")))?;
        Ok(Count(v))
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

fn nums(v: &[Rational]) -> Vec<Num> {
    v.iter().cloned().map(Num).collect()
}

fn rats(v: Vec<Num>) -> Vec<Rational> {
    v.into_iter().map(|n| n.0).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    threshold: Num,
    utility: Num,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementFile {
    agents: Vec<usize>,
    min: Num,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    requirements: Vec<RequirementFile>,
    value: Num,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agents: Option<usize>,
    weights: Vec<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tasks: Option<Vec<TaskFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rules: Option<Vec<RuleFile>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeFile {
    structure: Vec<Vec<Num>>,
    payoffs: Vec<Vec<Num>>,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Invalid(format!("malformed JSON: {e}"))
}

fn to_zero_based(agents: &[usize], n: usize) -> Result<Vec<usize>> {
    agents
        .iter()
        .map(|&a| {
            if a == 0 || a > n {
                Err(Error::Invalid(format!("agent {a} out of range 1..={n}")))
            } else {
                Ok(a - 1)
            }
        })
        .collect()
}

pub fn parse_game(text: &str) -> Result<Game> {
    let file: GameFile = serde_json::from_str(text).map_err(json_err)?;
    let weights = rats(file.weights);
    let n = weights.len();
    if let Some(a) = file.agents {
        if a != n {
            return Err(Error::DimensionMismatch { expected: a, found: n });
        }
    }
    match (file.tasks, file.rules) {
        (Some(tasks), None) => {
            let tasks = tasks.into_iter().map(|t| TaskType::new(t.threshold.0, t.utility.0)).collect();
            Ok(Ttg::new(weights, tasks)?.into())
        }
        (None, Some(rules)) => {
            let rules = rules
                .into_iter()
                .map(|r| {
                    let requirements = r
                        .requirements
                        .into_iter()
                        .map(|q| Ok(Requirement { agents: to_zero_based(&q.agents, n)?, min: q.min.0 }))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Rule { requirements, value: r.value.0 })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RuleGame::new(weights, rules)?.into())
        }
        _ => Err(Error::Invalid("a game needs exactly one of \"tasks\" or \"rules\"".into())),
    }
}

pub fn game_to_json(game: &Game) -> String {
    let file = match game {
        Game::Ttg(t) => GameFile {
            agents: Some(t.n()),
            weights: nums(t.weights()),
            tasks: Some(
                t.tasks()
                    .iter()
                    .map(|k| TaskFile { threshold: Num(k.threshold.clone()), utility: Num(k.utility.clone()) })
                    .collect(),
            ),
            rules: None,
        },
        Game::Rules(rg) => GameFile {
            agents: Some(rg.n()),
            weights: nums(rg.weights()),
            tasks: None,
            rules: Some(
                rg.rules()
                    .iter()
                    .map(|r| RuleFile {
                        requirements: r
                            .requirements
                            .iter()
                            .map(|q| RequirementFile {
                                agents: q.agents.iter().map(|a| a + 1).collect(),
                                min: Num(q.min.clone()),
                            })
                            .collect(),
                        value: Num(r.value.clone()),
                    })
                    .collect(),
            ),
        },
    };
    serde_json::to_string_pretty(&file).expect("game serializes")
}

/// Parses an outcome; contribution rows must have length `n`, payoff rows
/// must match the structure row for row.
pub fn parse_outcome(text: &str, n: usize) -> Result<Outcome> {
    let file: OutcomeFile = serde_json::from_str(text).map_err(json_err)?;
    if file.payoffs.len() != file.structure.len() {
        return Err(Error::DimensionMismatch { expected: file.structure.len(), found: file.payoffs.len() });
    }
    for row in file.structure.iter().chain(&file.payoffs) {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
    }
    let structure = CoalitionStructure::new(file.structure.into_iter().map(|r| PartialCoalition::new(rats(r))).collect());
    Ok(Outcome::new(structure, file.payoffs.into_iter().map(rats).collect()))
}

pub fn outcome_to_json(outcome: &Outcome) -> String {
    let file = OutcomeFile {
        structure: outcome.structure.coalitions.iter().map(|c| nums(c.contributions())).collect(),
        payoffs: outcome.payoffs.iter().map(|r| nums(r)).collect(),
    };
    serde_json::to_string_pretty(&file).expect("outcome serializes")
}

/// A payoff vector given as a JSON array or a comma-separated list.
pub fn parse_payoffs(text: &str) -> Result<Vec<Rational>> {
    let t = text.trim();
    if t.starts_with('[') {
        let v: Vec<Num> = serde_json::from_str(t).map_err(json_err)?;
        Ok(rats(v))
    } else {
        rational::parse_list(t)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemFile {
    size: Count,
    value: Count,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnapsackFile {
    items: Vec<ItemFile>,
    capacity: Count,
    target: Count,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BicliqueFile {
    left: usize,
    right: usize,
    /// 1-based (left, right) pairs.
    edges: Vec<(usize, usize)>,
    target: usize,
}

pub fn parse_knapsack(text: &str) -> Result<KnapsackInstance> {
    let f: KnapsackFile = serde_json::from_str(text).map_err(json_err)?;
    Ok(KnapsackInstance {
        items: f.items.into_iter().map(|i| Item { size: i.size.0, value: i.value.0 }).collect(),
        capacity: f.capacity.0,
        target: f.target.0,
    })
}

pub fn knapsack_to_json(k: &KnapsackInstance) -> String {
    let f = KnapsackFile {
        items: k.items.iter().map(|i| ItemFile { size: Count(i.size), value: Count(i.value) }).collect(),
        capacity: Count(k.capacity),
        target: Count(k.target),
    };
    serde_json::to_string_pretty(&f).expect("knapsack serializes")
}

pub fn parse_biclique(text: &str) -> Result<BicliqueInstance> {
    let f: BicliqueFile = serde_json::from_str(text).map_err(json_err)?;
    let edges = f
        .edges
        .iter()
        .map(|&(l, r)| {
            if l == 0 || r == 0 || l > f.left || r > f.right {
                Err(Error::Invalid(format!("edge ({l}, {r}) out of range")))
            } else {
                Ok((l - 1, r - 1))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BicliqueInstance { left: f.left, right: f.right, edges, target: f.target })
}

pub fn biclique_to_json(b: &BicliqueInstance) -> String {
    let f = BicliqueFile {
        left: b.left,
        right: b.right,
        edges: b.edges.iter().map(|&(l, r)| (l + 1, r + 1)).collect(),
        target: b.target,
    };
    serde_json::to_string_pretty(&f).expect("biclique serializes")
}
