//! Exact-arithmetic toolkit for overlapping coalition formation (OCF) games.
//!
//! Games come in two flavours: threshold task games ([`Ttg`]), where a
//! coalition earns the best task utility its pooled weight can reach, and
//! rule-based games ([`RuleGame`]), where value is gated by per-group
//! minimum contributions. Contributions are stored in absolute weight units
//! and every number is a [`Rational`]; no floating point is used anywhere.
//!
//! Agent indices in this API are 0-based.

pub mod convexity;
pub mod corpus;
pub mod deviations;
pub mod error;
mod flow;
pub mod fuzzy;
pub mod generate;
pub mod io;
pub mod lp;
pub mod model;
pub mod rational;
pub mod reductions;
pub mod stability;
pub mod subsets;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{
    CoalitionStructure, Game, Outcome, PartialCoalition, PayoffPolicy, PayoffVector,
    Requirement, Resolution, Rule, RuleGame, TaskType, Ttg, Violation,
};
pub use rational::Rational;
pub use stability::{CoreVerdict, Witness};
