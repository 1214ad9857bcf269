//! The fuzzy game induced by a threshold task game, its Aubin core and the
//! support-based f-core.
//!
//! Fuzzy coalitions are participation levels in [0, 1]. Splitting a fuzzy
//! coalition into task copies pools its weight freely, so its value is the
//! knapsack value of `Σ r_i w_i`.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::Ttg;
use crate::rational::{self, Rational};
use crate::stability::{self, Witness};
use crate::welfare::TtgProfile;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzyCheckReport {
    pub holds: bool,
    /// Participation levels of a coalition violating the condition.
    pub witness: Option<Vec<Rational>>,
    /// What the witness earns in the fuzzy game.
    pub value: Option<Rational>,
    /// What the payoff vector grants the witness under the checked rule.
    pub granted: Option<Rational>,
}

impl FuzzyCheckReport {
    fn holds() -> Self {
        FuzzyCheckReport { holds: true, witness: None, value: None, granted: None }
    }

    fn violated(witness: Vec<Rational>, value: Rational, granted: Rational) -> Self {
        FuzzyCheckReport { holds: false, witness: Some(witness), value: Some(value), granted: Some(granted) }
    }
}

fn check_levels(ttg: &Ttg, r: &[Rational]) -> Result<()> {
    if r.len() != ttg.n() {
        return Err(Error::DimensionMismatch { expected: ttg.n(), found: r.len() });
    }
    if r.iter().any(|x| x.is_negative() || *x > Rational::one()) {
        return Err(Error::Invalid("participation levels must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Value of the fuzzy coalition `r` (participation levels).
pub fn fuzzy_value(ttg: &Ttg, r: &[Rational]) -> Result<Rational> {
    check_levels(ttg, r)?;
    let profile = TtgProfile::new(ttg)?;
    Ok(fuzzy_value_with(ttg, &profile, r))
}

fn fuzzy_value_with(ttg: &Ttg, profile: &TtgProfile, r: &[Rational]) -> Rational {
    let pooled = r.iter().zip(ttg.weights()).fold(Rational::zero(), |a, (x, w)| a + x * w);
    profile.value_of_weight(&pooled)
}

fn check_efficiency(ttg: &Ttg, profile: &TtgProfile, p: &[Rational]) -> Result<()> {
    if p.len() != ttg.n() {
        return Err(Error::DimensionMismatch { expected: ttg.n(), found: p.len() });
    }
    let grand = profile.value_units(profile.total_units());
    let total = rational::sum(p);
    if &total != grand {
        return Err(Error::Invalid(format!("payoffs sum to {total}, the grand coalition earns {grand}")));
    }
    Ok(())
}

/// Cheapest participation levels reaching pooled weight `target`: agents
/// are filled in order of payoff per unit of weight, and agents tied at
/// the marginal rate are filled proportionally to their weights.
fn cheapest_levels(ttg: &Ttg, p: &[Rational], target: &Rational) -> Vec<Rational> {
    let n = ttg.n();
    let w = ttg.weights();
    let rate: Vec<Rational> = (0..n).map(|i| &p[i] / &w[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rate[a].cmp(&rate[b]).then(a.cmp(&b)));
    let mut r = vec![Rational::zero(); n];
    let mut left = target.clone();
    let mut k = 0;
    while k < n && left.is_positive() {
        let mut end = k;
        while end < n && rate[order[end]] == rate[order[k]] {
            end += 1;
        }
        let group = &order[k..end];
        let weight = rational::sum(group.iter().map(|&i| &w[i]));
        let take = if left < weight { &left / &weight } else { Rational::one() };
        for &i in group {
            r[i] = take.clone();
        }
        left -= &weight * &take;
        k = end;
    }
    r
}

/// Aubin core condition: `Σ p_i r_i >= v'(r)` for every fuzzy coalition.
/// For each pooled weight level at which the knapsack value rises, the
/// cheapest way to reach that weight is checked; that suffices because the
/// value is constant between levels and cost grows with weight. The
/// witness is the most violated level, the lightest among ties.
pub fn aubin_core_check(ttg: &Ttg, p: &[Rational]) -> Result<FuzzyCheckReport> {
    let profile = TtgProfile::new(ttg)?;
    check_efficiency(ttg, &profile, p)?;
    if p.iter().any(|x| x.is_negative()) {
        // A lone agent with negative payoff objects to any participation.
        let i = p.iter().position(|x| x.is_negative()).expect("negative entry");
        let mut r = vec![Rational::zero(); ttg.n()];
        r[i] = Rational::one();
        let value = fuzzy_value_with(ttg, &profile, &r);
        if value > p[i] {
            return Ok(FuzzyCheckReport::violated(r, value, p[i].clone()));
        }
    }
    let factor = profile.integral.factor_rational();
    let mut last = Rational::zero();
    let mut worst: Option<(Rational, FuzzyCheckReport)> = None;
    for units in 1..=profile.total_units() {
        let value = profile.value_units(units);
        if *value <= last {
            continue;
        }
        last = value.clone();
        let target = rational::from_usize(units) / &factor;
        let r = cheapest_levels(ttg, p, &target);
        let cost = r.iter().zip(p).fold(Rational::zero(), |a, (x, q)| a + x * q);
        let gap = value - &cost;
        if gap.is_positive() && worst.as_ref().map_or(true, |(g, _)| gap > *g) {
            worst = Some((gap, FuzzyCheckReport::violated(r, value.clone(), cost)));
        }
    }
    Ok(worst.map_or_else(FuzzyCheckReport::holds, |(_, rep)| rep))
}

/// f-core condition: `v'(r) <= p(supp(r))` for every fuzzy coalition. The
/// worst fuzzy coalition with a given support is full participation, so
/// this is the crisp condition `p(S) >= U(w(S))` for every nonempty S.
pub fn f_core_check(ttg: &Ttg, p: &[Rational]) -> Result<FuzzyCheckReport> {
    let profile = TtgProfile::new(ttg)?;
    check_efficiency(ttg, &profile, p)?;
    let verdict = stability::ttg_payoff_membership(&profile, p)?;
    match verdict.witness {
        Some(Witness::Blocking { set, value, payoff }) if !verdict.stable => {
            let mut r = vec![Rational::zero(); ttg.n()];
            for j in set {
                r[j] = Rational::one();
            }
            Ok(FuzzyCheckReport::violated(r, value, payoff))
        }
        _ => Ok(FuzzyCheckReport::holds()),
    }
}
