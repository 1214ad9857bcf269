//! Exact rational linear programming.
//!
//! A dense two-phase simplex with Bland's rule. Every answer is audited
//! before it is returned: feasible points against all constraints,
//! infeasibility certificates against the Farkas conditions, and unbounded
//! rays against the homogeneous system.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }

    fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    pub fn lhs(&self, x: &[Rational]) -> Rational {
        dot(&self.coeffs, x)
    }

    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        self.relation.holds(&self.lhs(x), &self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    constraints: Vec<Constraint>,
    objective: Option<(Vec<Rational>, Direction)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, kind: VarKind) -> usize {
        self.names.push(name.into());
        self.kinds.push(kind);
        for c in &mut self.constraints {
            c.coeffs.push(Rational::zero());
        }
        if let Some((c, _)) = &mut self.objective {
            c.push(Rational::zero());
        }
        self.names.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&(Vec<Rational>, Direction)> {
        self.objective.as_ref()
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        assert_eq!(c.coeffs.len(), self.num_variables(), "constraint width");
        self.constraints.push(c);
    }

    /// Adds a constraint given as (variable, coefficient) pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, Rational)], relation: Relation, rhs: Rational) {
        let mut coeffs = vec![Rational::zero(); self.num_variables()];
        for (j, a) in terms {
            coeffs[*j] += a;
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.constraints.iter().any(|d| d == c)
    }

    pub fn set_objective(&mut self, coeffs: Vec<Rational>, direction: Direction) {
        assert_eq!(coeffs.len(), self.num_variables(), "objective width");
        self.objective = Some((coeffs, direction));
    }

    pub fn set_sparse_objective(&mut self, terms: &[(usize, Rational)], direction: Direction) {
        let mut coeffs = vec![Rational::zero(); self.num_variables()];
        for (j, a) in terms {
            coeffs[*j] += a;
        }
        self.objective = Some((coeffs, direction));
    }

    /// True if `x` respects every constraint and sign restriction.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_variables()
            && self
                .kinds
                .iter()
                .zip(x)
                .all(|(k, v)| *k == VarKind::Free || !v.is_negative())
            && self.constraints.iter().all(|c| c.satisfied_by(x))
    }

    /// Checks the Farkas conditions for `y` exactly.
    pub fn is_infeasibility_certificate(&self, y: &[Rational]) -> bool {
        if y.len() != self.constraints.len() {
            return false;
        }
        for (c, yi) in self.constraints.iter().zip(y) {
            let ok = match c.relation {
                Relation::Ge => !yi.is_negative(),
                Relation::Le => !yi.is_positive(),
                Relation::Eq => true,
            };
            if !ok {
                return false;
            }
        }
        for j in 0..self.num_variables() {
            let col = self
                .constraints
                .iter()
                .zip(y)
                .fold(Rational::zero(), |acc, (c, yi)| acc + yi * &c.coeffs[j]);
            let ok = match self.kinds[j] {
                VarKind::NonNegative => !col.is_positive(),
                VarKind::Free => col.is_zero(),
            };
            if !ok {
                return false;
            }
        }
        let yb = self
            .constraints
            .iter()
            .zip(y)
            .fold(Rational::zero(), |acc, (c, yi)| acc + yi * &c.rhs);
        yb.is_positive()
    }

    fn is_improving_ray(&self, ray: &[Rational]) -> bool {
        let Some((obj, dir)) = &self.objective else { return false };
        let sign_ok = self.kinds.iter().zip(ray).all(|(k, v)| *k == VarKind::Free || !v.is_negative());
        let homog = self.constraints.iter().all(|c| c.relation.holds(&c.lhs(ray), &Rational::zero()));
        let gain = dot(obj, ray);
        let improving = match dir {
            Direction::Maximize => gain.is_positive(),
            Direction::Minimize => gain.is_negative(),
        };
        sign_ok && homog && improving
    }
}

/// Outcome of a solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpResult {
    /// An optimal point (or any feasible point when there is no objective).
    Feasible { assignment: Vec<Rational>, objective: Option<Rational> },
    /// Multipliers `y`, one per constraint: `y >= 0` on `>=` rows, `y <= 0`
    /// on `<=` rows, `yA <= 0` on nonnegative columns, `yA = 0` on free
    /// columns, and `yb > 0`.
    Infeasible { certificate: Vec<Rational> },
    /// A feasible point and a ray along which the objective improves forever.
    Unbounded { assignment: Vec<Rational>, ray: Vec<Rational> },
}

impl LpResult {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpResult::Infeasible { .. })
    }

    pub fn assignment(&self) -> Option<&[Rational]> {
        match self {
            LpResult::Feasible { assignment, .. } | LpResult::Unbounded { assignment, .. } => {
                Some(assignment)
            }
            LpResult::Infeasible { .. } => None,
        }
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Dense tableau over nonnegative standard-form columns.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Reduced costs of every column followed by minus the objective value.
    cost: Vec<Rational>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                *v /= &p;
            }
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        if !self.cost[c].is_zero() {
            let f = self.cost[c].clone();
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    fn set_costs(&mut self, c: &[Rational]) {
        let mut cost: Vec<Rational> = c.to_vec();
        cost.push(Rational::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for (v, t) in cost.iter_mut().zip(&self.rows[i]) {
                *v -= &c[b] * t;
            }
        }
        self.cost = cost;
    }

    /// Minimizes the current cost row over columns allowed by `allowed`.
    /// Returns the entering column of an unbounded direction, if any.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Option<usize> {
        loop {
            let entering = (0..self.width).find(|&j| allowed(j) && self.cost[j].is_negative());
            let Some(c) = entering else { return None };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Some(c),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn values(&self) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.width];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(i).clone();
        }
        x
    }
}

/// Solves `lp` exactly. Panics only if an internal audit fails, which
/// would indicate a solver bug.
pub fn solve(lp: &LinearProgram) -> LpResult {
    let nv = lp.num_variables();
    // Standard-form columns: one per nonnegative variable, two per free one.
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(nv);
    let mut ncols = 0;
    for k in &lp.kinds {
        match k {
            VarKind::NonNegative => {
                col_of.push((ncols, None));
                ncols += 1;
            }
            VarKind::Free => {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            }
        }
    }
    let structural = ncols;
    let m = lp.constraints.len();

    // Normalize each row to a nonnegative right-hand side.
    let mut negated = vec![false; m];
    let mut rels = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.rhs.is_negative() {
            negated[i] = true;
            rels.push(c.relation.flipped());
        } else {
            rels.push(c.relation);
        }
    }
    let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
    let width = structural + n_slack + n_art;
    let art_start = structural + n_slack;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    // Column that starts as the identity column of each row.
    let mut initial = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (structural, art_start);
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if negated[i] { -Rational::one() } else { Rational::one() };
        let mut row = vec![Rational::zero(); width + 1];
        for (j, a) in c.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let (p, q) = col_of[j];
            row[p] = a * &sign;
            if let Some(q) = q {
                row[q] = -(a * &sign);
            }
        }
        row[width] = &c.rhs * &sign;
        match rels[i] {
            Relation::Le => {
                row[next_slack] = Rational::one();
                basis.push(next_slack);
                initial.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -Rational::one();
                next_slack += 1;
                row[next_art] = Rational::one();
                basis.push(next_art);
                initial.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rational::one();
                basis.push(next_art);
                initial.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }

    let mut t = Tableau { rows, basis, cost: Vec::new(), width };

    // Phase 1: minimize the sum of artificials.
    let mut c1 = vec![Rational::zero(); width];
    for v in c1.iter_mut().skip(art_start) {
        *v = Rational::one();
    }
    t.set_costs(&c1);
    let unbounded = t.run(&|_| true);
    debug_assert!(unbounded.is_none(), "phase 1 is bounded below by 0");
    let infeasibility = -t.cost[width].clone();
    if infeasibility.is_positive() {
        let certificate: Vec<Rational> = (0..m)
            .map(|i| {
                let col = initial[i];
                let y = &c1[col] - &t.cost[col];
                if negated[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        assert!(
            lp.is_infeasibility_certificate(&certificate),
            "simplex produced an invalid infeasibility certificate"
        );
        return LpResult::Infeasible { certificate };
    }

    // Drive artificials out of the basis; drop rows that are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= art_start {
            match (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let to_original = |x: &[Rational]| -> Vec<Rational> {
        col_of
            .iter()
            .map(|&(p, q)| match q {
                Some(q) => &x[p] - &x[q],
                None => x[p].clone(),
            })
            .collect()
    };

    let Some((obj, dir)) = &lp.objective else {
        let assignment = to_original(&t.values());
        assert!(lp.is_feasible(&assignment), "simplex produced an infeasible point");
        return LpResult::Feasible { assignment, objective: None };
    };

    // Phase 2: minimize -c x for maximization, c x for minimization.
    let mut c2 = vec![Rational::zero(); width];
    for (j, a) in obj.iter().enumerate() {
        let a = match dir {
            Direction::Maximize => -a.clone(),
            Direction::Minimize => a.clone(),
        };
        let (p, q) = col_of[j];
        if let Some(q) = q {
            c2[q] = -a.clone();
        }
        c2[p] = a;
    }
    t.set_costs(&c2);
    let entering = t.run(&|j| j < art_start);
    let point = t.values();
    let assignment = to_original(&point);
    assert!(lp.is_feasible(&assignment), "simplex produced an infeasible point");
    match entering {
        None => {
            let value = dot(obj, &assignment);
            LpResult::Feasible { assignment, objective: Some(value) }
        }
        Some(c) => {
            let mut dir_std = vec![Rational::zero(); width];
            dir_std[c] = Rational::one();
            for (i, &b) in t.basis.iter().enumerate() {
                dir_std[b] = -t.rows[i][c].clone();
            }
            let ray = to_original(&dir_std);
            assert!(lp.is_improving_ray(&ray), "simplex produced an invalid unbounded ray");
            LpResult::Unbounded { assignment, ray }
        }
    }
}

/// Result of constraint generation, with the program as finally materialized.
#[derive(Clone, Debug)]
pub struct Separated {
    pub result: LpResult,
    pub program: LinearProgram,
    pub rounds: usize,
}

/// Constraint generation: solves `base`, asks `oracle` for a violated
/// constraint, adds it, and repeats until the oracle accepts or the
/// program becomes infeasible or unbounded.
pub fn solve_with_separation<F>(base: LinearProgram, mut oracle: F) -> Result<Separated>
where
    F: FnMut(&[Rational]) -> Option<Constraint>,
{
    let mut program = base;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let result = solve(&program);
        let LpResult::Feasible { assignment, .. } = &result else {
            return Ok(Separated { result, program, rounds });
        };
        match oracle(assignment) {
            None => return Ok(Separated { result, program, rounds }),
            Some(c) => {
                if program.contains(&c) {
                    return Err(Error::DuplicateConstraint { round: rounds });
                }
                program.add_constraint(c);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn one_var() -> LinearProgram {
        let mut lp = LinearProgram::new();
        lp.add_variable("x", VarKind::Free);
        lp
    }

    #[test]
    fn bounded_maximum() {
        let mut lp = one_var();
        lp.add_sparse(&[(0, int(1))], Relation::Le, int(3));
        lp.add_sparse(&[(0, int(1))], Relation::Ge, int(0));
        lp.set_sparse_objective(&[(0, int(1))], Direction::Maximize);
        assert_eq!(
            solve(&lp),
            LpResult::Feasible { assignment: vec![int(3)], objective: Some(int(3)) }
        );
    }

    #[test]
    fn contradictory_bounds() {
        let mut lp = one_var();
        lp.add_sparse(&[(0, int(1))], Relation::Ge, int(1));
        lp.add_sparse(&[(0, int(1))], Relation::Le, int(0));
        let LpResult::Infeasible { certificate } = solve(&lp) else { panic!("expected infeasible") };
        assert!(lp.is_infeasibility_certificate(&certificate));
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = one_var();
        lp.add_sparse(&[(0, int(1))], Relation::Ge, int(-2));
        lp.set_sparse_objective(&[(0, int(1))], Direction::Maximize);
        assert!(matches!(solve(&lp), LpResult::Unbounded { .. }));
    }

    fn pairwise_lp() -> LinearProgram {
        // p >= 0, sum p = 2, p_i + p_j >= 1 for all pairs.
        let mut lp = LinearProgram::new();
        for i in 0..3 {
            lp.add_variable(format!("p{i}"), VarKind::NonNegative);
        }
        lp.add_sparse(&[(0, int(1)), (1, int(1)), (2, int(1))], Relation::Eq, int(2));
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            lp.add_sparse(&[(a, int(1)), (b, int(1))], Relation::Ge, int(1));
        }
        lp
    }

    #[test]
    fn pairwise_system_is_feasible() {
        let lp = pairwise_lp();
        assert!(lp.is_feasible(&[ratio(2, 3), ratio(2, 3), ratio(2, 3)]));
        let r = solve(&lp);
        assert!(lp.is_feasible(r.assignment().unwrap()));
    }

    #[test]
    fn tightened_pairwise_system_is_infeasible() {
        let mut lp = pairwise_lp();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            lp.add_sparse(&[(a, int(1)), (b, int(1))], Relation::Ge, ratio(3, 2));
        }
        assert!(!solve(&lp).is_feasible());
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        lp.add_variable("a", VarKind::NonNegative);
        lp.add_variable("b", VarKind::NonNegative);
        lp.add_sparse(&[(0, int(1)), (1, int(1))], Relation::Eq, int(4));
        lp.add_sparse(&[(0, int(2)), (1, int(2))], Relation::Eq, int(8));
        lp.set_sparse_objective(&[(0, int(1)), (1, int(-1))], Direction::Minimize);
        let LpResult::Feasible { assignment, objective } = solve(&lp) else { panic!() };
        assert_eq!(assignment, vec![int(0), int(4)]);
        assert_eq!(objective, Some(int(-4)));
    }

    #[test]
    fn separation_accepting_oracle_returns_base() {
        let lp = pairwise_lp();
        let direct = solve(&lp);
        let sep = solve_with_separation(lp, |_| None).unwrap();
        assert_eq!(sep.result, direct);
        assert_eq!(sep.rounds, 1);
    }

    #[test]
    fn separation_rejects_repeated_constraint() {
        let lp = pairwise_lp();
        let c = lp.constraints()[1].clone();
        let err = solve_with_separation(lp, move |_| Some(c.clone())).unwrap_err();
        assert_eq!(err, Error::DuplicateConstraint { round: 1 });
    }

    #[test]
    fn separation_adds_cuts_lazily() {
        let mut base = LinearProgram::new();
        for i in 0..3 {
            base.add_variable(format!("p{i}"), VarKind::NonNegative);
        }
        base.add_sparse(&[(0, int(1)), (1, int(1)), (2, int(1))], Relation::Eq, int(2));
        let full = pairwise_lp();
        let cuts: Vec<Constraint> = full.constraints()[1..].to_vec();
        let sep = solve_with_separation(base, |x| cuts.iter().find(|c| !c.satisfied_by(x)).cloned())
            .unwrap();
        assert!(full.is_feasible(sep.result.assignment().unwrap()));
    }
}
