//! Exact max-flow for agent-to-requirement assignment checks.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};

use crate::rational::Rational;

/// Edmonds-Karp on a dense residual matrix. Shortest augmenting paths bound
/// the number of augmentations independently of capacity values, so exact
/// rational capacities are fine.
#[cfg(test)]
pub fn max_flow(cap: Vec<Vec<Rational>>, s: usize, t: usize) -> Rational {
    max_flow_residual(cap, s, t).0
}

/// Max-flow value together with the final residual capacities.
pub fn max_flow_residual(
    mut cap: Vec<Vec<Rational>>,
    s: usize,
    t: usize,
) -> (Rational, Vec<Vec<Rational>>) {
    let n = cap.len();
    let mut total = Rational::zero();
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v].is_positive() {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return (total, cap);
        }
        let mut bottleneck: Option<Rational> = None;
        let mut v = t;
        while v != s {
            let u = prev[v];
            if bottleneck.as_ref().map_or(true, |b| cap[u][v] < *b) {
                bottleneck = Some(cap[u][v].clone());
            }
            v = u;
        }
        let b = bottleneck.expect("path has at least one edge");
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= &b;
            cap[v][u] += &b;
            v = u;
        }
        total += b;
    }
}

/// A demand that must be covered by units from the agents in `mask`.
#[derive(Clone, Debug)]
pub struct Demand {
    pub mask: u64,
    pub amount: Rational,
}

/// Whether agents with the given supplies can meet every demand at once,
/// each agent's units split freely among demands it is eligible for.
pub fn demands_feasible(supplies: &[Rational], demands: &[Demand]) -> bool {
    assign_demands(supplies, demands).is_some()
}

/// Like [`demands_feasible`], returning `amounts[agent][demand]` on success.
pub fn assign_demands(supplies: &[Rational], demands: &[Demand]) -> Option<Vec<Vec<Rational>>> {
    let n = supplies.len();
    let m = demands.len();
    let need: Rational = demands.iter().fold(Rational::zero(), |a, d| a + &d.amount);
    if need.is_zero() {
        return Some(vec![vec![Rational::zero(); m]; n]);
    }
    let have: Rational = supplies.iter().fold(Rational::zero(), |a, s| a + s);
    if have < need || demands.iter().any(|d| d.mask == 0 && d.amount.is_positive()) {
        return None;
    }
    let nodes = n + m + 2;
    let (s, t) = (n + m, n + m + 1);
    let mut cap = vec![vec![Rational::zero(); nodes]; nodes];
    for (i, sup) in supplies.iter().enumerate() {
        cap[s][i] = sup.clone();
    }
    for (k, d) in demands.iter().enumerate() {
        cap[n + k][t] = d.amount.clone();
        for (i, row) in cap.iter_mut().enumerate().take(n) {
            if d.mask >> i & 1 == 1 {
                row[n + k] = d.amount.clone();
            }
        }
    }
    let (value, residual) = max_flow_residual(cap.clone(), s, t);
    if value != need {
        return None;
    }
    Some(
        (0..n)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let f = &cap[i][n + k] - &residual[i][n + k];
                        if f.is_positive() {
                            f
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn simple_network() {
        let z = Rational::zero;
        let mut cap = vec![vec![z(); 4]; 4];
        cap[0][1] = int(3);
        cap[0][2] = int(2);
        cap[1][2] = int(1);
        cap[1][3] = int(2);
        cap[2][3] = int(3);
        assert_eq!(max_flow(cap, 0, 3), int(5));
    }

    #[test]
    fn assignment_feasibility() {
        // Agent 0 has 1 unit, agent 1 has 2; demand {0} needs 1, {0,1} needs 2.
        let sup = [int(1), int(2)];
        let ok = [
            Demand { mask: 0b01, amount: int(1) },
            Demand { mask: 0b11, amount: int(2) },
        ];
        assert!(demands_feasible(&sup, &ok));
        let too_much = [
            Demand { mask: 0b01, amount: int(1) },
            Demand { mask: 0b01, amount: ratio(1, 2) },
        ];
        assert!(!demands_feasible(&sup, &too_much));
        assert!(demands_feasible(&sup, &[]));
    }
}
