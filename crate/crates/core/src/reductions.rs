//! Instance generators built from unbounded knapsack and maximum edge
//! biclique, with brute-force deciders for cross-checking.
//!
//! The knapsack construction yields a one-agent game whose single-coalition
//! outcome is c-stable iff no multiset of items fits in the knapsack and
//! reaches the target. The biclique construction yields an outcome that is
//! r-stable iff the graph has no biclique with at least K edges.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{CoalitionStructure, Outcome, PartialCoalition, TaskType, Ttg};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Item {
    pub size: u64,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub items: Vec<Item>,
    pub capacity: u64,
    pub target: u64,
}

impl KnapsackInstance {
    /// Drops items that cannot matter: too large, worthless, or dominated
    /// by a no larger item worth more. Sorted by size.
    pub fn normalized(&self) -> Result<KnapsackInstance> {
        if self.items.iter().any(|it| it.size == 0) {
            return Err(Error::Invalid("item sizes must be positive".into()));
        }
        let mut items: Vec<Item> =
            self.items.iter().copied().filter(|it| it.value > 0 && it.size <= self.capacity).collect();
        items.sort_by(|a, b| a.size.cmp(&b.size).then(b.value.cmp(&a.value)));
        let mut kept: Vec<Item> = Vec::new();
        for it in items {
            if kept.iter().all(|k| k.value < it.value) {
                kept.push(it);
            }
        }
        // An item filling the whole knapsack is either a trivial yes or
        // dominated by the full-weight task added by the construction.
        if let Some(full) = kept.iter().find(|it| it.size == self.capacity) {
            if full.value >= self.target {
                return Err(Error::Invalid("an item alone reaches the target".into()));
            }
        }
        kept.retain(|it| it.size < self.capacity);
        if self.target < 2 || kept.iter().any(|it| it.value >= self.target) {
            return Err(Error::Invalid("target must exceed every item value and be at least 2".into()));
        }
        Ok(KnapsackInstance { items: kept, capacity: self.capacity, target: self.target })
    }

    /// Best total value of a multiset of items fitting the capacity, by
    /// exhaustive enumeration of item counts.
    pub fn brute_force_max(&self) -> u64 {
        fn rec(items: &[Item], room: u64) -> u64 {
            let Some((first, rest)) = items.split_first() else {
                return 0;
            };
            if first.size == 0 {
                return rec(rest, room);
            }
            (0..=room / first.size).map(|k| k * first.value + rec(rest, room - k * first.size)).max().unwrap_or(0)
        }
        rec(&self.items, self.capacity)
    }

    pub fn brute_force_yes(&self) -> bool {
        self.brute_force_max() >= self.target
    }
}

/// One agent of weight B, a task per item plus (B, Z - 1), and the outcome
/// in which the agent puts everything into one coalition paid Z - 1.
pub fn build_theorem6(instance: &KnapsackInstance) -> Result<(Ttg, Outcome)> {
    let inst = instance.normalized()?;
    let b = Rational::from_integer(inst.capacity.into());
    let mut tasks: Vec<TaskType> = inst
        .items
        .iter()
        .map(|it| TaskType::new(Rational::from_integer(it.size.into()), Rational::from_integer(it.value.into())))
        .collect();
    let sentinel = Rational::from_integer((inst.target - 1).into());
    tasks.push(TaskType::new(b.clone(), sentinel.clone()));
    let ttg = Ttg::new(vec![b.clone()], tasks)?;
    let outcome = Outcome::new(CoalitionStructure::new(vec![PartialCoalition::new(vec![b])]), vec![vec![sentinel]]);
    Ok((ttg, outcome))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BicliqueInstance {
    pub left: usize,
    pub right: usize,
    /// Edges as (left vertex, right vertex), 0-based.
    pub edges: Vec<(usize, usize)>,
    pub target: usize,
}

impl BicliqueInstance {
    fn validate(&self) -> Result<()> {
        if self.left == 0 || self.right == 0 {
            return Err(Error::Invalid("both sides need at least one vertex".into()));
        }
        if self.target == 0 {
            return Err(Error::Invalid("the biclique target must be at least 1".into()));
        }
        if self.left > 16 || self.right > 16 {
            return Err(Error::Invalid("sides are limited to 16 vertices".into()));
        }
        if let Some(e) = self.edges.iter().find(|(l, r)| *l >= self.left || *r >= self.right) {
            return Err(Error::Invalid(format!("edge ({}, {}) out of range", e.0 + 1, e.1 + 1)));
        }
        Ok(())
    }

    /// The same graph with the sides exchanged.
    pub fn swapped(&self) -> BicliqueInstance {
        BicliqueInstance {
            left: self.right,
            right: self.left,
            edges: self.edges.iter().map(|&(l, r)| (r, l)).collect(),
            target: self.target,
        }
    }

    fn has_edge(&self, l: usize, r: usize) -> bool {
        self.edges.contains(&(l, r))
    }

    /// Largest |L'|·|R'| over complete bipartite subgraphs, by enumerating
    /// every pair of vertex subsets.
    pub fn brute_force_max(&self) -> usize {
        let mut best = 0;
        for lm in 1u32..(1 << self.left) {
            for rm in 1u32..(1 << self.right) {
                let complete = (0..self.left)
                    .filter(|l| lm >> l & 1 == 1)
                    .all(|l| (0..self.right).filter(|r| rm >> r & 1 == 1).all(|r| self.has_edge(l, r)));
                if complete {
                    best = best.max(lm.count_ones() as usize * rm.count_ones() as usize);
                }
            }
        }
        best
    }

    pub fn brute_force_yes(&self) -> bool {
        self.brute_force_max() >= self.target
    }
}

/// Right vertices become agents 1..n-1 with weight k = |L|, plus a heavy
/// agent n; left vertices become k identical coalitions doing the big task.
/// An agent is paid 1 in a coalition it is adjacent to and M otherwise.
pub fn build_theorem8(instance: &BicliqueInstance) -> Result<(Ttg, Outcome)> {
    instance.validate()?;
    let inst = if instance.left > instance.right { instance.swapped() } else { instance.clone() };
    let k = inst.left as u64;
    let n = inst.right as u64 + 1;
    let m = k * k * n * n;
    let v = k * k * n * m;
    let int = |x: u64| Rational::from_integer(x.into());
    let heavy = k * (k * n - n + 1);
    let mut weights = vec![int(k); inst.right];
    weights.push(int(heavy));
    let tasks = vec![
        TaskType::new(int(k * n), int(v)),
        TaskType::new(int(inst.target as u64), int((n - 1) * k + 1)),
    ];
    let ttg = Ttg::new(weights, tasks)?;
    let mut coalitions = Vec::new();
    let mut payoffs = Vec::new();
    for j in 0..inst.left {
        let mut c = vec![rational::int(1); inst.right];
        c.push(int(k * n - n + 1));
        coalitions.push(PartialCoalition::new(c));
        let mut x: Vec<Rational> = (0..inst.right).map(|i| if inst.has_edge(j, i) { int(1) } else { int(m) }).collect();
        let rest = int(v) - rational::sum(&x);
        x.push(rest);
        payoffs.push(x);
    }
    Ok((ttg, Outcome::new(CoalitionStructure::new(coalitions), payoffs)))
}

/// Random knapsack instance with capacity in 2..=max_capacity, already
/// normalized and nondegenerate.
pub fn random_knapsack<R: Rng>(rng: &mut R, max_capacity: u64) -> KnapsackInstance {
    assert!(max_capacity >= 2, "capacity bound must be at least 2");
    loop {
        let capacity = rng.gen_range(2..=max_capacity);
        let count = rng.gen_range(1..=4);
        let items: Vec<Item> = (0..count)
            .map(|_| Item { size: rng.gen_range(1..capacity), value: rng.gen_range(1..=20) })
            .collect();
        let mut probe = KnapsackInstance { items, capacity, target: u64::MAX };
        let best = probe.brute_force_max();
        let top = probe.items.iter().map(|it| it.value).max().unwrap_or(0);
        // Targets around the optimum give both yes and no instances.
        let low = top.max(best.saturating_sub(3)) + 1;
        probe.target = rng.gen_range(low..=best + 3).max(2);
        if let Ok(inst) = probe.normalized() {
            return inst;
        }
    }
}

/// Random bipartite graph with sides of size 1..=max_side.
pub fn random_biclique<R: Rng>(rng: &mut R, max_side: usize) -> BicliqueInstance {
    let left = rng.gen_range(1..=max_side);
    let right = rng.gen_range(1..=max_side);
    let mut edges = Vec::new();
    for l in 0..left {
        for r in 0..right {
            if rng.gen_bool(0.6) {
                edges.push((l, r));
            }
        }
    }
    let target = rng.gen_range(1..=left * right);
    BicliqueInstance { left, right, edges, target }
}
