//! Acceptance run: one PASS/FAIL line per criterion, all exact.
//!
//! Criterion 9 has a documented failure: the seven-agent rule game's stated
//! outcome is not c-stable, because agents {2,3,6,7} can earn 202 on their
//! own (two valuable pairs plus the pooled small task) while being paid 201.
//! The line prints FAIL with that witness and the test asserts exactly this
//! failure, so any change in behaviour is noticed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::thread;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocf_core::convexity::{self, Falsification};
use ocf_core::corpus;
use ocf_core::deviations::{self, find_o_deviation, find_r_deviation, DeviationKind};
use ocf_core::fuzzy;
use ocf_core::generate::{self, GameBounds};
use ocf_core::lp::{self, Constraint, LinearProgram, LpResult, Relation, VarKind};
use ocf_core::model::{self, payoff_vector_n, structure_value};
use ocf_core::rational::{int, ratio};
use ocf_core::reductions;
use ocf_core::stability::{self, Witness};
use ocf_core::subsets;
use ocf_core::welfare::{self, Vstar};
use ocf_core::{CoalitionStructure, Game, Outcome, PartialCoalition, PayoffPolicy, Rational, Resolution, TaskType, Ttg};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn res() -> Resolution {
    Resolution::default()
}

fn ttg(weights: &[i64], tasks: &[(i64, i64)]) -> Ttg {
    Ttg::new(
        weights.iter().map(|&w| int(w)).collect(),
        tasks.iter().map(|&(t, u)| TaskType::new(int(t), int(u))).collect(),
    )
    .unwrap()
}

fn outcome(rows: &[&[i64]], pay: &[&[i64]]) -> Outcome {
    let c = |r: &[i64]| r.iter().map(|&v| int(v)).collect::<Vec<_>>();
    Outcome::new(
        CoalitionStructure::new(rows.iter().map(|r| PartialCoalition::new(c(r))).collect()),
        pay.iter().map(|r| c(r)).collect(),
    )
}

fn two_tasks() -> Ttg {
    ttg(&[4, 6], &[(5, 15), (4, 10)])
}

fn c1() -> Check {
    let g = ttg(&[2, 2, 2], &[(3, 1)]);
    let over = welfare::max_welfare_overlapping(&g).map_err(err)?.value;
    let (non, _) = welfare::max_welfare_nonoverlapping(&g).map_err(err)?;
    ensure(over == int(2) && non == int(1), || format!("overlapping {over}, nonoverlapping {non}"))?;
    Ok(format!("overlapping {over}, nonoverlapping {non}"))
}

fn c2() -> Check {
    let g = two_tasks();
    let x = outcome(&[&[1, 4], &[3, 2]], &[&[7, 8], &[9, 6]]);
    let y = outcome(&[&[1, 4], &[3, 2]], &[&[7, 8], &[8, 7]]);
    let p = payoff_vector_n(&x, 2).map_err(err)?;
    ensure(p == vec![int(16), int(14)], || format!("p(x) = {p:?}"))?;
    let vx = stability::ttg_membership(&g, &x).map_err(err)?;
    ensure(!vx.stable && vx.blocking_set() == Some(&[1][..]), || format!("x verdict {vx:?}"))?;
    let vy = stability::ttg_membership(&g, &y).map_err(err)?;
    ensure(vy.stable, || "y rejected".into())?;
    Ok("p(x) = (16, 14); x blocked by {2}; y accepted".into())
}

fn c3() -> Check {
    let g: Game = two_tasks().into();
    let y = outcome(&[&[1, 4], &[3, 2]], &[&[7, 8], &[8, 7]]);
    let x2 = outcome(&[&[2, 3], &[2, 3]], &[&[3, 12], &[12, 3]]);
    let z = outcome(&[&[4, 3], &[0, 3]], &[&[3, 12], &[0, 0]]);
    let y2 = outcome(&[&[2, 3], &[2, 3]], &[&[7, 8], &[8, 7]]);
    let d = find_r_deviation(&g, &y, &[1], res()).map_err(err)?.ok_or("no r-deviation from (CS, y)")?;
    d.verify(&g, &y)?;
    ensure(d.after == vec![int(17)] && d.before == vec![int(15)], || d.narrate())?;
    let v = deviations::core_membership(&g, &x2, DeviationKind::Refined, res()).map_err(err)?;
    ensure(v.stable, || "(CS', x') not r-stable".into())?;
    let d5 = find_r_deviation(&g, &z, &[0, 1], res()).map_err(err)?.ok_or("no r-deviation from (CS'', z)")?;
    d5.verify(&g, &z)?;
    let sum5: Rational = d5.after.iter().sum();
    ensure(sum5 == int(30), || format!("deviation pays {sum5}"))?;
    let d6 = find_o_deviation(&g, &x2, &[1], res()).map_err(err)?.ok_or("no o-deviation from (CS', x')")?;
    d6.verify(&g, &x2)?;
    ensure(d6.after == vec![int(17)] && d6.before == vec![int(15)], || d6.narrate())?;
    let vo = deviations::core_membership(&g, &y2, DeviationKind::Optimistic, res()).map_err(err)?;
    ensure(vo.stable, || "(CS', y) not o-stable".into())?;
    Ok("17 > 15 r-deviation; x' r-stable; z deviation pays 30; 7+10 > 15 o-deviation; y o-stable".into())
}

/// 200 seeded TTGs (n <= 4, w(N) <= 8, m <= 2) with 20 outcomes each.
fn sweep() -> Vec<(Ttg, Vec<Outcome>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(1..=4);
            let bounds = GameBounds {
                agents: n,
                max_weight: 5,
                max_total_weight: Some(8),
                tasks: rng.gen_range(1..=2),
                max_utility: 10,
            };
            let g = generate::random_ttg(&mut rng, &bounds).unwrap();
            let game: Game = g.clone().into();
            let outcomes = (0..20).map(|_| generate::random_outcome(&mut rng, &game, res()).unwrap()).collect();
            (g, outcomes)
        })
        .collect()
}

fn c4(sweep: &[(Ttg, Vec<Outcome>)]) -> Check {
    let (mut c, mut r, mut o) = (0, 0, 0);
    for (g, outcomes) in sweep {
        let game: Game = g.clone().into();
        for out in outcomes {
            let cs = deviations::core_membership(&game, out, DeviationKind::Conservative, res()).map_err(err)?.stable;
            let exact = stability::ttg_membership(g, out).map_err(err)?.stable;
            ensure(cs == exact, || format!("c-search and exact c-membership disagree on {game:?} {out:?}"))?;
            let rs = deviations::core_membership(&game, out, DeviationKind::Refined, res()).map_err(err)?.stable;
            let os = deviations::core_membership(&game, out, DeviationKind::Optimistic, res()).map_err(err)?.stable;
            ensure(!(os && !rs), || format!("o-stable but not r-stable: {game:?} {out:?}"))?;
            ensure(!(rs && !cs), || format!("r-stable but not c-stable: {game:?} {out:?}"))?;
            c += usize::from(cs);
            r += usize::from(rs);
            o += usize::from(os);
        }
    }
    Ok(format!("4000 outcomes: {c} c-stable, {r} r-stable, {o} o-stable; chain holds"))
}

fn c5(sweep: &[(Ttg, Vec<Outcome>)]) -> Check {
    let mut accepted = 0;
    for (g, outcomes) in sweep {
        let game: Game = g.clone().into();
        let best = welfare::max_welfare_overlapping(g).map_err(err)?.value;
        for out in outcomes {
            if stability::ttg_membership(g, out).map_err(err)?.stable {
                let v = structure_value(&game, &out.structure).map_err(err)?;
                ensure(v == best, || format!("stable outcome worth {v}, optimum {best}"))?;
                accepted += 1;
            }
        }
    }
    ensure(accepted > 0, || "no accepted outcomes in the sweep".into())?;
    Ok(format!("{accepted} accepted outcomes all welfare-maximizing"))
}

fn c6() -> Check {
    let g = ttg(&[2, 2, 2], &[(3, 1)]);
    let mut candidates = 0;
    for partition in subsets::set_partitions(3) {
        // Integer imputations: each block worth 1 pays one member 1.
        let values: Vec<Rational> = partition.iter().map(|b| g.best_task_value(&g.weight_of(b))).collect();
        let mut choices: Vec<Vec<Option<usize>>> = vec![vec![]];
        for (b, v) in partition.iter().zip(&values) {
            let opts: Vec<Option<usize>> = if v.is_zero() { vec![None] } else { b.iter().map(|&j| Some(j)).collect() };
            choices = choices
                .into_iter()
                .flat_map(|c| opts.iter().map(move |o| [c.clone(), vec![*o]].concat()))
                .collect();
        }
        for choice in choices {
            let mut p = vec![int(0); 3];
            for j in choice.into_iter().flatten() {
                p[j] = int(1);
            }
            let v = stability::nonoverlapping_core_check(&g, &partition, &p).map_err(err)?;
            ensure(!v.stable, || format!("partition {partition:?} with {p:?} accepted"))?;
            candidates += 1;
        }
        let s = stability::stabilize_partition(&g, &partition).map_err(err)?;
        ensure(!s.stable, || format!("partition {partition:?} stabilizable"))?;
    }
    let x = Outcome::new(
        CoalitionStructure::new(vec![
            PartialCoalition::new(vec![int(2), int(1), int(0)]),
            PartialCoalition::new(vec![int(0), int(1), int(2)]),
        ]),
        vec![vec![ratio(2, 3), ratio(1, 3), int(0)], vec![int(0), ratio(1, 3), ratio(2, 3)]],
    );
    let game: Game = g.into();
    model::validate_outcome(&game, &x, PayoffPolicy::Nonnegative, res()).map_err(err)?;
    let v = deviations::core_membership(&game, &x, DeviationKind::Optimistic, res()).map_err(err)?;
    ensure(v.stable, || "stated outcome not o-stable".into())?;
    Ok(format!("{candidates} integer candidates rejected, 5 partitions infeasible, stated outcome o-stable"))
}

fn c7() -> Check {
    let g = ttg(&[9, 1, 1], &[(8, 100), (2, 1)]);
    let v = stability::stabilize(&g).map_err(err)?;
    ensure(!v.stable, || "stabilize found a c-core outcome".into())?;
    if let Some(Witness::Empty(cert)) = &v.witness {
        ensure(cert.verify(3), || "emptiness certificate does not verify".into())?;
    }
    let p = vec![int(100), ratio(1, 2), ratio(1, 2)];
    let part = stability::nonoverlapping_core_check(&g, &[vec![0], vec![1, 2]], &p).map_err(err)?;
    ensure(part.stable, || "partition {1}{2,3} rejected".into())?;
    Ok("c-core empty; {1}{2,3} with (100, 1/2, 1/2) stable".into())
}

fn c8() -> Check {
    let g = ttg(&[10, 10], &[(20, 20), (7, 9)]);
    for k in 0..=200 {
        let p = vec![ratio(k, 10), ratio(200 - k, 10)];
        let rep = fuzzy::aubin_core_check(&g, &p).map_err(err)?;
        ensure(!rep.holds, || format!("Aubin core holds at {p:?}"))?;
    }
    let rep = fuzzy::aubin_core_check(&g, &[int(10), int(10)]).map_err(err)?;
    ensure(rep.witness == Some(vec![ratio(7, 10), ratio(7, 10)]), || format!("witness {:?}", rep.witness))?;
    ensure(rep.granted == Some(int(14)) && rep.value == Some(int(18)), || format!("{rep:?}"))?;
    ensure(fuzzy::f_core_check(&g, &[int(10), int(10)]).map_err(err)?.holds, || "f-core fails".into())?;
    let game: Game = g.into();
    let o = outcome(&[&[10, 10]], &[&[10, 10]]);
    let v = deviations::core_membership(&game, &o, DeviationKind::Optimistic, res()).map_err(err)?;
    ensure(v.stable, || "stated outcome not o-stable".into())?;
    Ok("Aubin fails at all 201 efficient vectors, witness (7/10, 7/10) 14 < 18; f-core holds; o-stable".into())
}

type Blocking = Option<(Vec<usize>, Rational, Rational)>;

/// Returns PASS detail for the deviation half, the covering-check verdict, and
/// v* and payoff of the documented blocking set {2,3,6,7}.
fn c9() -> (Check, Blocking, (Rational, Rational)) {
    let game: Game = corpus::seven_agent_game().into();
    let x = corpus::seven_agent_outcome();
    let documented = {
        let oracle = Vstar::new(&game, res()).unwrap();
        let p = payoff_vector_n(&x, 7).unwrap();
        let set = [1, 2, 5, 6];
        (oracle.value(&set), set.iter().map(|&j| &p[j]).sum())
    };
    let blocking = match stability::check_theorem1(&game, &x, res()) {
        Ok(v) => match v.witness {
            Some(Witness::Blocking { set, value, payoff }) if !v.stable => Some((set, value, payoff)),
            _ => None,
        },
        Err(e) => return (Err(err(e)), None, documented),
    };
    let second = (|| -> Check {
        // In the stated outcome y_5^4 = 1 > 0; the partners of 6 and 7 are 2 and 3.
        let d = find_r_deviation(&game, &x, &[1, 2, 5, 6], res()).map_err(err)?.ok_or("no r-deviation")?;
        d.verify(&game, &x)?;
        ensure(d.deviators == vec![1, 2, 5, 6], || d.narrate())?;
        let total: Rational = d.after.iter().sum();
        Ok(format!("r-deviation by {{2,3,6,7}} pays {total} > 201"))
    })();
    (second, blocking, documented)
}

fn c10() -> Check {
    let game: Game = corpus::three_agent_rule_game().into();
    let x = corpus::three_agent_rule_outcome();
    let v = deviations::core_membership(&game, &x, DeviationKind::Refined, res()).map_err(err)?;
    ensure(v.stable, || "stated outcome not r-stable".into())?;
    let d = find_o_deviation(&game, &x, &[1, 2], res()).map_err(err)?.ok_or("no o-deviation by {2,3}")?;
    d.verify(&game, &x)?;
    Ok(format!("r-stable; o-deviation by {{2,3}}: {} -> {}", d.before.iter().sum::<Rational>(), d.after.iter().sum::<Rational>()))
}

/// Best utility of a multiset of tasks with total threshold <= budget, by
/// enumerating copy counts.
fn brute_knapsack(tasks: &[(u64, u64)], budget: u64) -> u64 {
    match tasks.split_first() {
        None => 0,
        Some((&(t, u), rest)) => (0..=budget / t).map(|k| k * u + brute_knapsack(rest, budget - k * t)).max().unwrap(),
    }
}

fn raw_ttg(rng: &mut ChaCha8Rng, n: usize, max_w: u64) -> (Vec<u64>, Vec<(u64, u64)>, Ttg) {
    let w: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=max_w)).collect();
    let total: u64 = w.iter().sum();
    let tasks: Vec<(u64, u64)> = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(1..=total.min(12)), rng.gen_range(1..=10)))
        .collect();
    let g = Ttg::new(
        w.iter().map(|&x| int(x as i64)).collect(),
        tasks.iter().map(|&(t, u)| TaskType::new(int(t as i64), int(u as i64))).collect(),
    )
    .unwrap();
    (w, tasks, g)
}

/// The c-core LP over payoff vectors with all 2^n covering rows.
fn full_payoff_lp(n: usize, value: &dyn Fn(&[usize]) -> Rational) -> LinearProgram {
    let mut lp = LinearProgram::new();
    for i in 0..n {
        lp.add_variable(format!("p{i}"), VarKind::NonNegative);
    }
    let all: Vec<usize> = (0..n).collect();
    lp.add_sparse(&all.iter().map(|&j| (j, int(1))).collect::<Vec<_>>(), Relation::Eq, value(&all));
    for s in subsets::lexicographic(n) {
        lp.add_sparse(&s.iter().map(|&j| (j, int(1))).collect::<Vec<_>>(), Relation::Ge, value(&s));
    }
    lp
}

fn c11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // (a) exact membership against 2^n brute force.
    let mut mismatches = 0;
    let mut unstable = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let (w, tasks, g) = raw_ttg(&mut rng, n, 4);
        let game: Game = g.clone().into();
        let o = generate::random_outcome(&mut rng, &game, res()).map_err(err)?;
        let p = payoff_vector_n(&o, n).map_err(err)?;
        let mut memo: HashMap<u64, u64> = HashMap::new();
        let brute_stable = (1u64..1 << n).all(|m| {
            let weight: u64 = (0..n).filter(|j| m >> j & 1 == 1).map(|j| w[j]).sum();
            let v = *memo.entry(weight).or_insert_with(|| brute_knapsack(&tasks, weight));
            let paid: Rational = (0..n).filter(|j| m >> j & 1 == 1).map(|j| p[j].clone()).sum();
            paid >= int(v as i64)
        });
        let v = stability::ttg_membership(&g, &o).map_err(err)?;
        if v.stable != brute_stable {
            mismatches += 1;
        }
        unstable += usize::from(!brute_stable);
    }
    ensure(mismatches == 0, || format!("{mismatches} membership mismatches"))?;
    // (b) knapsack profile against multiset enumeration.
    for _ in 0..100 {
        let (_, tasks, g) = raw_ttg(&mut rng, 3, 4);
        let profile = welfare::knapsack_profile(&g, 12).map_err(err)?;
        for budget in 0..=12u64 {
            let want = int(brute_knapsack(&tasks, budget) as i64);
            ensure(*profile.value(budget as usize) == want, || format!("U[{budget}] for {tasks:?}"))?;
        }
    }
    // (c) constraint generation against the fully materialized LP.
    let mut feasible = 0;
    for _ in 0..60 {
        let n = rng.gen_range(1..=8);
        let (_, _, g) = raw_ttg(&mut rng, n, 3);
        let game: Game = g.clone().into();
        let oracle = Vstar::new(&game, res()).map_err(err)?;
        let value = |s: &[usize]| oracle.value(s);
        let full = lp::solve(&full_payoff_lp(n, &value));
        let all: Vec<usize> = (0..n).collect();
        let mut base = LinearProgram::new();
        for i in 0..n {
            base.add_variable(format!("p{i}"), VarKind::NonNegative);
        }
        base.add_sparse(&all.iter().map(|&j| (j, int(1))).collect::<Vec<_>>(), Relation::Eq, value(&all));
        let lex = subsets::lexicographic(n);
        let sep = lp::solve_with_separation(base, |p| {
            lex.iter().find(|s| s.iter().map(|&j| p[j].clone()).sum::<Rational>() < value(s)).map(|s| {
                let coeffs = (0..n).map(|j| if s.contains(&j) { int(1) } else { int(0) }).collect();
                Constraint::new(coeffs, Relation::Ge, value(s))
            })
        })
        .map_err(err)?;
        ensure(full.is_feasible() == sep.result.is_feasible(), || format!("LP routes disagree on {g:?}"))?;
        let dp = stability::stabilize(&g).map_err(err)?.stable;
        ensure(dp == full.is_feasible(), || format!("stabilize disagrees with the full LP on {g:?}"))?;
        if let Some(a) = sep.result.assignment() {
            ensure(full_payoff_lp(n, &value).is_feasible(a), || "separated point violates the full LP".into())?;
            feasible += 1;
        }
    }
    Ok(format!(
        "membership 100/100 ({unstable} unstable), knapsack 1300 budgets, LP 60/60 ({feasible} feasible); zero mismatches"
    ))
}

fn c12() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut yes6 = 0;
    for _ in 0..50 {
        let inst = reductions::random_knapsack(&mut rng, 25);
        let (g, o) = reductions::build_theorem6(&inst).map_err(err)?;
        let stable = stability::ttg_membership(&g, &o).map_err(err)?.stable;
        let yes = inst.brute_force_yes();
        ensure(stable == !yes, || format!("knapsack {inst:?}: stable {stable}, yes {yes}"))?;
        yes6 += usize::from(yes);
    }
    let mut yes8 = 0;
    for _ in 0..10 {
        let inst = reductions::random_biclique(&mut rng, 3);
        let (g, o) = reductions::build_theorem8(&inst).map_err(err)?;
        let game: Game = g.into();
        let stable = deviations::core_membership(&game, &o, DeviationKind::Refined, res()).map_err(err)?.stable;
        let yes = inst.brute_force_yes();
        ensure(stable == !yes, || format!("biclique {inst:?}: r-stable {stable}, yes {yes}"))?;
        yes8 += usize::from(yes);
    }
    Ok(format!("knapsack 50/50 ({yes6} yes), biclique 10/10 ({yes8} yes); zero mismatches"))
}

/// Materialized LP over per-coalition payoffs with every covering row.
fn full_structure_feasible(oracle: &Vstar<'_>, cs: &CoalitionStructure) -> bool {
    let game = oracle.game();
    let n = game.n();
    let mut lp = LinearProgram::new();
    let mut vars = Vec::new();
    for (i, c) in cs.coalitions.iter().enumerate() {
        for j in c.support() {
            lp.add_variable(format!("x{i}_{j}"), VarKind::NonNegative);
            vars.push((i, j));
        }
    }
    for (i, c) in cs.coalitions.iter().enumerate() {
        let terms: Vec<(usize, Rational)> =
            vars.iter().enumerate().filter(|(_, v)| v.0 == i).map(|(k, _)| (k, int(1))).collect();
        lp.add_sparse(&terms, Relation::Eq, game.value(c).unwrap());
    }
    for s in subsets::lexicographic(n) {
        let terms: Vec<(usize, Rational)> =
            vars.iter().enumerate().filter(|(_, v)| s.contains(&v.1)).map(|(k, _)| (k, int(1))).collect();
        lp.add_sparse(&terms, Relation::Ge, oracle.value(&s));
    }
    matches!(lp::solve(&lp), LpResult::Feasible { .. })
}

fn c13(sweep: &[(Ttg, Vec<Outcome>)]) -> Check {
    let (mut feasible, mut certified) = (0, 0);
    for (g, outcomes) in sweep {
        let game: Game = g.clone().into();
        let oracle = Vstar::new(&game, res()).map_err(err)?;
        for out in outcomes {
            let cs = &out.structure;
            let v = stability::stabilize_structure_with(&oracle, cs, PayoffPolicy::Nonnegative).map_err(err)?;
            let exhaustive = full_structure_feasible(&oracle, cs);
            ensure(v.stable == exhaustive, || format!("structure {cs:?}: separation {}, full {exhaustive}", v.stable))?;
            match (&v.witness, v.stable) {
                (Some(Witness::Stabilizer(o)), true) => {
                    model::validate_outcome_with(&oracle, o, PayoffPolicy::Nonnegative).map_err(err)?;
                    feasible += 1;
                }
                (Some(Witness::Certificate(b)), false) => {
                    ensure(b.satisfies_equalities(cs), || format!("certificate equalities fail on {cs:?}"))?;
                    ensure(b.violates_balancedness(&oracle, cs).map_err(err)?, || {
                        format!("certificate is not strictly violated on {cs:?}")
                    })?;
                    certified += 1;
                }
                _ => return Err(format!("verdict without evidence on {cs:?}")),
            }
        }
    }
    Ok(format!("4000 structures: {feasible} stabilizable, {certified} certified unstabilizable; all agree"))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn c14() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut convex = 0;
    let mut tried = 0;
    while convex < 20 {
        tried += 1;
        ensure(tried <= 2000, || format!("only {convex} convex games in 2000 draws"))?;
        let n = rng.gen_range(1..=3);
        let bounds = GameBounds { agents: n, max_weight: 3, max_total_weight: Some(5), tasks: rng.gen_range(1..=2), max_utility: 10 };
        let g = generate::random_ttg(&mut rng, &bounds).map_err(err)?;
        let game: Game = g.clone().into();
        if convexity::falsify_convexity(&game, res(), 1).map_err(err)?.found() {
            continue;
        }
        convex += 1;
        for order in permutations(n) {
            let o = convexity::construct_core_element(&game, &order, res()).map_err(err)?;
            let v = stability::ttg_membership(&g, &o).map_err(err)?;
            ensure(v.stable, || format!("construction with order {order:?} rejected on {g:?}"))?;
        }
    }
    let heavy: Game = ttg(&[9, 1, 1], &[(8, 100), (2, 1)]).into();
    let f = convexity::falsify_convexity(&heavy, res(), 1).map_err(err)?;
    let Falsification::Violation(v) = &f else { return Err("no violation on the nonconvex game".into()) };
    ensure(!v.r.is_empty(), || f.to_string())?;
    Ok(format!("20 convex games ({tried} drawn), every ordering's construction c-stable; violation found on nonconvex game"))
}

fn run<'scope, F>(s: &'scope thread::Scope<'scope, '_>, f: F) -> thread::ScopedJoinHandle<'scope, Check>
where
    F: FnOnce() -> Check + Send + 'scope,
{
    thread::Builder::new().stack_size(64 << 20).spawn_scoped(s, f).expect("thread spawns")
}

#[test]
fn acceptance() {
    let sweep = sweep();
    let sw = &sweep;
    let (mut results, c9_out) = thread::scope(|s| {
        let handles = vec![
            (1, "three-agent welfare", run(s, c1)),
            (2, "two-agent c-core membership", run(s, c2)),
            (3, "two-agent r- and o-deviations (D=1, U=3)", run(s, c3)),
            (4, "containment chain o => r => c", run(s, move || c4(sw))),
            (5, "stable outcomes maximize welfare", run(s, move || c5(sw))),
            (6, "crisp core empty, o-core nonempty", run(s, c6)),
            (7, "c-core empty, crisp core nonempty", run(s, c7)),
            (8, "Aubin core empty, f-core and o-core nonempty", run(s, c8)),
            (10, "r-stable but o-unstable rule game", run(s, c10)),
            (11, "oracle equivalences", run(s, c11)),
            (12, "reduction correctness", run(s, c12)),
            (13, "structure stabilization and certificates", run(s, move || c13(sw))),
            (14, "convex games: construction and falsification", run(s, c14)),
        ];
        let c9_handle = thread::Builder::new().stack_size(64 << 20).spawn_scoped(s, c9).unwrap();
        let results: Vec<(usize, &str, Check)> =
            handles.into_iter().map(|(k, name, h)| (k, name, h.join().unwrap_or_else(|_| Err("panicked".into())))).collect();
        (results, c9_handle.join().expect("criterion 9 runs"))
    });

    let (second, blocking, documented) = c9_out;
    let c9_line: Check = match (&blocking, &second) {
        (None, Ok(d)) => Ok(format!("stated outcome accepted; {d}")),
        (Some((set, value, payoff)), d) => Err(format!(
            "stated outcome rejected: {} secures {value} but is paid {payoff}, as does {{2,3,6,7}} ({} vs {}); second half: {}",
            subsets::format_one_based(set),
            documented.0,
            documented.1,
            match d {
                Ok(d) => format!("PASS ({d})"),
                Err(e) => format!("FAIL ({e})"),
            }
        )),
        (None, Err(e)) => Err(e.clone()),
    };
    results.push((9, "seven-agent rule game (covering check, r-deviation)", c9_line));
    results.sort_by_key(|r| r.0);

    let mut report = String::new();
    for (k, name, r) in &results {
        match r {
            Ok(d) => writeln!(report, "PASS {k:>2} {name}: {d}").unwrap(),
            Err(e) => writeln!(report, "FAIL {k:>2} {name}: {e}").unwrap(),
        }
    }
    print!("{report}");

    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    assert!(second.is_ok(), "criterion 9 deviation half failed: {second:?}");
    assert_eq!(documented, (int(202), int(201)), "criterion 9's documented failure changed");
    assert!(
        blocking.as_ref().is_some_and(|(_, v, p)| v > p),
        "criterion 9's documented failure changed: {blocking:?}"
    );
    assert_eq!(failed, vec![9], "unexpected criterion failures:\n{report}");
}
