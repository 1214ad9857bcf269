//! Randomized invariants over small games.

use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ocf_core::convexity;
use ocf_core::deviations::{self, DeviationKind};
use ocf_core::fuzzy;
use ocf_core::generate::{self, GameBounds};
use ocf_core::model::{self, payoff_vector_n, structure_value, Violation};
use ocf_core::rational::int;
use ocf_core::stability::{self, Witness};
use ocf_core::welfare::{self, Vstar};
use ocf_core::{Error, Game, Outcome, PartialCoalition, PayoffPolicy, Rational, Resolution, TaskType, Ttg};

fn ttg_from(weights: Vec<u64>, tasks: Vec<(u64, u64)>) -> Ttg {
    Ttg::new(
        weights.into_iter().map(|w| int(w as i64)).collect(),
        tasks.into_iter().map(|(t, u)| TaskType::new(int(t as i64), int(u as i64))).collect(),
    )
    .unwrap()
}

/// TTGs with up to `n` agents of weight at most `w` and up to three tasks.
fn ttgs(n: usize, w: u64) -> impl Strategy<Value = Ttg> {
    (prop::collection::vec(1..=w, 1..=n), prop::collection::vec((1..=w * n as u64, 0u64..=10), 1..=3))
        .prop_map(|(weights, tasks)| ttg_from(weights, tasks))
}

fn rule_games(n: usize) -> impl Strategy<Value = Game> {
    any::<u64>().prop_map(move |seed| {
        let mut b = GameBounds::new(n, 3, 2);
        b.max_total_weight = Some(6);
        generate::generate_game(seed, &b, true).unwrap()
    })
}

fn outcome_of(game: &Game, seed: u64, res: Resolution) -> Outcome {
    generate::random_outcome(&mut ChaCha8Rng::seed_from_u64(seed), game, res).unwrap()
}

/// Integer coalition within the weights, picked by `picks`.
fn coalition_from(weights: &[Rational], picks: &[u64]) -> Vec<Rational> {
    weights
        .iter()
        .zip(picks.iter().cycle())
        .map(|(w, &k)| {
            let top = w.floor().to_integer();
            Rational::from_integer(num_bigint::BigInt::from(k) % (top + 1))
        })
        .collect()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn res() -> Resolution {
    Resolution::default()
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn value_is_monotone(g in ttgs(4, 5), rg in rule_games(3), a in prop::collection::vec(0u64..6, 4), b in prop::collection::vec(0u64..6, 4)) {
        for game in [Game::from(g), rg] {
            let low = coalition_from(game.weights(), &a);
            let extra = coalition_from(game.weights(), &b);
            let high: Vec<Rational> = low
                .iter()
                .zip(&extra)
                .zip(game.weights())
                .map(|((l, e), w)| (l + e).min(w.clone()))
                .collect();
            let v_low = game.value(&PartialCoalition::new(low)).unwrap();
            let v_high = game.value(&PartialCoalition::new(high)).unwrap();
            prop_assert!(v_low <= v_high);
        }
        prop_assert!(Game::from(ttg_from(vec![1], vec![(1, 1)])).value(&PartialCoalition::zero(1)).unwrap().is_zero());
    }

    #[test]
    fn task_normalization_keeps_values(weights in prop::collection::vec(1u64..=5, 1..=4), tasks in prop::collection::vec((1u64..=20, 0u64..=10), 1..=5), total in 0u64..=20) {
        let g = ttg_from(weights, tasks.clone());
        let raw = tasks.iter().filter(|(t, _)| *t <= total).map(|&(_, u)| u).max().unwrap_or(0);
        prop_assert_eq!(g.best_task_value(&int(total as i64)), int(raw as i64));
        let listed = g.tasks();
        prop_assert!(listed.windows(2).all(|p| p[0].threshold < p[1].threshold && p[0].utility < p[1].utility));
    }

    #[test]
    fn payoffs_sum_to_structure_value(g in ttgs(4, 4), rg in rule_games(3), seed in any::<u64>()) {
        for game in [Game::from(g), rg] {
            let o = outcome_of(&game, seed, res());
            let p = payoff_vector_n(&o, game.n()).unwrap();
            let total: Rational = p.iter().sum();
            prop_assert_eq!(total, structure_value(&game, &o.structure).unwrap());
        }
    }

    #[test]
    fn validation_flags_built_violations(g in ttgs(4, 4), seed in any::<u64>()) {
        let game: Game = g.into();
        let o = outcome_of(&game, seed, res());
        prop_assert!(model::validate_outcome(&game, &o, PayoffPolicy::Nonnegative, res()).is_ok());
        let Some(i) = (0..o.structure.len()).find(|&i| !o.structure.coalitions[i].is_zero()) else {
            return Ok(());
        };
        let mut bumped = o.clone();
        let j = o.structure.coalitions[i].support()[0];
        bumped.payoffs[i][j] += Rational::one();
        let err = model::validate_outcome(&game, &bumped, PayoffPolicy::Nonnegative, res()).unwrap_err();
        let flagged = matches!(err, Error::Validation(v) if v.iter().any(|x| matches!(x, Violation::RowSum { coalition, .. } if *coalition == i)));
        prop_assert!(flagged);
        if let Some(k) = (0..game.n()).find(|&k| o.structure.coalitions[i].get(k).is_zero()) {
            let mut leaked = o.clone();
            leaked.payoffs[i][k] = Rational::one();
            leaked.payoffs[i][j] -= Rational::one();
            let err = model::validate_outcome(&game, &leaked, PayoffPolicy::AllowNegative, res()).unwrap_err();
            let flagged = matches!(err, Error::Validation(v) if v.contains(&Violation::NonContributorPaid { coalition: i, agent: k }));
            prop_assert!(flagged);
        }
    }

    #[test]
    fn knapsack_profile_is_nondecreasing(g in ttgs(4, 5)) {
        let total = g.total_weight().to_integer().try_into().unwrap();
        let profile = welfare::knapsack_profile(&g, total).unwrap();
        let u = profile.values();
        prop_assert!(u[0].is_zero());
        prop_assert!(u.windows(2).all(|p| p[0] <= p[1]));
        for t in g.tasks() {
            let w: usize = t.threshold.to_integer().try_into().unwrap();
            if w <= total {
                prop_assert!(u[w] >= t.utility);
            }
        }
    }

    #[test]
    fn welfare_optima_are_consistent(g in ttgs(5, 4)) {
        let over = welfare::max_welfare_overlapping(&g).unwrap();
        let (crisp, _) = welfare::max_welfare_nonoverlapping(&g).unwrap();
        prop_assert!(over.value >= crisp);
        let game: Game = g.into();
        model::validate_structure(&game, &over.structure).unwrap();
        prop_assert_eq!(structure_value(&game, &over.structure).unwrap(), over.value);
    }

    #[test]
    fn membership_checks_agree(g in ttgs(8, 3), seed in any::<u64>()) {
        let game: Game = g.clone().into();
        let o = outcome_of(&game, seed, res());
        let fast = stability::ttg_membership(&g, &o).unwrap();
        let direct = stability::check_theorem1(&game, &o, res()).unwrap();
        prop_assert_eq!(fast.stable, direct.stable);
        if let Some(Witness::Blocking { set, value, payoff }) = &fast.witness {
            let p = payoff_vector_n(&o, g.n()).unwrap();
            prop_assert!(value > payoff);
            prop_assert_eq!(payoff, &set.iter().map(|&j| &p[j]).sum::<Rational>());
            prop_assert_eq!(value, &welfare::vstar(&game, set, res()).unwrap());
        }
    }

    #[test]
    fn stabilize_returns_core_outcomes(g in ttgs(6, 4)) {
        let v = stability::stabilize(&g).unwrap();
        match &v.witness {
            Some(Witness::Stabilizer(o)) => {
                prop_assert!(v.stable);
                prop_assert!(stability::ttg_membership(&g, o).unwrap().stable);
            }
            Some(Witness::Empty(cert)) => prop_assert!(!v.stable && cert.verify(g.n())),
            other => prop_assert!(false, "unexpected witness {:?}", other),
        }
    }

    #[test]
    fn f_core_matches_membership_on_optimal_outcomes(g in ttgs(6, 3), seed in any::<u64>()) {
        let game: Game = g.clone().into();
        let o = outcome_of(&game, seed, res());
        let best = welfare::max_welfare_overlapping(&g).unwrap().value;
        prop_assume!(structure_value(&game, &o.structure).unwrap() == best);
        let p = payoff_vector_n(&o, g.n()).unwrap();
        prop_assert_eq!(fuzzy::f_core_check(&g, &p).unwrap().holds, stability::ttg_membership(&g, &o).unwrap().stable);
    }

    #[test]
    fn fuzzy_value_is_monotone_and_crisp_exact(g in ttgs(4, 5), a in prop::collection::vec(0u64..=4, 4), b in prop::collection::vec(0u64..=4, 4)) {
        let n = g.n();
        let low: Vec<Rational> = a.iter().take(n).map(|&x| Rational::new(x.into(), 4.into())).collect();
        let high: Vec<Rational> = a.iter().zip(&b).take(n).map(|(&x, &y)| Rational::new(x.max(y).into(), 4.into())).collect();
        prop_assert!(fuzzy::fuzzy_value(&g, &low).unwrap() <= fuzzy::fuzzy_value(&g, &high).unwrap());
        let set: Vec<usize> = (0..n).filter(|&j| a[j] >= 2).collect();
        let crisp: Vec<Rational> = (0..n).map(|j| if set.contains(&j) { Rational::one() } else { Rational::zero() }).collect();
        prop_assert_eq!(fuzzy::fuzzy_value(&g, &crisp).unwrap(), welfare::vstar(&g.clone().into(), &set, res()).unwrap());
    }

    #[test]
    fn construction_is_always_a_valid_outcome(g in ttgs(3, 3), rg in rule_games(3), order_seed in 0usize..6) {
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for game in [Game::from(g), rg] {
            let ordering: Vec<usize> = orders[order_seed].iter().copied().filter(|&j| j < game.n()).collect();
            let o = convexity::construct_core_element(&game, &ordering, res()).unwrap();
            let checked = model::validate_outcome(&game, &o, PayoffPolicy::Nonnegative, res());
            prop_assert!(checked.is_ok(), "{:?} on {:?}", checked, o);
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn ttg_vstar_matches_rule_encoding(g in ttgs(3, 3)) {
        let game: Game = g.clone().into();
        let rules: Game = g.to_rules().into();
        let cap: usize = g.total_weight().to_integer().try_into().unwrap();
        let exact = Resolution::new(cap, 1).unwrap();
        let (a, b) = (Vstar::new(&game, exact).unwrap(), Vstar::new(&rules, exact).unwrap());
        for mask in 1u64..(1 << g.n()) {
            prop_assert_eq!(a.value_mask(mask), b.value_mask(mask));
        }
    }

    #[test]
    fn containment_chain_holds(g in ttgs(3, 3), rg in rule_games(3), seed in any::<u64>()) {
        for game in [Game::from(g), rg] {
            let o = outcome_of(&game, seed, res());
            let verdict = |kind| deviations::core_membership(&game, &o, kind, res()).unwrap();
            let (c, r, op) = (verdict(DeviationKind::Conservative), verdict(DeviationKind::Refined), verdict(DeviationKind::Optimistic));
            prop_assert!(!op.stable || r.stable);
            prop_assert!(!r.stable || c.stable);
            for v in [&c, &r, &op] {
                if let Some(Witness::Deviation(d)) = &v.witness {
                    prop_assert!(d.verify(&game, &o).is_ok(), "{}", d.narrate());
                    prop_assert!(d.before.iter().zip(&d.after).all(|(b, a)| a > b));
                }
            }
            if let Some(t) = game.as_ttg() {
                prop_assert_eq!(c.stable, stability::ttg_membership(t, &o).unwrap().stable);
            }
        }
    }

    #[test]
    fn c_fast_path_matches_rule_search(g in ttgs(4, 2), seed in any::<u64>()) {
        let game: Game = g.clone().into();
        let rules: Game = g.to_rules().into();
        let cap: usize = g.total_weight().to_integer().try_into().unwrap();
        let exact = Resolution::new(cap, 1).unwrap();
        let o = outcome_of(&game, seed, res());
        for mask in 1u64..(1 << g.n()) {
            let set: Vec<usize> = (0..g.n()).filter(|&j| mask >> j & 1 == 1).collect();
            let fast = deviations::find_c_deviation(&game, &o, &set, exact).unwrap();
            let generic = deviations::find_c_deviation(&rules, &o, &set, exact).unwrap();
            prop_assert_eq!(fast.is_some(), generic.is_some(), "deviators {:?}", set);
        }
    }
}
