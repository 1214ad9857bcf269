use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use ocf_bench::{outcome, rule_game, ttg};
use ocf_core::deviations::{self, DeviationKind};
use ocf_core::stability;
use ocf_core::welfare;
use ocf_core::{Game, Resolution};

fn knapsack(c: &mut Criterion) {
    let mut group = c.benchmark_group("knapsack_profile");
    for max_weight in [10u64, 100, 1000] {
        let g = ttg(1, 8, max_weight);
        let total = g.total_weight().to_integer().try_into().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(max_weight), &g, |b, g| {
            b.iter(|| welfare::knapsack_profile(black_box(g), total).unwrap())
        });
    }
    group.finish();
}

fn membership(c: &mut Criterion) {
    let mut group = c.benchmark_group("c_membership");
    for agents in [8usize, 12, 16] {
        let g = ttg(2, agents, 20);
        let game: Game = g.clone().into();
        let o = outcome(2, &game);
        group.bench_with_input(BenchmarkId::new("min_payoff_table", agents), &o, |b, o| {
            b.iter(|| stability::ttg_membership(&g, black_box(o)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("all_subsets", agents), &o, |b, o| {
            b.iter(|| stability::check_theorem1(&game, black_box(o), Resolution::default()).unwrap())
        });
    }
    group.finish();
}

fn lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("stabilize");
    for agents in [4usize, 6, 8] {
        let g = ttg(3, agents, 10);
        group.bench_with_input(BenchmarkId::from_parameter(agents), &g, |b, g| {
            b.iter(|| stability::stabilize(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn deviation(c: &mut Criterion) {
    let mut group = c.benchmark_group("core_membership");
    group.sample_size(20);
    let cases = [("ttg", Game::from(ttg(4, 4, 3))), ("rules", rule_game(4, 3))];
    for (name, game) in &cases {
        let o = outcome(4, game);
        for kind in [DeviationKind::Conservative, DeviationKind::Refined, DeviationKind::Optimistic] {
            group.bench_with_input(BenchmarkId::new(*name, kind.letter()), &o, |b, o| {
                b.iter(|| deviations::core_membership(game, black_box(o), kind, Resolution::default()).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, knapsack, membership, lp, deviation);
criterion_main!(benches);
