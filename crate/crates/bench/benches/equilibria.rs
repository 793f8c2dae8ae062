use std::hint::black_box;

use bottleneck_core::equilibria::{
    best_response_dynamics, price_of_anarchy, rosenthal_potential, DEFAULT_STATE_CAP,
};
use bottleneck_core::lower_bound;
use bottleneck_core::suite::{game_rng, random_game, random_profile, SuiteConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("price_of_anarchy");
    let config = SuiteConfig {
        max_players: 6,
        max_resources: 8,
        max_strategies: 4,
        ..SuiteConfig::default()
    };
    for players in [4usize, 6] {
        let config = SuiteConfig {
            max_players: players,
            ..config.clone()
        };
        let game = random_game(&mut game_rng(9, players), &config, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("random", players), &game, |b, g| {
            b.iter(|| price_of_anarchy(black_box(g), DEFAULT_STATE_CAP).unwrap())
        });
    }
    for n in [4usize, 8] {
        let inst = lower_bound::generate(n, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("lower_bound", n), &inst.game, |b, g| {
            b.iter(|| price_of_anarchy(black_box(g), DEFAULT_STATE_CAP).unwrap())
        });
    }
    group.finish();
}

fn dynamics(c: &mut Criterion) {
    let config = SuiteConfig::default();
    let games: Vec<_> = (0..50)
        .map(|i| {
            let mut rng = game_rng(4, i);
            let game = random_game(&mut rng, &config, (i % 3) as u32 + 1).unwrap();
            let start = random_profile(&mut rng, &game);
            (game, start)
        })
        .collect();
    c.bench_function("best_response_dynamics/50_games", |b| {
        b.iter(|| {
            for (game, start) in &games {
                let cap = rosenthal_potential(game, start).unwrap() as u64;
                black_box(best_response_dynamics(game, start, cap).unwrap());
            }
        })
    });
}

criterion_group!(benches, enumeration, dynamics);
criterion_main!(benches);
