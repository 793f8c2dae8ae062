use std::hint::black_box;

use bottleneck_core::expansion::ResourceGraph;
use bottleneck_core::suite::{forced_congestion_instance, game_rng};
use bottleneck_core::transform::{pms_partition, transform_to_type_a, TransformOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn transformation(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform_to_type_a");
    for degree in 1..=3 {
        let inst = forced_congestion_instance(&mut game_rng(21, degree as usize), degree, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("forced", degree), &inst, |b, inst| {
            b.iter(|| {
                transform_to_type_a(
                    black_box(&inst.game),
                    &inst.nash,
                    &inst.optimal,
                    TransformOptions::default(),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn expansion(c: &mut Criterion) {
    let inst = forced_congestion_instance(&mut game_rng(21, 2), 2, 1).unwrap();
    let tsg = transform_to_type_a(&inst.game, &inst.nash, &inst.optimal, TransformOptions::default())
        .unwrap()
        .game;
    c.bench_function("expansion_report", |b| {
        b.iter(|| {
            ResourceGraph::build(black_box(&tsg), tsg.psi(), tsg.c_star())
                .unwrap()
                .report()
                .unwrap()
        })
    });
}

fn partition(c: &mut Criterion) {
    let congestion: Vec<u32> = (0..40).map(|r| 1 + (r * 7 % 13)).collect();
    let eq: Vec<usize> = (0..20).collect();
    let opt: Vec<usize> = (20..40).collect();
    c.bench_function("pms_partition/20x20", |b| {
        b.iter(|| pms_partition(black_box(&eq), &opt, &congestion, 2).unwrap())
    });
}

criterion_group!(benches, transformation, expansion, partition);
criterion_main!(benches);
