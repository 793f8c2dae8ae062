//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use bottleneck_core::equilibria::{enumerate_nash, optimal_profile, DEFAULT_STATE_CAP};
use bottleneck_core::expansion::{poa_within_upper_bound, ResourceGraph};
use bottleneck_core::lower_bound::{generate, loglog_slope, sweep, verify};
use bottleneck_core::suite::{
    check_dynamics, check_transform, forced_congestion_instance, game_rng, random_game, random_profile,
    SuiteConfig,
};
use bottleneck_core::transform::{
    check_partition, cover_cost, domination_report, eq_cost, pms_partition, transform_to_type_a,
    TransformOptions,
};
use bottleneck_core::{equilibria, Game};
use rand::Rng;

const SEED: u64 = 2011;

fn report(n: u32, name: &str, failures: &[String], elapsed: Duration, budget: Duration, detail: &str) {
    let ok = failures.is_empty() && elapsed <= budget;
    println!(
        "criterion {n} ({name}): {} in {:.3}s (budget {}s){}{}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if detail.is_empty() { "" } else { "; " },
        detail
    );
    for f in failures.iter().take(5) {
        println!("  {f}");
    }
    assert!(failures.is_empty(), "criterion {n} failed: {failures:?}");
    assert!(elapsed <= budget, "criterion {n} exceeded its time budget");
}

fn random_games() -> Vec<Game> {
    let config = SuiteConfig::default();
    (0..200)
        .map(|i| random_game(&mut game_rng(SEED, i), &config, (i % 3) as u32 + 1).unwrap())
        .collect()
}

#[test]
fn criterion_1_lower_bound_exactness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for m in 1..=3 {
        for n in 2..=4usize {
            let inst = generate(n, m).unwrap();
            assert!(inst.num_resources <= 10_000);
            match verify(&inst, DEFAULT_STATE_CAP) {
                Ok(r) if r.s_is_nash && r.c_s as usize == n && r.c_s_star == 1 && r.exact => checked += 1,
                Ok(r) => failures.push(format!("M={m} n={n}: {r:?}")),
                Err(e) => failures.push(format!("M={m} n={n}: {e}")),
            }
        }
    }
    report(
        1,
        "lower-bound exactness",
        &failures,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("{checked}/9 instances"),
    );
}

#[test]
fn criterion_2_scaling_exponent() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut slopes = Vec::new();
    for (m, hi) in [(1u32, 6usize), (2, 4)] {
        let rows = sweep(m, 2..=hi, DEFAULT_STATE_CAP).unwrap();
        let points: Vec<_> = rows.iter().map(|r| (r.num_resources as f64, r.poa())).collect();
        let slope = loglog_slope(&points);
        let target = 1.0 / f64::from(m + 1);
        slopes.push(format!("M={m} slope {slope:.6} (target {target:.6})"));
        if (slope - target).abs() > 0.01 {
            failures.push(format!("M={m}: slope {slope} differs from {target}"));
        }
    }
    report(
        2,
        "scaling exponent",
        &failures,
        start.elapsed(),
        Duration::from_secs(5),
        &slopes.join(", "),
    );
}

#[test]
fn criterion_3_upper_bound() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut equilibria_checked = 0;
    for (i, game) in random_games().iter().enumerate() {
        let (_, c_star) = optimal_profile(game, DEFAULT_STATE_CAP).unwrap();
        let nash = enumerate_nash(game, DEFAULT_STATE_CAP).unwrap();
        if nash.is_empty() {
            failures.push(format!("game {i}: no pure Nash equilibrium"));
        }
        for s in &nash {
            let c = game.congestion_of(s).unwrap().bottleneck();
            equilibria_checked += 1;
            if !poa_within_upper_bound(c, c_star, game.num_resources(), game.degree()).unwrap() {
                failures.push(format!("game {i}: C = {c}, C* = {c_star} breaks the bound"));
            }
        }
    }
    report(
        3,
        "upper-bound inequality",
        &failures,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("200 games, {equilibria_checked} equilibria"),
    );
}

#[test]
fn criterion_4_best_response_dynamics() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut moves = 0;
    for (i, game) in random_games().iter().enumerate() {
        let mut rng = game_rng(SEED ^ 0xb4d, i);
        for _ in 0..5 {
            let s = random_profile(&mut rng, game);
            match check_dynamics(game, &s).unwrap() {
                Ok(k) => moves += k,
                Err(e) => failures.push(format!("game {i} from {s}: {e}")),
            }
        }
    }
    report(
        4,
        "potential and convergence",
        &failures,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("1000 runs, {moves} moves"),
    );
}

#[test]
fn criterion_5_partition_properties() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = game_rng(SEED, 5);
    let mut inputs = 0;
    let mut pairs = 0;
    while inputs < 1000 {
        let degree = rng.random_range(1..=3u32);
        let k = rng.random_range(1..=8usize);
        let l = rng.random_range(1..=8usize);
        let congestion: Vec<u32> = (0..k + l).map(|_| rng.random_range(1..=20)).collect();
        let eq: Vec<usize> = (0..k).collect();
        let opt: Vec<usize> = (k..k + l).collect();
        if cover_cost(&opt, &congestion, degree).unwrap() < eq_cost(&eq, &congestion, degree).unwrap() {
            continue;
        }
        inputs += 1;
        match pms_partition(&eq, &opt, &congestion, degree) {
            Ok(p) => {
                pairs += p.len();
                if let Err(e) = check_partition(&eq, &opt, &congestion, degree, &p) {
                    failures.push(format!("{congestion:?} (k={k}, M={degree}): {e}"));
                }
            }
            Err(e) => failures.push(format!("{congestion:?} (k={k}, M={degree}): {e}")),
        }
    }
    report(
        5,
        "partition properties",
        &failures,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("1000 inputs, {pairs} pairs"),
    );
}

#[test]
fn criterion_6_transformation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut phases = 0;
    let mut max_beta: f64 = 0.0;
    for i in 0..50 {
        let degree = (i % 3) as u32 + 1;
        let inst =
            forced_congestion_instance(&mut game_rng(SEED, i), degree, (i / 3 % 2) as u32 + 1).unwrap();
        let outcome = match transform_to_type_a(
            &inst.game,
            &inst.nash,
            &inst.optimal,
            TransformOptions {
                trace: false,
                check_each_step: true,
            },
        ) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        assert!(!outcome.noop);
        phases += outcome.phases.len();
        let d = domination_report(&inst.game, &inst.nash, &inst.optimal, &outcome.game).unwrap();
        max_beta = max_beta.max(d.beta_observed);
        if !(d.congestion_preserved
            && d.c_tilde == d.c
            && d.type_a_above_psi
            && 7 * d.c_star >= d.c_star_tilde)
        {
            failures.push(format!("instance {i}: {:?}", d.violations));
        }
        let (induced, profile, _) = outcome.game.induced_game().unwrap();
        if !equilibria::is_nash(&induced, &profile).unwrap() {
            failures.push(format!("instance {i}: induced profile is not Nash"));
        }
    }
    report(
        6,
        "transformation post-conditions",
        &failures,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("50 instances, {phases} phases, max C~*/C* = {max_beta}"),
    );
}

#[test]
fn criterion_7_expansion() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut nodes = 0;
    let mut roots = 0;
    for i in 0..50 {
        let degree = (i % 3) as u32 + 1;
        let inst =
            forced_congestion_instance(&mut game_rng(SEED, i), degree, (i / 3 % 2) as u32 + 1).unwrap();
        let outcome =
            transform_to_type_a(&inst.game, &inst.nash, &inst.optimal, TransformOptions::default()).unwrap();
        let tsg = &outcome.game;
        let graph = ResourceGraph::build(tsg, tsg.psi(), tsg.c_star()).unwrap();
        for e in graph.expansion_ledger().unwrap() {
            nodes += 1;
            if !e.holds {
                failures.push(format!("instance {i}: expansion fails at {e:?}"));
            }
        }
        if let Some(root) = graph.max_congestion_root() {
            roots += 1;
            let d = graph.descendant_count_check(root).unwrap();
            if !d.holds || d.v2_count > tsg.num_resources() - 1 {
                failures.push(format!("instance {i}: descendant count fails at {d:?}"));
            }
        }
        // the full suite check agrees
        let (_, f) = check_transform(&inst.game, &inst.nash, &inst.optimal).unwrap();
        failures.extend(f.into_iter().map(|f| format!("instance {i}: {f}")));
    }
    report(
        7,
        "expansion inequality",
        &failures,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("{nodes} high nodes, {roots} roots"),
    );
}
