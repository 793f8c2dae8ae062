//! Seeded random instances and the end-to-end verification suite.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{
    self, best_response_dynamics, price_of_anarchy, rosenthal_potential, DEFAULT_STATE_CAP,
};
use crate::error::{Error, Result};
use crate::expansion::{poa_within_upper_bound, upper_bound_arbitrary, ResourceGraph};
use crate::game::{delay, Cost, Game, Profile, ResourceId};
use crate::transform::{
    check_partition, domination_report, threshold, transform_to_type_a, TraceEvent, TransformOptions,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub count: usize,
    pub max_players: usize,
    pub max_resources: usize,
    pub max_strategies: usize,
    pub degrees: Vec<u32>,
    pub seed: u64,
    pub cap: u64,
    /// Random starting profiles for best-response dynamics, per game.
    pub brd_starts: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            count: 10,
            max_players: 4,
            max_resources: 6,
            max_strategies: 3,
            degrees: vec![1, 2, 3],
            seed: 1,
            cap: DEFAULT_STATE_CAP,
            brd_starts: 5,
        }
    }
}

/// Random number stream for game `index` of a run seeded with `seed`.
pub fn game_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// A game with 2..=P players, 2..=Z resources and 2..=K distinct strategies
/// per player, each a nonempty subset of at most three resources.
pub fn random_game(rng: &mut impl Rng, config: &SuiteConfig, degree: u32) -> Result<Game> {
    let players = rng.random_range(2..=config.max_players.max(2));
    let resources = rng.random_range(2..=config.max_resources.max(2));
    let mut sets = Vec::with_capacity(players);
    for _ in 0..players {
        let want = rng.random_range(2..=config.max_strategies.max(2));
        let mut strategies: Vec<Vec<ResourceId>> = Vec::new();
        // distinct subsets; small universes may not have `want` of them
        for _ in 0..want * 8 {
            if strategies.len() == want {
                break;
            }
            let size = rng.random_range(1..=resources.min(3));
            let mut s = sample(rng, resources, size).into_vec();
            s.sort_unstable();
            if !strategies.contains(&s) {
                strategies.push(s);
            }
        }
        sets.push(strategies);
    }
    Game::new(resources, degree, sets)
}

/// A random profile of `game`.
pub fn random_profile(rng: &mut impl Rng, game: &Game) -> Profile {
    Profile::new(
        (0..game.num_players())
            .map(|i| rng.random_range(0..game.strategies(i).len()))
            .collect(),
    )
}

/// A game whose all-first profile is a Nash equilibrium with bottleneck
/// above `psi`, together with a second profile of small bottleneck.
#[derive(Clone, Debug)]
pub struct ForcedInstance {
    pub game: Game,
    pub nash: Profile,
    pub optimal: Profile,
}

/// Builds a [`ForcedInstance`]. A few "core" resources are crowded by
/// equilibrium strategies biased towards resource 0; alternatives use at
/// most `c_star_target` copies of any resource and are padded with fresh
/// resources until every player is stable.
pub fn forced_congestion_instance(
    rng: &mut impl Rng,
    degree: u32,
    c_star_target: u32,
) -> Result<ForcedInstance> {
    let c_star_target = c_star_target.max(1);
    let psi = threshold(degree, c_star_target);
    for _ in 0..1000 {
        let core = rng.random_range(3..=6usize);
        let players = rng.random_range(psi as usize + 2..=2 * psi as usize + 8);
        // resource j is drawn with weight (core - j)^2, so several core
        // resources end up crowded, resource 0 most of all
        let weights: Vec<u64> = (0..core).map(|j| ((core - j) * (core - j)) as u64).collect();
        let mut eq_sets: Vec<Vec<ResourceId>> = Vec::with_capacity(players);
        for _ in 0..players {
            let size = rng.random_range(1..=3usize.min(core));
            let mut s: Vec<ResourceId> = Vec::with_capacity(size);
            while s.len() < size {
                let total: u64 = (0..core).filter(|j| !s.contains(j)).map(|j| weights[j]).sum();
                let mut pick = rng.random_range(0..total);
                for j in (0..core).filter(|j| !s.contains(j)) {
                    if pick < weights[j] {
                        s.push(j);
                        break;
                    }
                    pick -= weights[j];
                }
            }
            s.sort_unstable();
            eq_sets.push(s);
        }
        let mut congestion = vec![0u32; core];
        for s in &eq_sets {
            for &r in s {
                congestion[r] += 1;
            }
        }
        if congestion.iter().copied().max().unwrap_or(0) <= psi {
            continue;
        }

        // alternatives: an optional core resource, then shared private padding
        let mut core_uses = vec![0u32; core];
        let mut next = core;
        let mut pool: Vec<ResourceId> = Vec::new();
        let mut pool_users = c_star_target;
        let mut opt_sets = Vec::with_capacity(players);
        for eq in &eq_sets {
            let cost: Cost = eq
                .iter()
                .map(|&r| delay(u64::from(congestion[r]), degree))
                .sum::<Result<Cost>>()?;
            let mut opt = Vec::new();
            let mut have: Cost = 0;
            let mut outside = false;
            if rng.random_bool(0.6) {
                // the least crowded core resource that covers the cost alone,
                // or a random one
                let tight = (0..core)
                    .filter(|r| !eq.contains(r) && core_uses[*r] < c_star_target)
                    .filter(|&r| delay(u64::from(congestion[r]) + 1, degree).is_ok_and(|d| d >= cost))
                    .min_by_key(|&r| (congestion[r], r));
                let r = match tight {
                    Some(r) if rng.random_bool(0.7) => r,
                    _ => rng.random_range(0..core),
                };
                if core_uses[r] < c_star_target {
                    core_uses[r] += 1;
                    outside = !eq.contains(&r);
                    have += delay(u64::from(congestion[r]) + u64::from(outside), degree)?;
                    opt.push(r);
                }
            }
            // a lone crowded resource may suffice; otherwise pad with fresh
            // resources, at least one so the alternative never lies inside eq
            let padding = if outside && have >= cost {
                0
            } else {
                (cost.saturating_sub(have) as usize).max(1)
            };
            if padding > 0 {
                if pool_users == c_star_target || pool.len() < padding {
                    pool = (next..next + padding).collect();
                    next += padding;
                    pool_users = 0;
                }
                pool_users += 1;
                opt.extend_from_slice(&pool[..padding]);
            }
            opt.sort_unstable();
            opt_sets.push(opt);
        }
        let sets: Vec<Vec<Vec<ResourceId>>> = eq_sets
            .into_iter()
            .zip(opt_sets)
            .map(|(e, o)| if e == o { vec![e] } else { vec![e, o] })
            .collect();
        let optimal = Profile::new(sets.iter().map(|s| s.len() - 1).collect());
        let game = Game::new(next, degree, sets)?;
        let nash = Profile::first(game.num_players());
        if !equilibria::is_nash(&game, &nash)? {
            continue;
        }
        let c_star = game.congestion_of(&optimal)?.bottleneck();
        if game.congestion_of(&nash)?.bottleneck() <= threshold(degree, c_star) {
            continue;
        }
        return Ok(ForcedInstance { game, nash, optimal });
    }
    Err(Error::InvalidGame(
        "could not generate a forced-congestion instance".into(),
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformCheck {
    pub noop: bool,
    pub phases: usize,
    pub partitions: usize,
    pub partition_failures: usize,
    #[serde(rename = "C_tilde_star")]
    pub c_star_tilde: u32,
    pub beta_observed: f64,
    pub induced_is_nash: bool,
    pub high_nodes: usize,
    pub expansion_failures: usize,
    pub descendant_ok: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub index: usize,
    pub degree: u32,
    pub num_players: usize,
    pub num_resources: usize,
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "C_star")]
    pub c_star: u32,
    pub poa_num: u64,
    pub poa_den: u64,
    pub nash_count: usize,
    /// Closed-form upper bound on the price of anarchy.
    pub bound: f64,
    pub bound_ok: bool,
    pub brd_moves: Vec<usize>,
    pub transform: Option<TransformCheck>,
    pub failures: Vec<String>,
}

impl GameRecord {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub games: Vec<GameRecord>,
    pub passed: usize,
    pub pass: bool,
}

/// Checks one best-response run: every move lowers the potential by exactly
/// the mover's gain, the end state is Nash, and the number of moves is at
/// most the starting potential.
pub fn check_dynamics(game: &Game, start: &Profile) -> Result<std::result::Result<usize, String>> {
    let phi0 = rosenthal_potential(game, start)?;
    let report = best_response_dynamics(game, start, u64::try_from(phi0).unwrap_or(u64::MAX))?;
    let mut state = start.clone();
    let mut phi = phi0;
    for mv in &report.moves {
        state.set_choice(mv.player, mv.to);
        let next = rosenthal_potential(game, &state)?;
        if mv.cost_after >= mv.cost_before || phi - next != mv.cost_before - mv.cost_after {
            return Ok(Err(format!(
                "move of player {} breaks the potential identity",
                mv.player
            )));
        }
        phi = next;
    }
    if state != report.profile || !equilibria::is_nash(game, &state)? {
        return Ok(Err("dynamics stopped outside a Nash equilibrium".into()));
    }
    if report.moves.len() as u128 > phi0 {
        return Ok(Err(format!(
            "{} moves exceed the potential {phi0}",
            report.moves.len()
        )));
    }
    Ok(Ok(report.moves.len()))
}

/// Transforms `game` at (`nash`, `optimal`) and checks the outcome: the
/// domination properties, every recorded partition, Nash stability of the
/// induced game and the expansion inequalities on the resource graph.
pub fn check_transform(
    game: &Game,
    nash: &Profile,
    optimal: &Profile,
) -> Result<(TransformCheck, Vec<String>)> {
    let mut failures = Vec::new();
    let outcome = transform_to_type_a(
        game,
        nash,
        optimal,
        TransformOptions {
            trace: true,
            check_each_step: true,
        },
    )?;
    let tsg = &outcome.game;
    let domination = domination_report(game, nash, optimal, tsg)?;
    failures.extend(domination.violations.iter().cloned());

    let mut check = TransformCheck {
        noop: outcome.noop,
        phases: outcome.phases.len(),
        c_star_tilde: domination.c_star_tilde,
        beta_observed: domination.beta_observed,
        ..TransformCheck::default()
    };
    let congestion = tsg.congestion();
    for event in &outcome.trace {
        if let TraceEvent::PartitionTransform { pairs, .. } = event {
            check.partitions += 1;
            let eq: Vec<_> = pairs.iter().flat_map(|p| p.eq_part.iter().copied()).collect();
            let mut opt: Vec<_> = pairs.iter().flat_map(|p| p.opt_part.iter().copied()).collect();
            opt.sort_unstable();
            opt.dedup();
            if let Err(e) = check_partition(&eq, &opt, congestion, tsg.degree(), pairs) {
                check.partition_failures += 1;
                failures.push(format!("partition: {e}"));
            }
        }
    }

    let (induced, profile, _) = tsg.induced_game()?;
    check.induced_is_nash = equilibria::is_nash(&induced, &profile)?;
    if !check.induced_is_nash {
        failures.push("induced game is not at a Nash equilibrium".into());
    }

    let graph = ResourceGraph::build(tsg, tsg.psi(), tsg.c_star())?;
    check.high_nodes = graph.high_nodes().len();
    for e in graph.expansion_ledger()? {
        if !e.holds {
            check.expansion_failures += 1;
            failures.push(format!("expansion fails at resource {}", e.node));
        }
    }
    check.descendant_ok = true;
    if let Some(root) = graph.max_congestion_root() {
        let d = graph.descendant_count_check(root)?;
        check.descendant_ok = d.holds && d.within_resource_count;
        if !check.descendant_ok {
            failures.push(format!("descendant count fails at resource {root}"));
        }
    }
    Ok((check, failures))
}

/// Runs every check on game `index` of the configured run.
pub fn check_game(config: &SuiteConfig, index: usize) -> Result<GameRecord> {
    let mut rng = game_rng(config.seed, index);
    let degree = config.degrees[index % config.degrees.len()];
    let game = random_game(&mut rng, config, degree)?;
    let poa = price_of_anarchy(&game, config.cap)?;
    let mut record = GameRecord {
        index,
        degree,
        num_players: game.num_players(),
        num_resources: game.num_resources(),
        c: poa.c,
        c_star: poa.c_star,
        poa_num: poa.poa_num,
        poa_den: poa.poa_den,
        nash_count: poa.nash_count,
        ..GameRecord::default()
    };
    if poa.nash_count == 0 {
        record.failures.push("no pure Nash equilibrium".into());
    }
    record.bound = upper_bound_arbitrary(game.num_resources(), degree);
    record.bound_ok = poa_within_upper_bound(poa.c, poa.c_star, game.num_resources(), degree)?;
    if !record.bound_ok {
        record
            .failures
            .push("price of anarchy exceeds the upper bound".into());
    }
    for _ in 0..config.brd_starts {
        let start = random_profile(&mut rng, &game);
        match check_dynamics(&game, &start)? {
            Ok(moves) => record.brd_moves.push(moves),
            Err(e) => record.failures.push(e),
        }
    }
    let (check, failures) = check_transform(&game, &poa.worst_nash, &poa.optimal)?;
    record.transform = Some(check);
    record.failures.extend(failures);
    Ok(record)
}

/// Runs [`check_game`] on `config.count` games in parallel; records are in
/// index order and errors become failures.
pub fn run_suite(config: &SuiteConfig) -> SuiteReport {
    let games: Vec<GameRecord> = (0..config.count)
        .into_par_iter()
        .map(|i| {
            check_game(config, i).unwrap_or_else(|e| GameRecord {
                index: i,
                failures: vec![e.to_string()],
                ..GameRecord::default()
            })
        })
        .collect();
    let passed = games.iter().filter(|g| g.passed()).count();
    SuiteReport {
        config: config.clone(),
        pass: passed == games.len(),
        passed,
        games,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_games_respect_the_limits() {
        let config = SuiteConfig::default();
        for i in 0..50 {
            let g = random_game(&mut game_rng(7, i), &config, 2).unwrap();
            assert!((2..=4).contains(&g.num_players()));
            assert!((2..=6).contains(&g.num_resources()));
            for p in g.players() {
                assert!(p.len() <= 3);
                assert!(p.strategies().iter().all(|s| s.len() <= 3));
            }
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let config = SuiteConfig::default();
        let a = random_game(&mut game_rng(3, 5), &config, 1).unwrap();
        let b = random_game(&mut game_rng(3, 5), &config, 1).unwrap();
        let c = random_game(&mut game_rng(3, 6), &config, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn forced_instances_are_congested_equilibria() {
        for m in 1..=3 {
            for target in 1..=2 {
                let inst = forced_congestion_instance(&mut game_rng(11, m as usize), m, target).unwrap();
                assert!(equilibria::is_nash(&inst.game, &inst.nash).unwrap());
                let c = inst.game.congestion_of(&inst.nash).unwrap().bottleneck();
                let c_star = inst.game.congestion_of(&inst.optimal).unwrap().bottleneck();
                assert!(c_star <= target);
                assert!(c > threshold(m, c_star));
            }
        }
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(&SuiteConfig {
            count: 12,
            ..SuiteConfig::default()
        });
        let bad: Vec<_> = report.games.iter().filter(|g| !g.passed()).collect();
        assert!(report.pass, "{bad:#?}");
    }
}
