//! Pure Nash equilibria, best-response dynamics, exhaustive search and the
//! exact price of anarchy of small games.
//!
//! Equilibrium is the weak notion: a player is stable when no alternative
//! strategy is *strictly* cheaper. Ties are always broken towards the lowest
//! strategy index, and enumeration order is lexicographic with player 0 as
//! the most significant digit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{delay, delay_sum, CongestionVector, Cost, Game, Profile};

/// Default limit on the number of profiles an exhaustive search may visit.
pub const DEFAULT_STATE_CAP: u64 = 10_000_000;

/// Cost `player` would pay on `strategy` with everyone else fixed.
///
/// Each resource of the candidate contributes `(C_r^{-i} + 1)^M`, where
/// `C_r^{-i}` excludes the player itself. For the current strategy this is
/// exactly the current cost.
pub fn deviation_cost(
    game: &Game,
    cv: &CongestionVector,
    profile: &Profile,
    player: usize,
    strategy: usize,
) -> Result<Cost> {
    let current = game.chosen(profile, player);
    delay_sum(
        game.strategies(player)[strategy].resources().iter().map(|&r| {
            let others = cv.get(r) - u32::from(current.contains(r));
            u64::from(others) + 1
        }),
        game.degree(),
    )
}

fn best_response_with(
    game: &Game,
    cv: &CongestionVector,
    profile: &Profile,
    player: usize,
) -> Result<(usize, Cost)> {
    let mut best = (0, Cost::MAX);
    for s in 0..game.strategies(player).len() {
        let cost = deviation_cost(game, cv, profile, player, s)?;
        if cost < best.1 {
            best = (s, cost);
        }
    }
    Ok(best)
}

/// Index of a cheapest strategy for `player` against the others in `profile`,
/// lowest index on ties.
pub fn best_response(game: &Game, profile: &Profile, player: usize) -> Result<usize> {
    if player >= game.num_players() {
        return Err(Error::InvalidPlayer {
            player,
            players: game.num_players(),
        });
    }
    let cv = game.congestion_of(profile)?;
    Ok(best_response_with(game, &cv, profile, player)?.0)
}

/// First player (by index) with a strictly improving deviation, together with
/// its current cost and its best deviation cost.
pub fn nash_violation(game: &Game, profile: &Profile) -> Result<Option<(usize, Cost, Cost)>> {
    let cv = game.congestion_of(profile)?;
    nash_violation_with(game, &cv, profile)
}

fn nash_violation_with(
    game: &Game,
    cv: &CongestionVector,
    profile: &Profile,
) -> Result<Option<(usize, Cost, Cost)>> {
    for player in 0..game.num_players() {
        let current = game.player_cost_with(cv, profile, player)?;
        for s in 0..game.strategies(player).len() {
            if s == profile.choice(player) {
                continue;
            }
            let cost = deviation_cost(game, cv, profile, player, s)?;
            if cost < current {
                return Ok(Some((player, current, cost)));
            }
        }
    }
    Ok(None)
}

/// True iff no player can strictly lower its cost by a unilateral change.
pub fn is_nash(game: &Game, profile: &Profile) -> Result<bool> {
    Ok(nash_violation(game, profile)?.is_none())
}

/// `Phi(S) = sum_r sum_{j=1}^{C_r} j^M`.
pub fn rosenthal_potential(game: &Game, profile: &Profile) -> Result<Cost> {
    let cv = game.congestion_of(profile)?;
    potential_of(&cv, game.degree())
}

pub(crate) fn potential_of(cv: &CongestionVector, degree: u32) -> Result<Cost> {
    let mut total: Cost = 0;
    for &c in cv.as_slice() {
        for j in 1..=u64::from(c) {
            total = total
                .checked_add(delay(j, degree)?)
                .ok_or(Error::Overflow("potential"))?;
        }
    }
    Ok(total)
}

/// One strict greedy move.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub player: usize,
    pub from: usize,
    pub to: usize,
    pub cost_before: Cost,
    pub cost_after: Cost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub profile: Profile,
    pub bottleneck: u32,
    pub is_nash: bool,
    pub potential: Cost,
    pub moves: Vec<Move>,
}

/// Round-robin best-response dynamics from `start`.
///
/// Players are visited in index order; a player moves only when its best
/// response is strictly cheaper. Stops after a full pass without moves.
/// Every move lowers the potential, so `max_steps >= Phi(start)` always
/// suffices.
pub fn best_response_dynamics(game: &Game, start: &Profile, max_steps: u64) -> Result<EquilibriumReport> {
    let mut profile = start.clone();
    let mut cv = game.congestion_of(&profile)?;
    let n = game.num_players();
    let mut moves = Vec::new();
    let mut quiet = 0;
    let mut player = 0;
    while quiet < n {
        let current = game.player_cost_with(&cv, &profile, player)?;
        let (best, best_cost) = best_response_with(game, &cv, &profile, player)?;
        if best_cost < current {
            if moves.len() as u64 >= max_steps {
                return Err(Error::Nonconvergence { steps: max_steps });
            }
            let from = profile.choice(player);
            cv.remove(&game.strategies(player)[from]);
            cv.add(&game.strategies(player)[best]);
            profile.set_choice(player, best);
            moves.push(Move {
                player,
                from,
                to: best,
                cost_before: current,
                cost_after: best_cost,
            });
            quiet = 0;
        } else {
            quiet += 1;
        }
        player = (player + 1) % n;
    }
    Ok(EquilibriumReport {
        bottleneck: cv.bottleneck(),
        potential: potential_of(&cv, game.degree())?,
        is_nash: nash_violation_with(game, &cv, &profile)?.is_none(),
        profile,
        moves,
    })
}

/// Mixed-radix view of the profile space, player 0 most significant.
#[derive(Clone, Debug)]
pub struct StateSpace {
    radices: Vec<usize>,
    total: u64,
}

impl StateSpace {
    pub fn new(game: &Game, cap: u64) -> Result<Self> {
        let states = game.state_count();
        if states > u128::from(cap) {
            let states = if states == u128::MAX {
                "more than 2^128".to_string()
            } else {
                states.to_string()
            };
            return Err(Error::StateSpaceTooLarge { states, cap });
        }
        Ok(StateSpace {
            radices: game.players().iter().map(|s| s.len()).collect(),
            total: states as u64,
        })
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Profile at lexicographic position `index`.
    pub fn decode(&self, mut index: u64) -> Profile {
        let mut choices = vec![0; self.radices.len()];
        for (slot, &radix) in choices.iter_mut().zip(&self.radices).rev() {
            let radix = radix as u64;
            *slot = (index % radix) as usize;
            index /= radix;
        }
        Profile::new(choices)
    }

    pub fn iter(&self) -> StateIter {
        StateIter {
            radices: self.radices.clone(),
            next: Some(Profile::new(vec![0; self.radices.len()])),
        }
    }
}

/// Lexicographic iterator over every profile of a game.
#[derive(Clone, Debug)]
pub struct StateIter {
    radices: Vec<usize>,
    next: Option<Profile>,
}

impl Iterator for StateIter {
    type Item = Profile;

    fn next(&mut self) -> Option<Profile> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = self.radices.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if succ.choice(i) + 1 < self.radices[i] {
                succ.set_choice(i, succ.choice(i) + 1);
                self.next = Some(succ);
                break;
            }
            succ.set_choice(i, 0);
        }
        Some(current)
    }
}

/// All profiles in lexicographic order, refusing spaces larger than `cap`.
pub fn enumerate_states(game: &Game, cap: u64) -> Result<StateIter> {
    Ok(StateSpace::new(game, cap)?.iter())
}

#[derive(Clone, Copy)]
struct Scan {
    index: u64,
    bottleneck: u32,
    nash: bool,
}

fn scan_all(game: &Game, space: &StateSpace, need_nash: bool) -> Result<Vec<Scan>> {
    (0..space.len())
        .into_par_iter()
        .map(|index| {
            let profile = space.decode(index);
            let cv = game.congestion_unchecked(&profile);
            let nash = if need_nash {
                nash_violation_with(game, &cv, &profile)?.is_none()
            } else {
                false
            };
            Ok(Scan {
                index,
                bottleneck: cv.bottleneck(),
                nash,
            })
        })
        .collect()
}

/// Exhaustive social optimum: lexicographically first profile of minimum
/// bottleneck, and that bottleneck `C*`.
pub fn optimal_profile(game: &Game, cap: u64) -> Result<(Profile, u32)> {
    let space = StateSpace::new(game, cap)?;
    let best = (0..space.len())
        .into_par_iter()
        .map(|index| {
            (
                game.congestion_unchecked(&space.decode(index)).bottleneck(),
                index,
            )
        })
        .min()
        .expect("a valid game has at least one profile");
    Ok((space.decode(best.1), best.0))
}

/// Every pure Nash equilibrium, in lexicographic order.
pub fn enumerate_nash(game: &Game, cap: u64) -> Result<Vec<Profile>> {
    let space = StateSpace::new(game, cap)?;
    Ok(scan_all(game, &space, true)?
        .into_iter()
        .filter(|s| s.nash)
        .map(|s| space.decode(s.index))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoaReport {
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "C_star")]
    pub c_star: u32,
    pub poa_num: u64,
    pub poa_den: u64,
    pub nash_count: usize,
    #[serde(rename = "worst_nash_choice")]
    pub worst_nash: Profile,
    #[serde(rename = "optimal_choice")]
    pub optimal: Profile,
}

impl PoaReport {
    pub fn poa(&self) -> f64 {
        self.poa_num as f64 / self.poa_den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact price of anarchy by full enumeration.
///
/// The worst equilibrium is the lexicographically first Nash profile with the
/// largest bottleneck.
pub fn price_of_anarchy(game: &Game, cap: u64) -> Result<PoaReport> {
    let space = StateSpace::new(game, cap)?;
    let scans = scan_all(game, &space, true)?;
    let optimal = scans
        .iter()
        .min_by_key(|s| (s.bottleneck, s.index))
        .expect("nonempty state space");
    let worst = scans
        .iter()
        .filter(|s| s.nash)
        .min_by_key(|s| (std::cmp::Reverse(s.bottleneck), s.index))
        .ok_or_else(|| {
            // unreachable for congestion games, which always have a pure equilibrium
            Error::InvalidGame("no pure Nash equilibrium found".into())
        })?;
    let nash_count = scans.iter().filter(|s| s.nash).count();
    let (c, c_star) = (worst.bottleneck, optimal.bottleneck);
    let g = gcd(u64::from(c), u64::from(c_star)).max(1);
    Ok(PoaReport {
        c,
        c_star,
        poa_num: u64::from(c) / g,
        poa_den: u64::from(c_star) / g,
        nash_count,
        worst_nash: space.decode(worst.index),
        optimal: space.decode(optimal.index),
    })
}
