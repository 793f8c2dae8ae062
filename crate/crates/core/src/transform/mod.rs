//! Conversion of a game in a Nash state into a dominated game whose highly
//! congested resources carry only single-resource ("type-A") players.
//!
//! The working object is a [`TwoStrategyGame`]: every player keeps exactly an
//! equilibrium strategy and a tracked optimal strategy. The per-resource
//! congestion of the equilibrium profile never changes during the
//! transformation; players are only split, merged into new pieces, or have
//! their optimal strategy exchanged.

mod partition;
mod phase;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibria;
use crate::error::{Error, Result};
use crate::game::{delay, Cost, Game, Profile, ResourceId};

pub use partition::{check_partition, cover_cost, eq_cost, pms_partition, PartitionPair};
pub use phase::{transform_to_type_a, PhaseSummary, TransformOptions, TransformOutcome};

/// Stable identifier of a player in a [`TwoStrategyGame`]. Never reused.
pub type PlayerId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlayerKind {
    /// Equilibrium strategy is a single resource.
    A,
    /// Equilibrium strategy has two or more resources.
    B,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStrategyPlayer {
    pub eq: Vec<ResourceId>,
    pub opt: Vec<ResourceId>,
    #[serde(default)]
    pub marked: bool,
}

impl TwoStrategyPlayer {
    pub fn new(mut eq: Vec<ResourceId>, mut opt: Vec<ResourceId>) -> Self {
        eq.sort_unstable();
        opt.sort_unstable();
        TwoStrategyPlayer {
            eq,
            opt,
            marked: false,
        }
    }

    pub fn kind(&self) -> PlayerKind {
        if self.eq.len() == 1 {
            PlayerKind::A
        } else {
            PlayerKind::B
        }
    }

    pub fn is_type_a(&self) -> bool {
        self.kind() == PlayerKind::A
    }

    pub fn is_type_b(&self) -> bool {
        self.kind() == PlayerKind::B
    }

    fn overlap(&self) -> Vec<ResourceId> {
        self.eq
            .iter()
            .copied()
            .filter(|r| self.opt.binary_search(r).is_ok())
            .collect()
    }
}

/// One record per mutating operation, emitted when tracing is on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TraceEvent {
    Clean {
        player: PlayerId,
        pieces: Vec<PlayerId>,
    },
    Prune {
        player: PlayerId,
        removed: Vec<ResourceId>,
    },
    PartitionTransform {
        player: PlayerId,
        pairs: Vec<PartitionPair>,
        new_players: Vec<PlayerId>,
    },
    Eliminate {
        player: PlayerId,
        donor: PlayerId,
        resource: ResourceId,
        new_opt: Vec<ResourceId>,
    },
    Mark {
        player: PlayerId,
        donor: PlayerId,
        resource: ResourceId,
        merged_opt: Vec<ResourceId>,
    },
    Phase {
        summary: PhaseSummary,
    },
}

#[derive(Clone, Debug)]
pub struct TwoStrategyGame {
    num_resources: usize,
    degree: u32,
    psi: u32,
    c: u32,
    c_star: u32,
    congestion: Vec<u32>,
    players: BTreeMap<PlayerId, TwoStrategyPlayer>,
    next_id: PlayerId,
    trace: Option<Vec<TraceEvent>>,
}

/// `psi = max(2M, 3 C*)`.
pub fn threshold(degree: u32, c_star: u32) -> u32 {
    (2 * degree).max(3 * c_star)
}

impl TwoStrategyGame {
    /// Restricts `game` to two strategies per player: the one played in
    /// `nash` and the one played in `optimal`.
    pub fn from_profiles(game: &Game, nash: &Profile, optimal: &Profile) -> Result<Self> {
        game.validate_profile(optimal)?;
        if let Some((player, current, deviation)) = equilibria::nash_violation(game, nash)? {
            return Err(Error::NotNash {
                player,
                current,
                deviation,
            });
        }
        let c_star = game.congestion_of(optimal)?.bottleneck();
        let players = (0..game.num_players())
            .map(|i| {
                (
                    game.chosen(nash, i).resources().to_vec(),
                    game.chosen(optimal, i).resources().to_vec(),
                )
            })
            .collect();
        Self::from_players(game.num_resources(), game.degree(), c_star, players)
    }

    /// Builds a workspace from explicit `(eq, opt)` pairs. `c_star` is the
    /// optimal bottleneck the threshold is derived from.
    pub fn from_players(
        num_resources: usize,
        degree: u32,
        c_star: u32,
        players: Vec<(Vec<ResourceId>, Vec<ResourceId>)>,
    ) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidGame("degree must be at least 1".into()));
        }
        let mut congestion = vec![0u32; num_resources];
        let mut roster = BTreeMap::new();
        for (i, (eq, opt)) in players.into_iter().enumerate() {
            let player = TwoStrategyPlayer::new(eq, opt);
            for (side, set) in [("eq", &player.eq), ("opt", &player.opt)] {
                if set.is_empty() {
                    return Err(Error::InvalidGame(format!("player {i}: empty {side} strategy")));
                }
                if set.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidGame(format!(
                        "player {i}: repeated resource in {side}"
                    )));
                }
                if let Some(r) = set.iter().find(|&&r| r >= num_resources) {
                    return Err(Error::InvalidGame(format!(
                        "player {i}: resource {r} out of range 0..{num_resources}"
                    )));
                }
            }
            for &r in &player.eq {
                congestion[r] += 1;
            }
            roster.insert(i, player);
        }
        let next_id = roster.len();
        Ok(TwoStrategyGame {
            num_resources,
            degree,
            psi: threshold(degree, c_star),
            c: congestion.iter().copied().max().unwrap_or(0),
            c_star,
            congestion,
            players: roster,
            next_id,
            trace: None,
        })
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn psi(&self) -> u32 {
        self.psi
    }

    /// Bottleneck of the equilibrium profile.
    pub fn c(&self) -> u32 {
        self.c
    }

    /// Optimal bottleneck of the original game.
    pub fn c_star(&self) -> u32 {
        self.c_star
    }

    /// Fixed equilibrium congestion vector.
    pub fn congestion(&self) -> &[u32] {
        &self.congestion
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> impl Iterator<Item = (PlayerId, &TwoStrategyPlayer)> {
        self.players.iter().map(|(&id, p)| (id, p))
    }

    pub fn player(&self, id: PlayerId) -> Option<&TwoStrategyPlayer> {
        self.players.get(&id)
    }

    pub(crate) fn player_mut(&mut self, id: PlayerId) -> Result<&mut TwoStrategyPlayer> {
        self.players.get_mut(&id).ok_or_else(|| Error::Structural {
            phase: 0,
            detail: format!("player {id} is not in the roster"),
        })
    }

    pub(crate) fn get(&self, id: PlayerId) -> Result<&TwoStrategyPlayer> {
        self.players.get(&id).ok_or_else(|| Error::Structural {
            phase: 0,
            detail: format!("player {id} is not in the roster"),
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub(crate) fn record(&mut self, event: TraceEvent) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(event);
        }
    }

    pub(crate) fn insert(&mut self, player: TwoStrategyPlayer) -> PlayerId {
        let id = self.next_id;
        self.next_id += 1;
        self.players.insert(id, player);
        id
    }

    pub(crate) fn remove(&mut self, id: PlayerId) -> Result<TwoStrategyPlayer> {
        self.players.remove(&id).ok_or_else(|| Error::Structural {
            phase: 0,
            detail: format!("player {id} is not in the roster"),
        })
    }

    /// Equilibrium cost `sum_{eq} C_r^M`.
    pub fn cost(&self, id: PlayerId) -> Result<Cost> {
        eq_cost(&self.get(id)?.eq, &self.congestion, self.degree)
    }

    /// Cost of switching to the tracked optimal strategy.
    pub fn deviation_cost(&self, id: PlayerId) -> Result<Cost> {
        let p = self.get(id)?;
        p.opt.iter().try_fold(0 as Cost, |acc, &r| {
            let c = u64::from(self.congestion[r]) + u64::from(p.eq.binary_search(&r).is_err());
            acc.checked_add(delay(c, self.degree)?)
                .ok_or(Error::Overflow("deviation cost"))
        })
    }

    pub fn is_stable(&self, id: PlayerId) -> Result<bool> {
        Ok(self.cost(id)? <= self.deviation_cost(id)?)
    }

    /// First unstable player, with its cost and deviation cost.
    pub fn equilibrium_violation(&self) -> Result<Option<(PlayerId, Cost, Cost)>> {
        for &id in self.players.keys() {
            let (cost, dev) = (self.cost(id)?, self.deviation_cost(id)?);
            if dev < cost {
                return Ok(Some((id, cost, dev)));
            }
        }
        Ok(None)
    }

    /// Congestion of the equilibrium profile recomputed from the roster.
    pub fn eq_congestion_recount(&self) -> Vec<u32> {
        let mut cv = vec![0u32; self.num_resources];
        for p in self.players.values() {
            for &r in &p.eq {
                cv[r] += 1;
            }
        }
        cv
    }

    /// Congestion of the tracked optimal profile.
    pub fn opt_congestion(&self) -> Vec<u32> {
        let mut cv = vec![0u32; self.num_resources];
        for p in self.players.values() {
            for &r in &p.opt {
                cv[r] += 1;
            }
        }
        cv
    }

    /// Bottleneck of the tracked optimal profile, an upper bound on the
    /// optimum of the transformed game.
    pub fn opt_bottleneck(&self) -> u32 {
        self.opt_congestion().into_iter().max().unwrap_or(0)
    }

    /// Resources with congestion above `psi` that some type-B player uses.
    pub fn type_b_on_high_resources(&self, psi: u32) -> Vec<(PlayerId, ResourceId)> {
        self.players
            .iter()
            .filter(|(_, p)| p.is_type_b())
            .flat_map(|(&id, p)| {
                p.eq.iter()
                    .filter(|&&r| self.congestion[r] > psi)
                    .map(move |&r| (id, r))
            })
            .collect()
    }

    /// The induced game: each player chooses between its equilibrium and
    /// optimal strategy (one strategy when they coincide). The returned
    /// profile selects every equilibrium strategy; the id list maps game
    /// player indices back to roster ids.
    pub fn induced_game(&self) -> Result<(Game, Profile, Vec<PlayerId>)> {
        let mut ids = Vec::with_capacity(self.players.len());
        let mut sets = Vec::with_capacity(self.players.len());
        for (&id, p) in &self.players {
            ids.push(id);
            if p.eq == p.opt {
                sets.push(vec![p.eq.clone()]);
            } else {
                sets.push(vec![p.eq.clone(), p.opt.clone()]);
            }
        }
        let game = Game::new(self.num_resources, self.degree, sets)?;
        Ok((game, Profile::first(ids.len()), ids))
    }

    /// Splits every type-B player whose two strategies overlap and prunes
    /// redundant optimal resources of type-A players.
    pub fn clean(&mut self) -> Result<()> {
        let ids: Vec<PlayerId> = self.players.keys().copied().collect();
        for id in ids {
            self.clean_player(id)?;
        }
        let type_a: Vec<PlayerId> = self
            .players
            .iter()
            .filter(|(_, p)| p.is_type_a())
            .map(|(&id, _)| id)
            .collect();
        for id in type_a {
            self.prune(id)?;
        }
        Ok(())
    }

    /// Splits an overlapping type-B player into one type-A player per shared
    /// resource plus a residual with the disjoint remainders. Returns the
    /// residual's id, or `None` when the player was fully absorbed. Players
    /// without overlap are returned unchanged.
    pub(crate) fn clean_player(&mut self, id: PlayerId) -> Result<Option<PlayerId>> {
        let player = self.get(id)?;
        let shared = player.overlap();
        if player.is_type_a() || shared.is_empty() {
            return Ok(Some(id));
        }
        let player = self.remove(id)?;
        let eq_rest: Vec<_> = player
            .eq
            .iter()
            .copied()
            .filter(|r| !shared.contains(r))
            .collect();
        let opt_rest: Vec<_> = player
            .opt
            .iter()
            .copied()
            .filter(|r| !shared.contains(r))
            .collect();
        let mut pieces: Vec<PlayerId> = shared
            .iter()
            .map(|&r| self.insert(TwoStrategyPlayer::new(vec![r], vec![r])))
            .collect();
        let residual = if eq_rest.is_empty() {
            None
        } else if opt_rest.is_empty() {
            // unreachable for a stable player: the remainder would cost nothing to leave
            return Err(Error::Structural {
                phase: 0,
                detail: format!("player {id} has an optimal strategy inside its equilibrium strategy"),
            });
        } else {
            let rid = self.insert(TwoStrategyPlayer::new(eq_rest, opt_rest));
            pieces.push(rid);
            Some(rid)
        };
        self.record(TraceEvent::Clean { player: id, pieces });
        if let Some(rid) = residual {
            if self.get(rid)?.is_type_a() {
                self.prune(rid)?;
            }
        }
        Ok(residual)
    }

    /// Drops optimal resources of a type-A player that are not needed to keep
    /// it stable. Resources are tried lightest first; the player's own
    /// equilibrium resource is tried last.
    pub(crate) fn prune(&mut self, id: PlayerId) -> Result<()> {
        let player = self.get(id)?;
        if player.opt.len() <= 1 {
            return Ok(());
        }
        let own = player.eq[0];
        let cost = self.cost(id)?;
        let weight = |r: ResourceId| -> Result<Cost> {
            delay(u64::from(self.congestion[r]) + u64::from(r != own), self.degree)
        };
        let mut order: Vec<(bool, Cost, ResourceId)> = player
            .opt
            .iter()
            .map(|&r| Ok((r == own, weight(r)?, r)))
            .collect::<Result<_>>()?;
        order.sort_unstable();
        let mut total: Cost = order.iter().map(|t| t.1).sum();
        let mut kept: Vec<ResourceId> = player.opt.clone();
        let mut removed = Vec::new();
        for (_, w, r) in order {
            if kept.len() > 1 && total - w >= cost {
                total -= w;
                kept.retain(|&x| x != r);
                removed.push(r);
            }
        }
        if !removed.is_empty() {
            self.player_mut(id)?.opt = kept;
            self.record(TraceEvent::Prune { player: id, removed });
        }
        Ok(())
    }

    pub fn to_file(&self) -> TwoStrategyGameFile {
        TwoStrategyGameFile {
            num_resources: self.num_resources,
            degree: self.degree,
            psi: self.psi,
            c: self.c,
            c_star: self.c_star,
            opt_bottleneck: self.opt_bottleneck(),
            players: self
                .players
                .iter()
                .map(|(&id, p)| PlayerRecord {
                    id,
                    kind: p.kind(),
                    eq: p.eq.clone(),
                    opt: p.opt.clone(),
                    marked: p.marked,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub id: PlayerId,
    pub kind: PlayerKind,
    pub eq: Vec<ResourceId>,
    pub opt: Vec<ResourceId>,
    pub marked: bool,
}

/// JSON form of a transformed two-strategy game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStrategyGameFile {
    pub num_resources: usize,
    pub degree: u32,
    pub psi: u32,
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "C_star")]
    pub c_star: u32,
    pub opt_bottleneck: u32,
    pub players: Vec<PlayerRecord>,
}

/// Outcome of comparing a transformed game with the game it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub num_resources: usize,
    pub transformed_num_resources: usize,
    pub same_degree: bool,
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "C_tilde")]
    pub c_tilde: u32,
    pub congestion_preserved: bool,
    #[serde(rename = "C_star")]
    pub c_star: u32,
    #[serde(rename = "C_star_tilde")]
    pub c_star_tilde: u32,
    pub beta_observed: f64,
    pub type_a_above_psi: bool,
    pub in_equilibrium: bool,
    pub violations: Vec<String>,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares `transformed` against `game` played at `nash` with optimum
/// `optimal`, without failing. See [`verify_domination`].
pub fn domination_report(
    game: &Game,
    nash: &Profile,
    optimal: &Profile,
    transformed: &TwoStrategyGame,
) -> Result<DominationReport> {
    let original = game.congestion_of(nash)?;
    let c = original.bottleneck();
    let c_star = game.congestion_of(optimal)?.bottleneck();
    let recount = transformed.eq_congestion_recount();
    let c_tilde = recount.iter().copied().max().unwrap_or(0);
    let c_star_tilde = transformed.opt_bottleneck();
    let congestion_preserved =
        recount.as_slice() == original.as_slice() && transformed.congestion() == original.as_slice();
    let type_a_above_psi = transformed.type_b_on_high_resources(transformed.psi()).is_empty();
    let in_equilibrium = transformed.equilibrium_violation()?.is_none();

    let mut violations = Vec::new();
    if transformed.num_resources() > game.num_resources() {
        violations.push(format!(
            "resource count grew from {} to {}",
            game.num_resources(),
            transformed.num_resources()
        ));
    }
    if transformed.degree() != game.degree() {
        violations.push("delay degree changed".into());
    }
    if !congestion_preserved {
        violations.push("equilibrium congestion vector changed".into());
    }
    if c_tilde != c {
        violations.push(format!("equilibrium bottleneck changed from {c} to {c_tilde}"));
    }
    if u64::from(c_star_tilde) > 7 * u64::from(c_star) {
        violations.push(format!(
            "tracked optimum {c_star_tilde} exceeds 7 C* = {}",
            7 * c_star
        ));
    }
    if !type_a_above_psi {
        violations.push(format!(
            "a type-B player uses a resource above psi = {}",
            transformed.psi()
        ));
    }
    if !in_equilibrium {
        violations.push("equilibrium profile is no longer a Nash equilibrium".into());
    }
    Ok(DominationReport {
        num_resources: game.num_resources(),
        transformed_num_resources: transformed.num_resources(),
        same_degree: transformed.degree() == game.degree(),
        c,
        c_tilde,
        congestion_preserved,
        c_star,
        c_star_tilde,
        beta_observed: f64::from(c_star_tilde) / f64::from(c_star.max(1)),
        type_a_above_psi,
        in_equilibrium,
        violations,
    })
}

/// Like [`domination_report`], but any failed check is an error.
pub fn verify_domination(
    game: &Game,
    nash: &Profile,
    optimal: &Profile,
    transformed: &TwoStrategyGame,
) -> Result<DominationReport> {
    let report = domination_report(game, nash, optimal, transformed)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::DominationViolation(report.violations.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_player_is_left_alone() {
        let mut tsg = TwoStrategyGame::from_players(4, 1, 1, vec![(vec![0, 1], vec![2, 3])]).unwrap();
        tsg.clean().unwrap();
        assert_eq!(tsg.num_players(), 1);
        assert_eq!(tsg.player(0).unwrap().eq, vec![0, 1]);
    }

    #[test]
    fn overlap_splits_into_type_a_and_residual() {
        // eq = {a, b}, opt = {b, c} plus a second player so b has congestion 2
        let (a, b, c) = (0, 1, 2);
        let mut tsg =
            TwoStrategyGame::from_players(3, 1, 1, vec![(vec![a, b], vec![b, c]), (vec![b], vec![b])])
                .unwrap();
        let eq_before = tsg.eq_congestion_recount();
        let opt_before = tsg.opt_congestion();
        tsg.clean().unwrap();
        assert_eq!(tsg.eq_congestion_recount(), eq_before);
        assert_eq!(tsg.opt_congestion(), opt_before);
        let players: Vec<_> = tsg
            .players()
            .map(|(_, p)| (p.eq.clone(), p.opt.clone()))
            .collect();
        assert!(players.contains(&(vec![b], vec![b])));
        assert!(players.contains(&(vec![a], vec![c])));
        assert_eq!(tsg.num_players(), 3);
        assert!(tsg
            .players()
            .all(|(_, p)| p.is_type_a() || p.overlap().is_empty()));
    }

    #[test]
    fn redundant_optimal_resources_are_pruned() {
        // type-A on a congestion-1 resource needs only one of its two cheap targets
        let mut tsg = TwoStrategyGame::from_players(3, 1, 1, vec![(vec![0], vec![1, 2])]).unwrap();
        tsg.clean().unwrap();
        assert_eq!(tsg.player(0).unwrap().opt.len(), 1);
        assert!(tsg.is_stable(0).unwrap());
    }

    #[test]
    fn type_a_containing_its_resource_keeps_only_it() {
        let mut tsg = TwoStrategyGame::from_players(3, 1, 1, vec![(vec![0], vec![0, 1, 2])]).unwrap();
        tsg.clean().unwrap();
        assert_eq!(tsg.player(0).unwrap().opt, vec![0]);
    }

    #[test]
    fn deviation_counts_own_resources_once() {
        let tsg =
            TwoStrategyGame::from_players(2, 2, 1, vec![(vec![0], vec![0]), (vec![0], vec![1])]).unwrap();
        assert_eq!(tsg.cost(0).unwrap(), 4);
        assert_eq!(tsg.deviation_cost(0).unwrap(), 4);
        assert_eq!(tsg.deviation_cost(1).unwrap(), 1);
        assert_eq!(tsg.equilibrium_violation().unwrap().map(|v| v.0), Some(1));
    }

    #[test]
    fn induced_game_agrees_with_native_check() {
        let tsg = TwoStrategyGame::from_players(
            4,
            1,
            1,
            vec![(vec![0], vec![1]), (vec![0], vec![2, 3]), (vec![1, 2], vec![3])],
        )
        .unwrap();
        let (game, profile, ids) = tsg.induced_game().unwrap();
        assert_eq!(ids.len(), 3);
        assert_eq!(
            equilibria::is_nash(&game, &profile).unwrap(),
            tsg.equilibrium_violation().unwrap().is_none()
        );
    }
}
