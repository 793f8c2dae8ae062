//! Phase loop of the transformation.
//!
//! Phase `w` (for `w = C, C-1, ..., psi+1`) removes every type-B player whose
//! cost lies in `(w^M, (w+1)^M]`. At the start of phase `w` every resource with
//! congestion above `w` carries only type-A players.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{PlayerId, TraceEvent, TwoStrategyGame, TwoStrategyPlayer};
use crate::error::{Error, Result};
use crate::game::{delay, Cost, Game, Profile, ResourceId};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase_index: u32,
    /// Type-B players in the phase's cost band when the phase started.
    pub band_players: usize,
    pub eliminations: usize,
    pub d_players: usize,
    pub e_players: usize,
    /// Resources with congestion exactly `phase_index`.
    pub x_resources: usize,
    /// Resources of X carrying type-A players, in marking order.
    pub marking_resources: Vec<ResourceId>,
    pub marked: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TransformOptions {
    /// Record a [`TraceEvent`] per mutating operation.
    pub trace: bool,
    /// Re-verify equilibrium and congestion after every mutation.
    pub check_each_step: bool,
}

#[derive(Clone, Debug)]
pub struct TransformOutcome {
    pub game: TwoStrategyGame,
    /// True when `C <= psi`: nothing beyond cleaning was done.
    pub noop: bool,
    pub preprocessed: usize,
    pub phases: Vec<PhaseSummary>,
    pub trace: Vec<TraceEvent>,
}

/// Working data of one phase.
struct PhaseState {
    index: u32,
    low: Cost,
    high: Cost,
    /// Marking order over X restricted to resources with type-A players.
    marking_order: Vec<ResourceId>,
    cursor: usize,
    check: bool,
}

impl PhaseState {
    fn in_band(&self, cost: Cost) -> bool {
        self.low < cost && cost <= self.high
    }
}

impl TwoStrategyGame {
    fn structural(&self, phase: u32, what: impl Into<String>) -> Error {
        let dump = serde_json::to_string(&self.to_file()).unwrap_or_default();
        Error::Structural {
            phase,
            detail: format!("{}; state: {dump}", what.into()),
        }
    }

    fn type_b_ids(&self) -> Vec<PlayerId> {
        self.players()
            .filter(|(_, p)| p.is_type_b())
            .map(|(id, _)| id)
            .collect()
    }

    fn check_step(&self, phase: u32, after: &str) -> Result<()> {
        if let Some((id, cost, dev)) = self.equilibrium_violation()? {
            return Err(self.structural(
                phase,
                format!("player {id} unstable after {after}: cost {cost} > deviation {dev}"),
            ));
        }
        if self.eq_congestion_recount() != self.congestion() {
            return Err(self.structural(phase, format!("equilibrium congestion changed by {after}")));
        }
        Ok(())
    }

    /// Replaces type-B `player` by one new player per partition pair
    /// (equilibrium part, optimal part). Returns the new ids.
    pub fn partition_transform(&mut self, player: PlayerId) -> Result<Vec<PlayerId>> {
        let p = self.get(player)?;
        if !p.is_type_b() {
            return Err(Error::PartitionPrecondition(format!(
                "player {player} is not type-B"
            )));
        }
        let pairs = super::pms_partition(&p.eq, &p.opt, self.congestion(), self.degree())?;
        self.remove(player)?;
        let mut new_players = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let id = self.insert(TwoStrategyPlayer::new(
                pair.eq_part.clone(),
                pair.opt_part.clone(),
            ));
            new_players.push(id);
        }
        self.record(TraceEvent::PartitionTransform {
            player,
            pairs,
            new_players: new_players.clone(),
        });
        for &id in &new_players {
            if self.get(id)?.is_type_a() {
                self.prune(id)?;
            }
        }
        Ok(new_players)
    }

    /// Moves `player`'s singleton optimal resource off resources congested
    /// above `phase_index` by exchanging optimal strategies with type-A
    /// players sitting there. Returns the number of exchanges.
    pub fn eliminate_high_congestion(&mut self, phase_index: u32, player: PlayerId) -> Result<usize> {
        let p = self.get(player)?;
        if p.opt.len() != 1 {
            return Err(Error::PartitionPrecondition(format!(
                "player {player} must have a single optimal resource"
            )));
        }
        let mut exchanges = 0;
        loop {
            let p = self.get(player)?;
            if p.opt.len() != 1 {
                break;
            }
            let x = p.opt[0];
            if self.congestion()[x] <= phase_index {
                break;
            }
            let own_eq = p.eq.clone();
            // type-A donors on x, largest optimal set first, lowest id on ties
            let donor = self
                .players()
                .filter(|&(id, q)| {
                    id != player
                        && q.eq == [x]
                        && q.opt != [x]
                        && q.opt.iter().all(|r| own_eq.binary_search(r).is_err())
                })
                .map(|(id, q)| (std::cmp::Reverse(q.opt.len()), id))
                .min()
                .map(|(_, id)| id);
            let Some(donor) = donor else {
                return Err(self.structural(
                    phase_index,
                    format!("no type-A player on resource {x} can take over player {player}'s optimal slot"),
                ));
            };
            let donor_opt = self.get(donor)?.opt.clone();
            let pick = donor_opt
                .iter()
                .copied()
                .filter(|&r| self.congestion()[r] >= phase_index)
                .min_by_key(|&r| (self.congestion()[r], r));
            let new_opt = match pick {
                Some(r) => vec![r],
                None => donor_opt,
            };
            self.player_mut(player)?.opt = new_opt.clone();
            self.player_mut(donor)?.opt = vec![x];
            exchanges += 1;
            self.record(TraceEvent::Eliminate {
                player,
                donor,
                resource: x,
                new_opt,
            });
        }
        Ok(exchanges)
    }

    /// Runs phase `phase_index`.
    pub fn run_phase(&mut self, phase_index: u32) -> Result<PhaseSummary> {
        self.run_phase_with(phase_index, false)
    }

    fn run_phase_with(&mut self, phase_index: u32, check: bool) -> Result<PhaseSummary> {
        let degree = self.degree();
        let mut st = PhaseState {
            index: phase_index,
            low: delay(u64::from(phase_index), degree)?,
            high: delay(u64::from(phase_index) + 1, degree)?,
            marking_order: Vec::new(),
            cursor: 0,
            check,
        };
        let mut summary = PhaseSummary {
            phase_index,
            ..PhaseSummary::default()
        };

        for id in self.type_b_ids() {
            let cost = self.cost(id)?;
            if cost > st.high {
                return Err(self.structural(
                    phase_index,
                    format!("type-B player {id} has cost {cost} above the phase band"),
                ));
            }
        }

        // (a) split every type-B player in the band
        let band: Vec<PlayerId> = self
            .type_b_ids()
            .into_iter()
            .filter(|&id| self.cost(id).map(|c| st.in_band(c)).unwrap_or(false))
            .collect();
        summary.band_players = band.len();
        for id in band {
            self.partition_transform(id)?;
            if st.check {
                self.check_step(phase_index, "partition_transform")?;
            }
        }

        // (b) what is left in the band has one optimal resource of congestion >= w
        let mut qualified = BTreeSet::new();
        for id in self.type_b_ids() {
            if !st.in_band(self.cost(id)?) {
                continue;
            }
            let p = self.get(id)?;
            if p.opt.len() != 1 || self.congestion()[p.opt[0]] < phase_index {
                return Err(self.structural(
                    phase_index,
                    format!("band player {id} does not have a single optimal resource of congestion >= {phase_index}"),
                ));
            }
            qualified.insert(id);
        }
        for (id, p) in self.players() {
            if p.is_type_a() && p.opt.len() == 1 && self.congestion()[p.eq[0]] == phase_index {
                qualified.insert(id);
            }
        }

        // (c) move optimal slots off resources congested above w
        for &id in &qualified {
            summary.eliminations += self.eliminate_high_congestion(phase_index, id)?;
            if st.check {
                self.check_step(phase_index, "eliminate_high_congestion")?;
            }
        }

        // (d) split into D and E; D is transformed right away
        let mut d = Vec::new();
        let mut e = VecDeque::new();
        for &id in &qualified {
            let p = self.get(id)?;
            if !p.is_type_b() {
                continue;
            }
            if p.opt.len() > 1 {
                d.push(id);
            } else if self.congestion()[p.opt[0]] == phase_index {
                e.push_back(id);
            } else {
                return Err(self.structural(
                    phase_index,
                    format!("player {id} fits neither D nor E after elimination"),
                ));
            }
        }
        summary.d_players = d.len();
        summary.e_players = e.len();
        for id in d {
            let pieces = self.partition_transform(id)?;
            if st.check {
                self.check_step(phase_index, "partition_transform (D)")?;
            }
            for piece in pieces {
                if self.get(piece)?.is_type_b() && self.cost(piece)? > st.low {
                    return Err(
                        self.structural(phase_index, format!("D piece {piece} stays above the band floor"))
                    );
                }
            }
        }

        // (e) grow E players' optimal sets with marked type-A donors
        let x: Vec<ResourceId> = (0..self.num_resources())
            .filter(|&r| self.congestion()[r] == phase_index)
            .collect();
        summary.x_resources = x.len();
        if !e.is_empty() {
            let mut type_a_count = vec![0usize; self.num_resources()];
            for (_, p) in self.players() {
                if p.is_type_a() {
                    type_a_count[p.eq[0]] += 1;
                }
            }
            let mut order: Vec<ResourceId> = x.iter().copied().filter(|&r| type_a_count[r] > 0).collect();
            order.sort_by_key(|&r| (type_a_count[r], r));
            st.marking_order = order;
        }
        summary.marking_resources = st.marking_order.clone();

        let budget = 4 * (self.num_players() + self.num_resources() + 1).pow(2);
        let mut rounds = 0;
        while let Some(l) = e.pop_front() {
            rounds += 1;
            if rounds > budget {
                return Err(self.structural(phase_index, "E-step made no progress"));
            }
            self.mark_and_split(&mut st, l, &mut e)?;
            summary.marked += 1;
        }

        for id in self.type_b_ids() {
            if self.cost(id)? > st.low {
                return Err(self.structural(
                    phase_index,
                    format!("type-B player {id} still costs more than {phase_index}^M after the phase"),
                ));
            }
        }
        self.record(TraceEvent::Phase {
            summary: summary.clone(),
        });
        Ok(summary)
    }

    /// One E-step: borrow the optimal set of an unmarked type-A player on X,
    /// split the E player, and requeue any piece still above the band floor.
    fn mark_and_split(
        &mut self,
        st: &mut PhaseState,
        l: PlayerId,
        queue: &mut VecDeque<PlayerId>,
    ) -> Result<()> {
        let target = self.get(l)?.clone();
        let n = st.marking_order.len();
        let mut chosen = None;
        for step in 0..n {
            let slot = (st.cursor + step) % n;
            let r = st.marking_order[slot];
            let donor = self
                .players()
                .find(|(_, q)| {
                    !q.marked
                        && q.eq == [r]
                        && q.opt.iter().all(|x| {
                            target.opt.binary_search(x).is_err() && target.eq.binary_search(x).is_err()
                        })
                })
                .map(|(id, _)| id);
            if let Some(donor) = donor {
                chosen = Some((donor, r));
                st.cursor = (slot + 1) % n;
                break;
            }
        }
        let Some((donor, r_m)) = chosen else {
            return Err(self.structural(
                st.index,
                format!("no unmarked type-A player left on X for E player {l}"),
            ));
        };

        let mut merged = target.opt.clone();
        merged.extend(self.get(donor)?.opt.iter().copied());
        merged.sort_unstable();
        self.player_mut(l)?.opt = merged.clone();
        {
            let d = self.player_mut(donor)?;
            d.opt = vec![r_m];
            d.marked = true;
        }
        self.record(TraceEvent::Mark {
            player: l,
            donor,
            resource: r_m,
            merged_opt: merged,
        });
        let pieces = self.partition_transform(l)?;
        if st.check {
            self.check_step(st.index, "E-step")?;
        }
        for piece in pieces {
            self.settle(st, piece, queue)?;
        }
        Ok(())
    }

    /// Routes a piece produced during the E-step: type-A pieces and pieces at
    /// or below the band floor are done; others go back to E, after their
    /// optimal resource has been moved down to congestion `w` if needed.
    fn settle(&mut self, st: &mut PhaseState, id: PlayerId, queue: &mut VecDeque<PlayerId>) -> Result<()> {
        let p = self.get(id)?;
        if !p.is_type_b() || self.cost(id)? <= st.low {
            return Ok(());
        }
        if p.opt.len() == 1 && self.congestion()[p.opt[0]] > st.index {
            self.eliminate_high_congestion(st.index, id)?;
        }
        let p = self.get(id)?;
        if p.opt.len() > 1 {
            for piece in self.partition_transform(id)? {
                if self.get(piece)?.is_type_b() && self.cost(piece)? > st.low {
                    return Err(self.structural(
                        st.index,
                        format!("piece {piece} of {id} stays above the band floor"),
                    ));
                }
            }
        } else if self.congestion()[p.opt[0]] == st.index {
            queue.push_back(id);
        } else {
            return Err(self.structural(
                st.index,
                format!("piece {id} has an optimal resource below the phase index"),
            ));
        }
        Ok(())
    }
}

/// Transforms `game`, played at Nash profile `nash` with optimum `optimal`,
/// into a two-strategy game in which every resource with congestion above
/// `psi = max(2M, 3C*)` is used only by type-A players.
pub fn transform_to_type_a(
    game: &Game,
    nash: &Profile,
    optimal: &Profile,
    options: TransformOptions,
) -> Result<TransformOutcome> {
    let mut tsg = TwoStrategyGame::from_profiles(game, nash, optimal)?;
    if options.trace {
        tsg.enable_trace();
    }
    tsg.clean()?;
    if options.check_each_step {
        tsg.check_step(0, "clean")?;
    }
    let (c, psi) = (tsg.c(), tsg.psi());
    if c <= psi {
        let trace = tsg.take_trace();
        return Ok(TransformOutcome {
            game: tsg,
            noop: true,
            preprocessed: 0,
            phases: Vec::new(),
            trace,
        });
    }

    let ceiling = delay(u64::from(c) + 1, tsg.degree())?;
    let mut preprocessed = 0;
    for id in tsg.type_b_ids() {
        if tsg.cost(id)? > ceiling {
            tsg.partition_transform(id)?;
            preprocessed += 1;
            if options.check_each_step {
                tsg.check_step(c, "preprocessing")?;
            }
        }
    }

    let mut phases = Vec::new();
    for w in (psi + 1..=c).rev() {
        phases.push(tsg.run_phase_with(w, options.check_each_step)?);
    }
    let trace = tsg.take_trace();
    Ok(TransformOutcome {
        game: tsg,
        noop: false,
        preprocessed,
        phases,
        trace,
    })
}
