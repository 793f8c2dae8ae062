//! Immutable polynomial bottleneck congestion games.
//!
//! A game has `num_resources` resources, a polynomial degree `M >= 1` and a
//! finite set of pure strategies per player. A strategy is a set of resources;
//! the delay of a resource used by `C` players is `C^M`, a player's cost is the
//! sum of delays over its chosen resources, and the social cost of a state is
//! its bottleneck, the largest congestion over all resources.
//!
//! All costs are exact `u128` values. Overflow is reported, never wrapped.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense resource index in `0..num_resources`.
pub type ResourceId = usize;

/// Exact player cost / potential value.
pub type Cost = u128;

/// `congestion^degree`, computed exactly.
pub fn delay(congestion: u64, degree: u32) -> Result<Cost> {
    Cost::from(congestion)
        .checked_pow(degree)
        .ok_or(Error::Overflow("resource delay"))
}

/// Sums `C_r^M` over the given congestions.
pub(crate) fn delay_sum<I>(congestions: I, degree: u32) -> Result<Cost>
where
    I: IntoIterator<Item = u64>,
{
    congestions.into_iter().try_fold(0, |acc: Cost, c| {
        acc.checked_add(delay(c, degree)?)
            .ok_or(Error::Overflow("delay sum"))
    })
}

/// A pure strategy: a nonempty set of resources, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Strategy(Vec<ResourceId>);

impl Strategy {
    pub fn new(mut resources: Vec<ResourceId>) -> Result<Self> {
        if resources.is_empty() {
            return Err(Error::InvalidGame("empty strategy".into()));
        }
        resources.sort_unstable();
        if let Some(w) = resources.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGame(format!(
                "resource {} repeated within one strategy",
                w[0]
            )));
        }
        Ok(Strategy(resources))
    }

    pub fn resources(&self) -> &[ResourceId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, resource: ResourceId) -> bool {
        self.0.binary_search(&resource).is_ok()
    }
}

/// The finite strategy set of one player.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategySet {
    strategies: Vec<Strategy>,
}

impl StrategySet {
    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }
}

/// One chosen strategy index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(Vec<usize>);

impl Profile {
    pub fn new(choices: Vec<usize>) -> Self {
        Profile(choices)
    }

    /// Every player on its first strategy.
    pub fn first(num_players: usize) -> Self {
        Profile(vec![0; num_players])
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn choice(&self, player: usize) -> usize {
        self.0[player]
    }

    pub fn set_choice(&mut self, player: usize, strategy: usize) {
        self.0[player] = strategy;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Per-resource count of players using each resource.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CongestionVector(Vec<u32>);

impl CongestionVector {
    pub fn zeros(num_resources: usize) -> Self {
        CongestionVector(vec![0; num_resources])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        CongestionVector(counts)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, resource: ResourceId) -> u32 {
        self.0[resource]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `C(S) = max_r C_r`, zero when there is nothing to count.
    pub fn bottleneck(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Total number of player-resource incidences.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub(crate) fn add(&mut self, strategy: &Strategy) {
        for &r in strategy.resources() {
            self.0[r] += 1;
        }
    }

    pub(crate) fn remove(&mut self, strategy: &Strategy) {
        for &r in strategy.resources() {
            self.0[r] -= 1;
        }
    }
}

/// A polynomial bottleneck congestion game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GameFile", into = "GameFile")]
pub struct Game {
    num_resources: usize,
    degree: u32,
    players: Vec<StrategySet>,
}

/// On-disk JSON form of a game.
///
/// `{"degree": M, "num_resources": z, "players": [[[r, ...], ...], ...]}`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub degree: u32,
    pub num_resources: usize,
    pub players: Vec<Vec<Vec<ResourceId>>>,
}

impl TryFrom<GameFile> for Game {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        Game::new(file.num_resources, file.degree, file.players)
    }
}

impl From<Game> for GameFile {
    fn from(game: Game) -> Self {
        GameFile {
            degree: game.degree,
            num_resources: game.num_resources,
            players: game
                .players
                .iter()
                .map(|set| set.strategies.iter().map(|s| s.resources().to_vec()).collect())
                .collect(),
        }
    }
}

impl Game {
    /// Builds and validates a game. Field paths in error messages follow the
    /// JSON layout, e.g. `players[1][0]`.
    pub fn new(num_resources: usize, degree: u32, players: Vec<Vec<Vec<ResourceId>>>) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidGame(format!(
                "degree: must be at least 1, got {degree}"
            )));
        }
        if num_resources < 1 {
            return Err(Error::InvalidGame("num_resources: must be at least 1".into()));
        }
        if players.is_empty() {
            return Err(Error::InvalidGame(
                "players: a game needs at least one player".into(),
            ));
        }
        let mut sets = Vec::with_capacity(players.len());
        for (i, strategies) in players.into_iter().enumerate() {
            if strategies.is_empty() {
                return Err(Error::InvalidGame(format!(
                    "players[{i}]: player has no strategies"
                )));
            }
            let mut built = Vec::with_capacity(strategies.len());
            for (j, resources) in strategies.into_iter().enumerate() {
                if let Some(&r) = resources.iter().find(|&&r| r >= num_resources) {
                    return Err(Error::InvalidGame(format!(
                        "players[{i}][{j}]: resource {r} out of range 0..{num_resources}"
                    )));
                }
                let strategy = Strategy::new(resources).map_err(|e| match e {
                    Error::InvalidGame(msg) => Error::InvalidGame(format!("players[{i}][{j}]: {msg}")),
                    other => other,
                })?;
                built.push(strategy);
            }
            sets.push(StrategySet { strategies: built });
        }
        Ok(Game {
            num_resources,
            degree,
            players: sets,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn players(&self) -> &[StrategySet] {
        &self.players
    }

    pub fn strategies(&self, player: usize) -> &[Strategy] {
        &self.players[player].strategies
    }

    /// Strategy currently chosen by `player` in `profile`. The profile must be valid.
    pub fn chosen<'a>(&'a self, profile: &Profile, player: usize) -> &'a Strategy {
        &self.players[player].strategies[profile.choice(player)]
    }

    /// Size of the full pure-strategy product space, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        self.players
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn validate_profile(&self, profile: &Profile) -> Result<()> {
        if profile.len() != self.players.len() {
            return Err(Error::InvalidProfile(format!(
                "expected {} choices, got {}",
                self.players.len(),
                profile.len()
            )));
        }
        for (i, (&choice, set)) in profile.choices().iter().zip(&self.players).enumerate() {
            if choice >= set.len() {
                return Err(Error::InvalidProfile(format!(
                    "player {i} chose strategy {choice} but has only {}",
                    set.len()
                )));
            }
        }
        Ok(())
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.players.len() {
            return Err(Error::InvalidPlayer {
                player,
                players: self.players.len(),
            });
        }
        Ok(())
    }

    /// Congestion vector of `profile`.
    pub fn congestion_of(&self, profile: &Profile) -> Result<CongestionVector> {
        self.validate_profile(profile)?;
        Ok(self.congestion_unchecked(profile))
    }

    pub(crate) fn congestion_unchecked(&self, profile: &Profile) -> CongestionVector {
        let mut cv = CongestionVector::zeros(self.num_resources);
        for player in 0..self.players.len() {
            cv.add(self.chosen(profile, player));
        }
        cv
    }

    /// `pc_i(S) = sum over the chosen strategy of C_r^M`.
    pub fn player_cost(&self, profile: &Profile, player: usize) -> Result<Cost> {
        self.check_player(player)?;
        let cv = self.congestion_of(profile)?;
        self.player_cost_with(&cv, profile, player)
    }

    pub(crate) fn player_cost_with(
        &self,
        cv: &CongestionVector,
        profile: &Profile,
        player: usize,
    ) -> Result<Cost> {
        delay_sum(
            self.chosen(profile, player)
                .resources()
                .iter()
                .map(|&r| u64::from(cv.get(r))),
            self.degree,
        )
    }

    /// `L(S)`: the largest chosen strategy size.
    pub fn profile_length(&self, profile: &Profile) -> Result<usize> {
        self.validate_profile(profile)?;
        Ok((0..self.players.len())
            .map(|i| self.chosen(profile, i).len())
            .max()
            .unwrap_or(0))
    }
}
