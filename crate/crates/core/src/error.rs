use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("player {player} out of range (game has {players} players)")]
    InvalidPlayer { player: usize, players: usize },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    #[error("state space of {states} profiles exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: String, cap: u64 },

    #[error("best-response dynamics did not converge within {steps} steps")]
    Nonconvergence { steps: u64 },

    #[error("profile is not a Nash equilibrium: player {player} can improve from {current} to {deviation}")]
    NotNash {
        player: usize,
        current: u128,
        deviation: u128,
    },

    #[error("partition precondition violated: {0}")]
    PartitionPrecondition(String),

    #[error("structural invariant breached in phase {phase}: {detail}")]
    Structural { phase: u32, detail: String },

    #[error("domination check failed: {0}")]
    DominationViolation(String),

    #[error("expansion precondition violated: {0}")]
    ExpansionPrecondition(String),

    #[error("lower-bound instance failed verification: {0}")]
    LowerBound(String),

    #[error("resource count {requested} exceeds the cap of {cap}")]
    TooManyResources { requested: u128, cap: u64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
