//! Bottleneck congestion games with polynomial delays: equilibria,
//! price-of-anarchy computation, the type-A transformation, expansion
//! analysis and the tight lower-bound family.

pub mod equilibria;
pub mod error;
pub mod expansion;
pub mod game;
pub mod lower_bound;
pub mod suite;
pub mod transform;

pub use equilibria::{
    best_response, best_response_dynamics, enumerate_nash, is_nash, optimal_profile, price_of_anarchy,
    rosenthal_potential, EquilibriumReport, PoaReport, DEFAULT_STATE_CAP,
};
pub use error::{Error, Result};
pub use expansion::{poa_within_upper_bound, upper_bound_arbitrary, upper_bound_type_a, ResourceGraph};
pub use game::{CongestionVector, Cost, Game, Profile, ResourceId, Strategy};
pub use transform::{transform_to_type_a, TransformOptions, TransformOutcome, TwoStrategyGame};
