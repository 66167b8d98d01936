//! Finite-horizon strategy enumeration, window utilities and pure-profile
//! equilibrium search, applied in receding-horizon fashion.

mod policy;
mod solve;
mod tree;
mod value;

pub use policy::{Decision, Fallback, RecedingHorizonPolicy};
pub use solve::{
    solve_bne, solve_sender_leader, EquilibriumResult, GameAnalysis, SolutionConcept, BEST_RESPONSE_TOL,
};
pub use tree::{
    enumerate_strategy_trees, NodeLayout, ProfileIndex, StrategySets, StrategyTree, MAX_JOINT_PROFILES,
};
pub use value::{expected_utilities, path_weights, ExpectedUtilities};
