//! Dynamic signaling game between a model-based incident handler (the
//! receiver) and a sender that may be an attacker.
//!
//! The receiver observes the state of a finite Markov decision process and
//! keeps a Bayesian belief on whether the sender is benign or malicious. Both
//! players follow a receding-horizon equilibrium of the T-step window game.
//! The crate simulates such episodes and measures the belief and action
//! convergence they exhibit.

pub mod belief;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod model;
pub mod simulator;

pub use belief::{bayes_coefficient, bayes_update, type_conditional_likelihood, BeliefState, LikelihoodPair};
pub use diagnostics::{
    agreement_series, convergence_report, detection_averse_check, kl_decay_estimate, random_walk_belief,
    submartingale_margin, Classification, ConvergenceReport,
};
pub use equilibrium::{
    enumerate_strategy_trees, expected_utilities, solve_bne, Decision, EquilibriumResult, Fallback,
    RecedingHorizonPolicy, StrategyTree,
};
pub use error::{Error, Result};
pub use io::{load_scenario, LoadedScenario, ScenarioFile};
pub use model::{
    check_distinguishability, sample_transition, validate_kernel, ActionId, Alphabets, KernelTable, ReactionId,
    Scenario, SenderType, StateId, TransitionKernel, UtilityTables,
};
pub use simulator::{run_batch, run_episode, Batch, BatchSummary, Trajectory};
