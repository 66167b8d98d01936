#![allow(dead_code)]

use siggame::io::builtin;
use siggame::model::{ActionId, ReactionId, Scenario, StateId};
use siggame::BeliefState;

pub const X_N: StateId = StateId(0);
pub const X_A: StateId = StateId(1);
pub const A_B: ActionId = ActionId(0);
pub const A_M: ActionId = ActionId(1);
pub const R_B: ReactionId = ReactionId(0);
pub const R_M: ReactionId = ReactionId(1);

pub fn belief(p: f64) -> BeliefState {
    BeliefState::new(p).unwrap()
}

pub fn table1() -> Scenario {
    builtin::table1()
}

pub fn table4() -> Scenario {
    builtin::table4()
}

/// Bundled table1 scenario with a different episode length.
pub fn table1_steps(steps: usize) -> Scenario {
    let mut s = builtin::table1();
    s.episode_length = steps;
    s
}
