//! Exact finite-horizon average utilities by enumeration of state paths.

use serde::Serialize;

use super::tree::{NodeLayout, StrategyTree};
use crate::belief::{bayes_update, BeliefState, LikelihoodPair};
use crate::model::{ActionId, ReactionId, Scenario, SenderType, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedUtilities {
    pub sender_benign: f64,
    pub sender_malicious: f64,
    pub receiver: f64,
}

impl ExpectedUtilities {
    pub fn sender(&self, t: SenderType) -> f64 {
        match t {
            SenderType::Benign => self.sender_benign,
            SenderType::Malicious => self.sender_malicious,
        }
    }
}

/// Average sender and receiver utilities of `profile` over a window that
/// starts at `x_now` with receiver belief `belief`. The window length is the
/// profile depth.
pub fn expected_utilities(
    scenario: &Scenario,
    profile: &StrategyTree,
    belief: BeliefState,
    x_now: StateId,
) -> ExpectedUtilities {
    let layout = profile.layout();
    let benign = profile.sender_branch(SenderType::Benign);
    let malicious = profile.sender_branch(SenderType::Malicious);
    let reactions = profile.receiver_branch();
    ExpectedUtilities {
        sender_benign: sender_value(scenario, layout, SenderType::Benign, benign, reactions, x_now),
        sender_malicious: sender_value(scenario, layout, SenderType::Malicious, malicious, reactions, x_now),
        receiver: receiver_value(scenario, layout, benign, malicious, reactions, belief, x_now),
    }
}

/// Ū^s for type `t` playing `actions` against `reactions`.
pub(crate) fn sender_value(
    scenario: &Scenario,
    layout: NodeLayout,
    t: SenderType,
    actions: &[ActionId],
    reactions: &[ReactionId],
    x_now: StateId,
) -> f64 {
    struct Walk<'a> {
        scenario: &'a Scenario,
        layout: NodeLayout,
        t: SenderType,
        actions: &'a [ActionId],
        reactions: &'a [ReactionId],
    }

    impl Walk<'_> {
        fn go(&self, depth: usize, code: usize, x: StateId, prob: f64) -> f64 {
            let node = self.layout.offset(depth) + code;
            let (a, r) = (self.actions[node], self.reactions[node]);
            let mut total = prob * self.scenario.utilities.sender(self.t, x, a, r);
            if depth + 1 < self.layout.depth() {
                let n = self.layout.num_states();
                for (next, &p) in self.scenario.kernel.row(x, a, r).iter().enumerate() {
                    if p > 0.0 {
                        total += self.go(depth + 1, code * n + next, StateId(next), prob * p);
                    }
                }
            }
            total
        }
    }

    let walk = Walk { scenario, layout, t, actions, reactions };
    walk.go(0, 0, x_now, 1.0) / layout.depth() as f64
}

/// Ū^r: for each hypothesised type, the expectation over that type's path
/// distribution of its receiver utility weighted by the belief propagated
/// along the path.
pub(crate) fn receiver_value(
    scenario: &Scenario,
    layout: NodeLayout,
    benign: &[ActionId],
    malicious: &[ActionId],
    reactions: &[ReactionId],
    belief: BeliefState,
    x_now: StateId,
) -> f64 {
    struct Walk<'a> {
        scenario: &'a Scenario,
        layout: NodeLayout,
        benign: &'a [ActionId],
        malicious: &'a [ActionId],
        reactions: &'a [ReactionId],
    }

    impl Walk<'_> {
        fn go(&self, depth: usize, code: usize, x: StateId, prob_b: f64, prob_m: f64, belief: BeliefState) -> f64 {
            let node = self.layout.offset(depth) + code;
            let (ab, am, r) = (self.benign[node], self.malicious[node], self.reactions[node]);
            let u = &self.scenario.utilities;
            let mut total = prob_b * belief.benign() * u.receiver(SenderType::Benign, x, ab, r)
                + prob_m * belief.malicious() * u.receiver(SenderType::Malicious, x, am, r);
            if depth + 1 < self.layout.depth() {
                let n = self.layout.num_states();
                let kernel = &self.scenario.kernel;
                let (row_b, row_m) = (kernel.row(x, ab, r), kernel.row(x, am, r));
                for next in 0..n {
                    let (lb, lm) = (row_b[next], row_m[next]);
                    let (nb, nm) = (prob_b * lb, prob_m * lm);
                    if nb == 0.0 && nm == 0.0 {
                        continue;
                    }
                    // A zero mixed likelihood here means the only type that can
                    // produce this state carries zero belief, so its term
                    // vanishes whatever belief is carried forward.
                    let next_belief = LikelihoodPair::new(lb, lm)
                        .and_then(|lik| bayes_update(belief, lik))
                        .unwrap_or(belief);
                    total += self.go(depth + 1, code * n + next, StateId(next), nb, nm, next_belief);
                }
            }
            total
        }
    }

    let walk = Walk { scenario, layout, benign, malicious, reactions };
    walk.go(0, 0, x_now, 1.0, 1.0, belief) / layout.depth() as f64
}

/// Every state sequence of the window (root first) with its probability
/// when the sender has type `t`. Sequences of probability zero are included.
pub fn path_weights(
    scenario: &Scenario,
    profile: &StrategyTree,
    x_now: StateId,
    t: SenderType,
) -> Vec<(Vec<StateId>, f64)> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        scenario: &Scenario,
        profile: &StrategyTree,
        t: SenderType,
        depth: usize,
        code: usize,
        path: &mut Vec<StateId>,
        prob: f64,
        out: &mut Vec<(Vec<StateId>, f64)>,
    ) {
        let layout = profile.layout();
        if depth + 1 == layout.depth() {
            out.push((path.clone(), prob));
            return;
        }
        let node = layout.offset(depth) + code;
        let x = *path.last().expect("path holds the root");
        let row = scenario.kernel.row(x, profile.action(t, node), profile.reaction(node));
        for (next, &p) in row.iter().enumerate() {
            path.push(StateId(next));
            go(scenario, profile, t, depth + 1, code * layout.num_states() + next, path, prob * p, out);
            path.pop();
        }
    }

    let mut out = Vec::new();
    go(scenario, profile, t, 0, 0, &mut vec![x_now], 1.0, &mut out);
    out
}
