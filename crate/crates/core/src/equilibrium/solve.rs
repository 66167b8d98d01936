//! Pure-profile equilibrium search over a receding-horizon window.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::tree::{check_guard, decode_into, tree_count, NodeLayout, ProfileIndex, StrategyTree};
use super::value::{receiver_value, sender_value};
use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{ActionId, ReactionId, Scenario, SenderType, StateId};

/// A deviation must gain more than this to break a best response.
pub const BEST_RESPONSE_TOL: f64 = 1e-12;

/// Below this many evaluations the tables are filled sequentially.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionConcept {
    /// Mutual best responses with whole-tree deviations.
    BayesNash,
    /// The receiver answers each sender profile with its first best
    /// response, and each sender type picks its tree anticipating that
    /// answer, holding the other type's tree fixed.
    SenderLeader,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub profile: StrategyTree,
    pub index: ProfileIndex,
    pub sender_value_b: f64,
    pub sender_value_m: f64,
    pub receiver_value: f64,
    /// Number of profiles satisfying the equilibrium conditions.
    pub multiplicity: u64,
    /// More than one profile qualified and the first in enumeration order
    /// was returned.
    pub tie_broken: bool,
    pub concept: SolutionConcept,
}

#[derive(Debug, Clone, Copy)]
struct PairOutcome {
    /// First receiver tree attaining the best receiver value.
    reply: u64,
    equilibria: u64,
    first_equilibrium: Option<u64>,
}

/// All value tables needed to solve the window game at one (belief, state).
pub struct GameAnalysis<'a> {
    scenario: &'a Scenario,
    belief: BeliefState,
    x_now: StateId,
    layout: NodeLayout,
    sender_trees: usize,
    receiver_trees: usize,
    /// `[type][s * receiver_trees + r]`
    sender_values: [Vec<f64>; 2],
    /// `[type][r]`: best value of the type against receiver tree r.
    sender_best: [Vec<f64>; 2],
    /// `[s_b * sender_trees + s_m]`
    pairs: Vec<PairOutcome>,
}

fn fill<T, F>(len: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if len.saturating_mul(work) >= PARALLEL_THRESHOLD {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

fn first_argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 + BEST_RESPONSE_TOL {
            best = (i, v);
        }
    }
    best
}

impl<'a> GameAnalysis<'a> {
    pub fn new(scenario: &'a Scenario, belief: BeliefState, x_now: StateId) -> Result<Self> {
        let al = &scenario.alphabets;
        if x_now.0 >= al.num_states() {
            return Err(Error::InvalidScenario(format!("state index {} out of range", x_now.0)));
        }
        let layout = NodeLayout::new(al.num_states(), scenario.horizon)?;
        check_guard(al, layout)?;
        let nodes = layout.node_count();
        let (na, nr) = (al.num_actions(), al.num_reactions());
        let sender_trees = tree_count(na, nodes) as usize;
        let receiver_trees = tree_count(nr, nodes) as usize;

        let actions = |i: usize| -> Vec<ActionId> {
            let mut buf = vec![0; nodes];
            decode_into(i as u64, na, &mut buf);
            buf.into_iter().map(ActionId).collect()
        };
        let reactions_of = |i: usize| -> Vec<ReactionId> {
            let mut buf = vec![0; nodes];
            decode_into(i as u64, nr, &mut buf);
            buf.into_iter().map(ReactionId).collect()
        };
        let all_reactions: Vec<Vec<ReactionId>> = (0..receiver_trees).map(reactions_of).collect();

        let sender_table = |t: SenderType| -> Vec<f64> {
            let rows: Vec<Vec<f64>> = fill(sender_trees, receiver_trees, |s| {
                let acts = actions(s);
                all_reactions
                    .iter()
                    .map(|rt| sender_value(scenario, layout, t, &acts, rt, x_now))
                    .collect()
            });
            rows.into_iter().flatten().collect()
        };
        let sender_values = [sender_table(SenderType::Benign), sender_table(SenderType::Malicious)];
        let sender_best: [Vec<f64>; 2] = std::array::from_fn(|t| {
            (0..receiver_trees)
                .map(|r| {
                    (0..sender_trees)
                        .map(|s| sender_values[t][s * receiver_trees + r])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        });

        let pairs = fill(sender_trees * sender_trees, receiver_trees, |pair| {
            let (sb, sm) = (pair / sender_trees, pair % sender_trees);
            let (ab, am) = (actions(sb), actions(sm));
            let values: Vec<f64> = all_reactions
                .iter()
                .map(|rt| receiver_value(scenario, layout, &ab, &am, rt, belief, x_now))
                .collect();
            let (reply, best) = first_argmax(values.iter().copied());
            let mut equilibria = 0;
            let mut first_equilibrium = None;
            for (r, &v) in values.iter().enumerate() {
                if v < best - BEST_RESPONSE_TOL {
                    continue;
                }
                let ok_b = sender_values[0][sb * receiver_trees + r] >= sender_best[0][r] - BEST_RESPONSE_TOL;
                let ok_m = sender_values[1][sm * receiver_trees + r] >= sender_best[1][r] - BEST_RESPONSE_TOL;
                if ok_b && ok_m {
                    equilibria += 1;
                    first_equilibrium.get_or_insert(r as u64);
                }
            }
            PairOutcome { reply: reply as u64, equilibria, first_equilibrium }
        });

        Ok(Self {
            scenario,
            belief,
            x_now,
            layout,
            sender_trees,
            receiver_trees,
            sender_values,
            sender_best,
            pairs,
        })
    }

    fn sender_value_of(&self, t: SenderType, s: usize, r: usize) -> f64 {
        self.sender_values[t.index()][s * self.receiver_trees + r]
    }

    fn pair(&self, sb: usize, sm: usize) -> &PairOutcome {
        &self.pairs[sb * self.sender_trees + sm]
    }

    fn build(&self, index: ProfileIndex, multiplicity: u64, concept: SolutionConcept) -> EquilibriumResult {
        let al = &self.scenario.alphabets;
        let nodes = self.layout.node_count();
        let mut buf = vec![0; nodes];
        let mut actions = |i: u64| {
            decode_into(i, al.num_actions(), &mut buf);
            buf.iter().map(|&a| ActionId(a)).collect::<Vec<_>>()
        };
        let benign = actions(index.benign);
        let malicious = actions(index.malicious);
        let mut rbuf = vec![0; nodes];
        decode_into(index.receiver, al.num_reactions(), &mut rbuf);
        let reactions: Vec<ReactionId> = rbuf.into_iter().map(ReactionId).collect();
        let receiver =
            receiver_value(self.scenario, self.layout, &benign, &malicious, &reactions, self.belief, self.x_now);
        let r = index.receiver as usize;
        EquilibriumResult {
            sender_value_b: self.sender_value_of(SenderType::Benign, index.benign as usize, r),
            sender_value_m: self.sender_value_of(SenderType::Malicious, index.malicious as usize, r),
            receiver_value: receiver,
            profile: StrategyTree::new(self.layout, benign, malicious, reactions)
                .expect("decoded trees match the layout"),
            index,
            multiplicity,
            tie_broken: multiplicity > 1,
            concept,
        }
    }

    /// First pure Bayesian-Nash equilibrium in enumeration order.
    pub fn bayes_nash(&self) -> Result<EquilibriumResult> {
        let multiplicity: u64 = self.pairs.iter().map(|p| p.equilibria).sum();
        let first = self.pairs.iter().enumerate().find_map(|(i, p)| p.first_equilibrium.map(|r| (i, r)));
        match first {
            Some((pair, r)) => {
                let index = ProfileIndex {
                    benign: (pair / self.sender_trees) as u64,
                    malicious: (pair % self.sender_trees) as u64,
                    receiver: r,
                };
                Ok(self.build(index, multiplicity, SolutionConcept::BayesNash))
            }
            None => Err(Error::NoPureEquilibrium { cycle: self.best_response_cycle() }),
        }
    }

    /// First sender-leader profile in enumeration order.
    #[allow(clippy::needless_range_loop)]
    pub fn sender_leader(&self) -> Result<EquilibriumResult> {
        let n = self.sender_trees;
        let reply = |sb: usize, sm: usize| self.pair(sb, sm).reply as usize;
        let best_b: Vec<f64> = (0..n)
            .map(|sm| {
                (0..n)
                    .map(|sb| self.sender_value_of(SenderType::Benign, sb, reply(sb, sm)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let best_m: Vec<f64> = (0..n)
            .map(|sb| {
                (0..n)
                    .map(|sm| self.sender_value_of(SenderType::Malicious, sm, reply(sb, sm)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut first = None;
        let mut multiplicity = 0;
        for sb in 0..n {
            for sm in 0..n {
                let r = reply(sb, sm);
                let ok_b = self.sender_value_of(SenderType::Benign, sb, r) >= best_b[sm] - BEST_RESPONSE_TOL;
                let ok_m = self.sender_value_of(SenderType::Malicious, sm, r) >= best_m[sb] - BEST_RESPONSE_TOL;
                if ok_b && ok_m {
                    multiplicity += 1;
                    first.get_or_insert(ProfileIndex { benign: sb as u64, malicious: sm as u64, receiver: r as u64 });
                }
            }
        }
        match first {
            Some(index) => Ok(self.build(index, multiplicity, SolutionConcept::SenderLeader)),
            None => Err(Error::NoPureEquilibrium { cycle: self.best_response_cycle() }),
        }
    }

    fn sender_reply(&self, t: SenderType, r: usize) -> usize {
        first_argmax((0..self.sender_trees).map(|s| self.sender_value_of(t, s, r))).0
    }

    /// Simultaneous best-response dynamics from the first profile, returning
    /// the profiles on the cycle it enters.
    pub fn best_response_cycle(&self) -> Vec<ProfileIndex> {
        let mut seen: HashMap<ProfileIndex, usize> = HashMap::new();
        let mut order = Vec::new();
        let mut current = ProfileIndex { benign: 0, malicious: 0, receiver: 0 };
        loop {
            if let Some(&start) = seen.get(&current) {
                return order.split_off(start);
            }
            seen.insert(current, order.len());
            order.push(current);
            let r = current.receiver as usize;
            let sb = self.sender_reply(SenderType::Benign, r);
            let sm = self.sender_reply(SenderType::Malicious, r);
            current = ProfileIndex { benign: sb as u64, malicious: sm as u64, receiver: self.pair(sb, sm).reply };
        }
    }

    /// Whether `index` is a mutual best response, checked against the tables.
    pub fn is_bayes_nash(&self, index: ProfileIndex) -> bool {
        let (sb, sm, r) = (index.benign as usize, index.malicious as usize, index.receiver as usize);
        let best_r = (0..self.receiver_trees)
            .map(|rr| self.receiver_value_of(sb, sm, rr))
            .fold(f64::NEG_INFINITY, f64::max);
        self.sender_value_of(SenderType::Benign, sb, r) >= self.sender_best[0][r] - BEST_RESPONSE_TOL
            && self.sender_value_of(SenderType::Malicious, sm, r) >= self.sender_best[1][r] - BEST_RESPONSE_TOL
            && self.receiver_value_of(sb, sm, r) >= best_r - BEST_RESPONSE_TOL
    }

    fn receiver_value_of(&self, sb: usize, sm: usize, r: usize) -> f64 {
        let al = &self.scenario.alphabets;
        let nodes = self.layout.node_count();
        let to_actions = |i: usize| {
            let mut buf = vec![0; nodes];
            decode_into(i as u64, al.num_actions(), &mut buf);
            buf.into_iter().map(ActionId).collect::<Vec<_>>()
        };
        let mut rbuf = vec![0; nodes];
        decode_into(r as u64, al.num_reactions(), &mut rbuf);
        let reactions: Vec<ReactionId> = rbuf.into_iter().map(ReactionId).collect();
        receiver_value(self.scenario, self.layout, &to_actions(sb), &to_actions(sm), &reactions, self.belief, self.x_now)
    }

    pub fn sender_tree_count(&self) -> usize {
        self.sender_trees
    }

    pub fn receiver_tree_count(&self) -> usize {
        self.receiver_trees
    }
}

/// Pure Bayesian-Nash equilibrium of the window game at (belief, x_now).
pub fn solve_bne(scenario: &Scenario, belief: BeliefState, x_now: StateId) -> Result<EquilibriumResult> {
    GameAnalysis::new(scenario, belief, x_now)?.bayes_nash()
}

/// Sender-leader solution of the window game at (belief, x_now).
pub fn solve_sender_leader(scenario: &Scenario, belief: BeliefState, x_now: StateId) -> Result<EquilibriumResult> {
    GameAnalysis::new(scenario, belief, x_now)?.sender_leader()
}
