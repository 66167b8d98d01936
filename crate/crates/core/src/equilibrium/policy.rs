use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::solve::{GameAnalysis, SolutionConcept};
use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{ActionId, ReactionId, Scenario, SenderType, StateId};

/// What the policy does at a (belief, state) where the window game has no
/// pure Bayesian-Nash equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Report the error.
    Fail,
    /// Play the sender-leader solution of the same window game.
    #[default]
    SenderLeader,
}

/// Root prescriptions of the window equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub action_benign: ActionId,
    pub action_malicious: ActionId,
    pub reaction: ReactionId,
    pub concept: SolutionConcept,
}

impl Decision {
    pub fn action(&self, t: SenderType) -> ActionId {
        match t {
            SenderType::Benign => self.action_benign,
            SenderType::Malicious => self.action_malicious,
        }
    }

    /// Both types prescribe the same action.
    pub fn agrees(&self) -> bool {
        self.action_benign == self.action_malicious
    }
}

/// Receding-horizon decision rule: solve the T-step window game at the
/// current (belief, state) and keep only the root prescriptions.
///
/// Results are memoised on the exact bit pattern of the belief and the state.
/// The cache is owned, so each episode worker holds its own policy.
#[derive(Debug, Clone)]
pub struct RecedingHorizonPolicy<'a> {
    scenario: &'a Scenario,
    fallback: Fallback,
    cache: HashMap<(u64, StateId), Decision>,
}

impl<'a> RecedingHorizonPolicy<'a> {
    pub fn new(scenario: &'a Scenario, fallback: Fallback) -> Self {
        Self { scenario, fallback, cache: HashMap::new() }
    }

    pub fn decide(&mut self, belief: BeliefState, x_now: StateId) -> Result<Decision> {
        let key = (belief.malicious().to_bits(), x_now);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let analysis = GameAnalysis::new(self.scenario, belief, x_now)?;
        let result = match analysis.bayes_nash() {
            Ok(eq) => eq,
            Err(Error::NoPureEquilibrium { .. }) if self.fallback == Fallback::SenderLeader => {
                analysis.sender_leader()?
            }
            Err(e) => return Err(e),
        };
        let (action_benign, action_malicious, reaction) = result.profile.root();
        let decision = Decision { action_benign, action_malicious, reaction, concept: result.concept };
        self.cache.insert(key, decision);
        Ok(decision)
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }
}
