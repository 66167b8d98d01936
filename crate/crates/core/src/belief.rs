//! Receiver beliefs on the sender type and their Bayes-rule updates.

use serde::{Deserialize, Serialize};

use crate::equilibrium::StrategyTree;
use crate::error::{Error, Result};
use crate::model::{Scenario, SenderType, StateId};

/// Mixed likelihoods at or below this value are treated as zero.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Belief that the sender is malicious, π(θ_m). The benign belief is the
/// complement.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BeliefState(f64);

impl BeliefState {
    pub fn new(pi_m: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&pi_m) {
            Ok(Self(pi_m))
        } else {
            Err(Error::InvalidProbability(pi_m))
        }
    }

    pub fn malicious(self) -> f64 {
        self.0
    }

    pub fn benign(self) -> f64 {
        1.0 - self.0
    }

    pub fn of(self, t: SenderType) -> f64 {
        match t {
            SenderType::Benign => self.benign(),
            SenderType::Malicious => self.malicious(),
        }
    }
}

impl TryFrom<f64> for BeliefState {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BeliefState> for f64 {
    fn from(b: BeliefState) -> f64 {
        b.0
    }
}

/// Probability of the observed next state under each hypothesised type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodPair {
    pub benign: f64,
    pub malicious: f64,
}

impl LikelihoodPair {
    pub fn new(benign: f64, malicious: f64) -> Result<Self> {
        for p in [benign, malicious] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        Ok(Self { benign, malicious })
    }

    pub fn of(self, t: SenderType) -> f64 {
        match t {
            SenderType::Benign => self.benign,
            SenderType::Malicious => self.malicious,
        }
    }

    /// Belief-weighted likelihood of the observation.
    pub fn mixed(self, belief: BeliefState) -> f64 {
        self.benign * belief.benign() + self.malicious * belief.malicious()
    }
}

fn checked_denominator(belief: BeliefState, lik: LikelihoodPair) -> Result<f64> {
    let denom = lik.mixed(belief);
    if denom > DENOMINATOR_FLOOR {
        Ok(denom)
    } else {
        Err(Error::InconsistentObservation(denom))
    }
}

/// Posterior belief on θ_m after an observation with likelihoods `lik`.
pub fn bayes_update(belief: BeliefState, lik: LikelihoodPair) -> Result<BeliefState> {
    let denom = checked_denominator(belief, lik)?;
    let post = (lik.malicious * belief.malicious() / denom).clamp(0.0, 1.0);
    Ok(BeliefState(post))
}

/// Multiplicative factor f with π'(θ̂) = f · π(θ̂).
pub fn bayes_coefficient(belief: BeliefState, lik: LikelihoodPair, hat: SenderType) -> Result<f64> {
    let denom = checked_denominator(belief, lik)?;
    Ok(lik.of(hat) / denom)
}

/// Probability of `x_next` under each type, given the states observed so far
/// in the profile's window (`history[0]` is the window root, the last entry
/// the current state).
pub fn type_conditional_likelihood(
    scenario: &Scenario,
    profile: &StrategyTree,
    history: &[StateId],
    x_next: StateId,
) -> Result<LikelihoodPair> {
    let Some((&x_now, _)) = history.split_last() else {
        return Err(Error::InvalidScenario("empty history".into()));
    };
    let layout = profile.layout();
    let node = layout
        .node_of(&history[1..])
        .ok_or(Error::DepthExceeded { history: history.len(), depth: layout.depth() })?;
    let r = profile.reaction(node);
    let kernel = &scenario.kernel;
    Ok(LikelihoodPair {
        benign: kernel.prob(x_next, x_now, profile.action(SenderType::Benign, node), r),
        malicious: kernel.prob(x_next, x_now, profile.action(SenderType::Malicious, node), r),
    })
}
