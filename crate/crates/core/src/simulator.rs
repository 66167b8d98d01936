//! Closed-loop episodes under the receding-horizon policy, and seeded
//! Monte Carlo batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{bayes_coefficient, bayes_update, LikelihoodPair};
use crate::diagnostics::{agreement_series, convergence_report, Classification};
use crate::equilibrium::{Fallback, RecedingHorizonPolicy};
use crate::error::{Error, Result};
use crate::model::{sample_transition, ActionId, Alphabets, ReactionId, Scenario, SenderType, StateId};

/// One decision step. `belief` is π(θ_m) when the decision is taken; the
/// first step holds the prior. `bayes_coeff` maps the true type's belief at
/// this step to the next one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    /// 1-based step index.
    pub k: usize,
    pub state: StateId,
    pub action_benign: ActionId,
    pub action_malicious: ActionId,
    pub applied_action: ActionId,
    pub reaction: ReactionId,
    pub belief: f64,
    pub bayes_coeff: f64,
    /// Discrete distance between the two types' prescribed actions.
    pub agreement: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub alphabets: Alphabets,
    pub true_type: SenderType,
    pub steps: Vec<Step>,
    /// π(θ_m) after the last step.
    pub final_belief: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// π_0(θ_m), …, π_N(θ_m).
    pub fn beliefs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.belief).chain([self.final_belief]).collect()
    }

    /// Beliefs on the true type, π_0(θ), …, π_N(θ).
    pub fn true_type_beliefs(&self) -> Vec<f64> {
        let beliefs = self.beliefs();
        match self.true_type {
            SenderType::Malicious => beliefs,
            SenderType::Benign => beliefs.into_iter().map(|b| 1.0 - b).collect(),
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.bayes_coeff).collect()
    }
}

/// Runs one episode with a fresh policy that falls back to the sender-leader
/// solution where no pure Bayesian-Nash equilibrium exists.
pub fn run_episode(scenario: &Scenario, seed: u64) -> Result<Trajectory> {
    let mut policy = RecedingHorizonPolicy::new(scenario, Fallback::default());
    run_episode_with(&mut policy, seed)
}

/// Runs one episode of `scenario.episode_length` steps, reusing `policy`
/// (and its cache). Deterministic in (scenario, seed).
pub fn run_episode_with(policy: &mut RecedingHorizonPolicy<'_>, seed: u64) -> Result<Trajectory> {
    let scenario = policy.scenario();
    scenario.validate()?;
    let (kernel, true_type) = (&scenario.kernel, scenario.true_type);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = scenario.initial_state;
    let mut belief = scenario.prior;
    let mut steps = Vec::with_capacity(scenario.episode_length);
    for k in 1..=scenario.episode_length {
        let at = |e: Error| Error::AtStep { step: k, source: Box::new(e) };
        let decision = policy.decide(belief, x).map_err(at)?;
        let applied = decision.action(true_type);
        let next = sample_transition(kernel, x, applied, decision.reaction, &mut rng);
        let lik = LikelihoodPair {
            benign: kernel.prob(next, x, decision.action_benign, decision.reaction),
            malicious: kernel.prob(next, x, decision.action_malicious, decision.reaction),
        };
        let coeff = bayes_coefficient(belief, lik, true_type).map_err(at)?;
        let updated = bayes_update(belief, lik).map_err(at)?;
        steps.push(Step {
            k,
            state: x,
            action_benign: decision.action_benign,
            action_malicious: decision.action_malicious,
            applied_action: applied,
            reaction: decision.reaction,
            belief: belief.malicious(),
            bayes_coeff: coeff,
            agreement: u8::from(!decision.agrees()),
        });
        x = next;
        belief = updated;
    }
    Ok(Trajectory {
        alphabets: scenario.alphabets.clone(),
        true_type,
        steps,
        final_belief: belief.malicious(),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `index` in a batch: `splitmix64(base_seed ^ splitmix64(index))`.
pub fn episode_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryOptions {
    pub window: usize,
    pub tol: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { window: 20, tol: 0.01 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassificationTally {
    pub f_to_one: usize,
    pub pi_to_zero: usize,
    pub undecided: usize,
    pub failed: usize,
}

impl ClassificationTally {
    pub fn total(&self) -> usize {
        self.f_to_one + self.pi_to_zero + self.undecided + self.failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub seed: u64,
    pub terminal_belief: Option<f64>,
    pub limit_estimate: Option<f64>,
    pub oscillation: Option<f64>,
    pub classification: Option<Classification>,
    /// First sustained-agreement step (1-based).
    pub sustained_agreement: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub n_episodes: usize,
    pub true_type: SenderType,
    pub options: SummaryOptions,
    pub episodes: Vec<EpisodeSummary>,
    pub tally: ClassificationTally,
}

impl BatchSummary {
    /// Aggregates diagnostics over finished episodes, in episode order.
    pub fn from_episodes(
        true_type: SenderType,
        seeds: &[u64],
        episodes: &[Result<Trajectory>],
        options: SummaryOptions,
    ) -> Self {
        let mut tally = ClassificationTally::default();
        let summaries = episodes
            .iter()
            .zip(seeds)
            .enumerate()
            .map(|(i, (ep, &seed))| {
                let blank = EpisodeSummary {
                    episode: i,
                    seed,
                    terminal_belief: None,
                    limit_estimate: None,
                    oscillation: None,
                    classification: None,
                    sustained_agreement: None,
                    error: None,
                };
                let traj = match ep {
                    Ok(t) => t,
                    Err(e) => {
                        tally.failed += 1;
                        return EpisodeSummary { error: Some(e.to_string()), ..blank };
                    }
                };
                let window = options.window.min(traj.len().saturating_sub(1)).max(1);
                match convergence_report(traj, window, options.tol) {
                    Ok(report) => {
                        match report.classification {
                            Classification::FToOne => tally.f_to_one += 1,
                            Classification::PiToZero => tally.pi_to_zero += 1,
                            Classification::Undecided => tally.undecided += 1,
                        }
                        EpisodeSummary {
                            terminal_belief: Some(traj.final_belief),
                            limit_estimate: Some(report.limit_estimate),
                            oscillation: Some(report.oscillation),
                            classification: Some(report.classification),
                            sustained_agreement: agreement_series(traj).sustained_from,
                            ..blank
                        }
                    }
                    Err(e) => {
                        tally.failed += 1;
                        EpisodeSummary { error: Some(e.to_string()), ..blank }
                    }
                }
            })
            .collect();
        Self { n_episodes: episodes.len(), true_type, options, episodes: summaries, tally }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub summary: BatchSummary,
    pub trajectories: Vec<Result<Trajectory>>,
}

/// Runs `n_episodes` independent episodes in parallel. Episode i uses
/// [`episode_seed`]`(base_seed, i)`; results are independent of the thread
/// count.
pub fn run_batch(scenario: &Scenario, n_episodes: usize, base_seed: u64) -> Result<Batch> {
    run_batch_with(scenario, n_episodes, base_seed, Fallback::default(), SummaryOptions::default())
}

pub fn run_batch_with(
    scenario: &Scenario,
    n_episodes: usize,
    base_seed: u64,
    fallback: Fallback,
    options: SummaryOptions,
) -> Result<Batch> {
    if n_episodes == 0 {
        return Err(Error::InvalidScenario("a batch needs at least one episode".into()));
    }
    scenario.validate()?;
    let seeds: Vec<u64> = (0..n_episodes as u64).map(|i| episode_seed(base_seed, i)).collect();
    let trajectories: Vec<Result<Trajectory>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut policy = RecedingHorizonPolicy::new(scenario, fallback);
            run_episode_with(&mut policy, seed)
        })
        .collect();
    let summary = BatchSummary::from_episodes(scenario.true_type, &seeds, &trajectories, options);
    Ok(Batch { summary, trajectories })
}
