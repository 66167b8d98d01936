//! Checks of the asymptotic belief and action properties: exact
//! submartingale margins, trailing-window convergence statistics, action
//! agreement, the KL decay heuristic and the random-walk closed form.

use serde::{Deserialize, Serialize};

use crate::belief::{bayes_update, type_conditional_likelihood, BeliefState};
use crate::equilibrium::StrategyTree;
use crate::error::{Error, Result};
use crate::model::{Scenario, StateId};
use crate::simulator::{BatchSummary, Trajectory};

/// Expected one-step change of the belief on the true type,
/// Σ_{x'} p^θ(x'|history) π'(θ; history, x') − π(θ; history),
/// by enumeration of x'. Successors with zero mixed likelihood are skipped.
pub fn submartingale_margin(
    scenario: &Scenario,
    profile: &StrategyTree,
    history: &[StateId],
    belief: BeliefState,
) -> Result<f64> {
    let t = scenario.true_type;
    let mut expected = 0.0;
    for next in scenario.alphabets.state_ids() {
        let lik = type_conditional_likelihood(scenario, profile, history, next)?;
        match bayes_update(belief, lik) {
            Ok(post) => expected += lik.of(t) * post.of(t),
            Err(Error::InconsistentObservation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(expected - belief.of(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    /// The Bayes coefficient of the true type settles at one.
    FToOne,
    /// The belief on the true type vanishes.
    PiToZero,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Mean belief on the true type over the trailing window.
    pub limit_estimate: f64,
    /// Total variation of that belief over the trailing window.
    pub oscillation: f64,
    /// Mean |f − 1| over the trailing window.
    pub coefficient_deviation: f64,
    pub f_to_one: bool,
    pub pi_to_zero: bool,
    pub classification: Classification,
    pub window: usize,
}

/// Trailing-window statistics of a belief series `beliefs` (π_0..π_N on the
/// true type) and its Bayes coefficients (f_1..f_N).
pub fn convergence_from_series(beliefs: &[f64], coefficients: &[f64], window: usize, tol: f64) -> Result<ConvergenceReport> {
    let steps = coefficients.len();
    if window == 0 || steps <= window || beliefs.len() != steps + 1 {
        return Err(Error::InvalidScenario(format!(
            "window {window} needs more steps than {steps} and one belief per step plus the final one"
        )));
    }
    let tail = &beliefs[beliefs.len() - window..];
    let limit_estimate = tail.iter().sum::<f64>() / window as f64;
    let oscillation = beliefs[beliefs.len() - window - 1..]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum();
    let coefficient_deviation =
        coefficients[steps - window..].iter().map(|f| (f - 1.0).abs()).sum::<f64>() / window as f64;
    let f_to_one = coefficient_deviation < tol;
    let pi_to_zero = limit_estimate < tol;
    let classification = if f_to_one {
        Classification::FToOne
    } else if pi_to_zero {
        Classification::PiToZero
    } else {
        Classification::Undecided
    };
    Ok(ConvergenceReport {
        limit_estimate,
        oscillation,
        coefficient_deviation,
        f_to_one,
        pi_to_zero,
        classification,
        window,
    })
}

pub fn convergence_report(trajectory: &Trajectory, window: usize, tol: f64) -> Result<ConvergenceReport> {
    convergence_from_series(&trajectory.true_type_beliefs(), &trajectory.coefficients(), window, tol)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgreementSummary {
    pub series: Vec<u8>,
    /// Smallest 1-based K with d_j = 0 for every recorded j ≥ K.
    pub sustained_from: Option<usize>,
}

pub fn sustained_agreement_step(series: &[u8]) -> Option<usize> {
    let trailing = series.iter().rev().take_while(|&&d| d == 0).count();
    (trailing > 0).then(|| series.len() - trailing + 1)
}

pub fn agreement_series(trajectory: &Trajectory) -> AgreementSummary {
    let series: Vec<u8> = trajectory.steps.iter().map(|s| s.agreement).collect();
    let sustained_from = sustained_agreement_step(&series);
    AgreementSummary { series, sustained_from }
}

/// D_KL(p_m ‖ p_b) in nats, the heuristic per-step decay rate of the log
/// belief ratio. Returns +∞ when p_m puts mass where p_b has none.
pub fn kl_decay_estimate(p_b: &[f64], p_m: &[f64]) -> Result<f64> {
    if p_b.len() != p_m.len() {
        return Err(Error::InvalidScenario(format!(
            "distributions over {} and {} states",
            p_b.len(),
            p_m.len()
        )));
    }
    let mut total = 0.0;
    for (&b, &m) in p_b.iter().zip(p_m) {
        if m == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += m * (m / b).ln();
    }
    // Rounding can leave an exact zero slightly negative.
    Ok(total.max(0.0))
}

/// Belief on the true type after 2k steps of the binary random walk that
/// returns to balance: π_0 / (α(1 − π_0) + π_0) with α = (4p(1 − p))^k.
pub fn random_walk_belief(p: f64, k: u32, prior: BeliefState) -> Result<BeliefState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if k == 0 {
        return Err(Error::InvalidScenario("k must be at least 1".into()));
    }
    let pi0 = prior.malicious();
    if pi0 <= 0.0 || pi0 >= 1.0 {
        return Err(Error::InvalidProbability(pi0));
    }
    let alpha = (4.0 * p * (1.0 - p)).powi(k as i32);
    if alpha == 1.0 {
        return Ok(prior);
    }
    BeliefState::new(pi0 / (alpha * (1.0 - pi0) + pi0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectionAverseVerdict {
    pub holds: bool,
    /// Episodes whose limit estimate exceeds 1 − tol, or that failed.
    pub violations: Vec<usize>,
}

/// Whether every episode's limiting belief stays at most 1 − tol.
pub fn detection_averse_check(batch: &BatchSummary, tol: f64) -> DetectionAverseVerdict {
    let violations: Vec<usize> = batch
        .episodes
        .iter()
        .filter(|e| e.limit_estimate.is_none_or(|l| l > 1.0 - tol))
        .map(|e| e.episode)
        .collect();
    DetectionAverseVerdict { holds: violations.is_empty(), violations }
}
