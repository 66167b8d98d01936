mod common;

use std::collections::BTreeMap;

use siggame::belief::{bayes_update, LikelihoodPair};
use siggame::equilibrium::Fallback;
use siggame::simulator::{episode_seed, run_batch_with, run_episode, SummaryOptions};
use siggame::{Error, SenderType};

use common::*;

#[test]
fn episodes_are_reproducible() {
    let s = table1_steps(80);
    let a = run_episode(&s, 42).unwrap();
    let b = run_episode(&s, 42).unwrap();
    assert_eq!(a, b);
    let c = run_episode(&s, 43).unwrap();
    assert_ne!(a.steps, c.steps);
}

#[test]
fn trajectory_bookkeeping() {
    let s = table1_steps(120);
    let t = run_episode(&s, 7).unwrap();
    assert_eq!(t.len(), 120);
    assert_eq!(t.steps[0].belief, 0.1);
    assert_eq!(t.steps[0].state, s.initial_state);
    for (i, step) in t.steps.iter().enumerate() {
        assert_eq!(step.k, i + 1);
        assert_eq!(step.applied_action, step.action_malicious);
        assert_eq!(step.agreement, u8::from(step.action_benign != step.action_malicious));
        // f maps the true type's belief to the next one
        let next = t.steps.get(i + 1).map_or(t.final_belief, |n| n.belief);
        assert!((step.bayes_coeff * step.belief - next).abs() < 1e-12);
        // next state is consistent with the recorded transition
        if let Some(n) = t.steps.get(i + 1) {
            let lik = LikelihoodPair {
                benign: s.kernel.prob(n.state, step.state, step.action_benign, step.reaction),
                malicious: s.kernel.prob(n.state, step.state, step.action_malicious, step.reaction),
            };
            let post = bayes_update(belief(step.belief), lik).unwrap();
            assert_eq!(post.malicious(), n.belief);
        }
    }
}

#[test]
fn pooling_freezes_the_belief() {
    let mut s = table1_steps(50);
    s.prior = belief(0.7);
    let t = run_episode(&s, 1).unwrap();
    assert!(t.steps.iter().all(|st| st.agreement == 0 && (st.bayes_coeff - 1.0).abs() < 1e-15));
    assert!((t.final_belief - 0.7).abs() < 1e-12);
}

#[test]
fn benign_sender_drives_belief_down() {
    let mut s = table1_steps(200);
    s.true_type = SenderType::Benign;
    let t = run_episode(&s, 3).unwrap();
    assert!(t.steps.iter().all(|st| st.applied_action == st.action_benign));
    assert!(t.final_belief < 0.1);
}

#[test]
fn agreement_is_absorbing_above_switch_threshold() {
    let threshold = 4.0 / 13.0;
    let batch = run_batch_with(&table1_steps(150), 60, 99, Fallback::SenderLeader, SummaryOptions::default()).unwrap();
    for traj in batch.trajectories.iter().map(|t| t.as_ref().unwrap()) {
        if let Some(k) = traj.steps.iter().position(|s| s.agreement == 0 && s.belief > threshold) {
            assert!(traj.steps[k..].iter().all(|s| s.agreement == 0));
        }
    }
}

#[test]
fn strict_policy_reports_the_failing_step() {
    let mut s = table1_steps(20);
    s.prior = belief(0.3);
    let mut policy = siggame::RecedingHorizonPolicy::new(&s, Fallback::Fail);
    match siggame::simulator::run_episode_with(&mut policy, 0) {
        Err(Error::AtStep { step: 1, source }) => assert!(matches!(*source, Error::NoPureEquilibrium { .. })),
        other => panic!("{other:?}"),
    }
}

/// Mean one-step change of the true-type belief, binned by belief decile,
/// is nonnegative up to sampling noise.
#[test]
fn empirical_submartingale() {
    let batch = run_batch_with(&table1_steps(100), 300, 5, Fallback::SenderLeader, SummaryOptions::default()).unwrap();
    let mut bins: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for traj in batch.trajectories.iter().map(|t| t.as_ref().unwrap()) {
        let b = traj.true_type_beliefs();
        for w in b.windows(2) {
            let e = bins.entry(((w[0] * 10.0) as usize).min(9)).or_default();
            let d = w[1] - w[0];
            e.0 += d;
            e.1 += d * d;
            e.2 += 1;
        }
    }
    for (bin, (sum, sq, n)) in bins {
        if n < 200 {
            continue;
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).max(0.0).sqrt();
        assert!(mean >= -3.0 * sd / (n as f64).sqrt(), "bin {bin}: mean {mean} over {n}");
    }
}

#[test]
fn batch_seeds_and_summary() {
    let batch = run_batch_with(&table1_steps(60), 8, 17, Fallback::SenderLeader, SummaryOptions::default()).unwrap();
    let sum = &batch.summary;
    assert_eq!(sum.n_episodes, 8);
    assert_eq!(sum.tally.total(), 8);
    assert_eq!(sum.tally.failed, 0);
    for (i, e) in sum.episodes.iter().enumerate() {
        assert_eq!(e.seed, episode_seed(17, i as u64));
        let traj = batch.trajectories[i].as_ref().unwrap();
        assert_eq!(*traj, run_episode(&table1_steps(60), e.seed).unwrap());
        assert_eq!(e.terminal_belief, Some(traj.final_belief));
    }
    assert!(run_batch_with(&table1_steps(60), 0, 17, Fallback::SenderLeader, SummaryOptions::default()).is_err());
}

#[test]
fn batch_is_independent_of_thread_count() {
    let s = table4();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| siggame::run_batch(&s, 12, 3).unwrap().summary)
    };
    assert_eq!(run(1), run(3));
}
