use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ActionId, Alphabets, ReactionId, SenderType, StateId};

/// Largest number of joint pure profiles the solver will scan.
pub const MAX_JOINT_PROFILES: u128 = 10_000_000;

/// Breadth-first numbering of the observable-history nodes of a depth-T
/// window. The root is the current state; a node at depth d is identified
/// by the d states realised after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLayout {
    num_states: usize,
    depth: usize,
}

impl NodeLayout {
    pub fn new(num_states: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::EmptyHorizon);
        }
        Ok(Self { num_states, depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Σ_{d<T} |X|^d.
    pub fn node_count(&self) -> usize {
        (0..self.depth).map(|d| self.num_states.pow(d as u32)).sum()
    }

    /// Index of the first node at depth `d`.
    pub fn offset(&self, d: usize) -> usize {
        (0..d).map(|i| self.num_states.pow(i as u32)).sum()
    }

    /// Node reached by the states realised after the root, or `None` when the
    /// history leaves the window.
    pub fn node_of(&self, realised: &[StateId]) -> Option<usize> {
        if realised.len() >= self.depth {
            return None;
        }
        let code = realised.iter().fold(0, |acc, x| acc * self.num_states + x.0);
        Some(self.offset(realised.len()) + code)
    }
}

/// Joint pure profile restricted to a T-step window: an action per node for
/// each sender type and a reaction per node for the receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrategyTree {
    depth: usize,
    num_states: usize,
    benign: Vec<ActionId>,
    malicious: Vec<ActionId>,
    receiver: Vec<ReactionId>,
}

impl StrategyTree {
    pub fn new(
        layout: NodeLayout,
        benign: Vec<ActionId>,
        malicious: Vec<ActionId>,
        receiver: Vec<ReactionId>,
    ) -> Result<Self> {
        let n = layout.node_count();
        if benign.len() != n || malicious.len() != n || receiver.len() != n {
            return Err(Error::InvalidScenario(format!(
                "strategy tree needs {n} nodes per branch, got {}/{}/{}",
                benign.len(),
                malicious.len(),
                receiver.len()
            )));
        }
        Ok(Self {
            depth: layout.depth,
            num_states: layout.num_states,
            benign,
            malicious,
            receiver,
        })
    }

    /// Profile that prescribes the same root choices at every node.
    pub fn constant(layout: NodeLayout, benign: ActionId, malicious: ActionId, reaction: ReactionId) -> Self {
        let n = layout.node_count();
        Self {
            depth: layout.depth,
            num_states: layout.num_states,
            benign: vec![benign; n],
            malicious: vec![malicious; n],
            receiver: vec![reaction; n],
        }
    }

    /// Profile whose prescriptions depend only on the most recent state.
    /// `root` is the state at the root of the window.
    pub fn state_feedback<F>(layout: NodeLayout, root: StateId, mut rule: F) -> Self
    where
        F: FnMut(StateId) -> (ActionId, ActionId, ReactionId),
    {
        let n = layout.node_count();
        let mut benign = Vec::with_capacity(n);
        let mut malicious = Vec::with_capacity(n);
        let mut receiver = Vec::with_capacity(n);
        for node in 0..n {
            let last = if node == 0 { root } else { StateId((node - 1) % layout.num_states) };
            let (ab, am, r) = rule(last);
            benign.push(ab);
            malicious.push(am);
            receiver.push(r);
        }
        Self { depth: layout.depth, num_states: layout.num_states, benign, malicious, receiver }
    }

    pub fn layout(&self) -> NodeLayout {
        NodeLayout { num_states: self.num_states, depth: self.depth }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn action(&self, t: SenderType, node: usize) -> ActionId {
        match t {
            SenderType::Benign => self.benign[node],
            SenderType::Malicious => self.malicious[node],
        }
    }

    pub fn reaction(&self, node: usize) -> ReactionId {
        self.receiver[node]
    }

    pub fn sender_branch(&self, t: SenderType) -> &[ActionId] {
        match t {
            SenderType::Benign => &self.benign,
            SenderType::Malicious => &self.malicious,
        }
    }

    pub fn receiver_branch(&self) -> &[ReactionId] {
        &self.receiver
    }

    /// Root prescriptions (benign action, malicious action, reaction).
    pub fn root(&self) -> (ActionId, ActionId, ReactionId) {
        (self.benign[0], self.malicious[0], self.receiver[0])
    }
}

/// Position of a joint profile in enumeration order. Profiles are ordered
/// lexicographically by (benign tree, malicious tree, receiver tree), and each
/// tree index reads its nodes as mixed-radix digits with the root most
/// significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProfileIndex {
    pub benign: u64,
    pub malicious: u64,
    pub receiver: u64,
}

/// Number of trees with `radix` choices at each of `nodes` nodes, saturating.
pub(crate) fn tree_count(radix: usize, nodes: usize) -> u128 {
    (radix as u128).checked_pow(nodes as u32).unwrap_or(u128::MAX)
}

pub(crate) fn joint_count(alphabets: &Alphabets, layout: NodeLayout) -> u128 {
    let nodes = layout.node_count();
    let s = tree_count(alphabets.num_actions(), nodes);
    let r = tree_count(alphabets.num_reactions(), nodes);
    s.saturating_mul(s).saturating_mul(r)
}

pub(crate) fn check_guard(alphabets: &Alphabets, layout: NodeLayout) -> Result<()> {
    let count = joint_count(alphabets, layout);
    if count > MAX_JOINT_PROFILES {
        return Err(Error::TooManyProfiles { count, limit: MAX_JOINT_PROFILES });
    }
    Ok(())
}

/// Writes the digits of `index` into `out`, root first.
pub(crate) fn decode_into(mut index: u64, radix: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % radix as u64) as usize;
        index /= radix as u64;
    }
}

pub(crate) fn decode(index: u64, radix: usize, nodes: usize) -> Vec<usize> {
    let mut out = vec![0; nodes];
    decode_into(index, radix, &mut out);
    out
}

/// Every pure sender tree (shared by both types) and every receiver tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategySets {
    pub layout: NodeLayout,
    pub sender: Vec<Vec<ActionId>>,
    pub receiver: Vec<Vec<ReactionId>>,
}

impl StrategySets {
    pub fn joint_count(&self) -> u128 {
        let s = self.sender.len() as u128;
        s * s * self.receiver.len() as u128
    }
}

/// Enumerates all pure strategy trees of depth `horizon`, in enumeration
/// order. Refuses when the joint profile count exceeds
/// [`MAX_JOINT_PROFILES`].
pub fn enumerate_strategy_trees(alphabets: &Alphabets, horizon: usize) -> Result<StrategySets> {
    let layout = NodeLayout::new(alphabets.num_states(), horizon)?;
    check_guard(alphabets, layout)?;
    let nodes = layout.node_count();
    let sender_count = tree_count(alphabets.num_actions(), nodes) as u64;
    let receiver_count = tree_count(alphabets.num_reactions(), nodes) as u64;
    let sender = (0..sender_count)
        .map(|i| decode(i, alphabets.num_actions(), nodes).into_iter().map(ActionId).collect())
        .collect();
    let receiver = (0..receiver_count)
        .map(|i| decode(i, alphabets.num_reactions(), nodes).into_iter().map(ReactionId).collect())
        .collect();
    Ok(StrategySets { layout, sender, receiver })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn binary() -> Alphabets {
        Alphabets::from_labels(&["x_n", "x_a"], &["a_b", "a_m"], &["r_b", "r_m"]).unwrap()
    }

    #[test]
    fn counts_for_binary_alphabets() {
        let one = enumerate_strategy_trees(&binary(), 1).unwrap();
        assert_eq!((one.sender.len(), one.receiver.len()), (2, 2));
        let two = enumerate_strategy_trees(&binary(), 2).unwrap();
        assert_eq!((two.sender.len(), two.receiver.len()), (8, 8));
        assert_eq!(two.layout.node_count(), 3);
        assert_eq!(two.joint_count(), 512);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        assert_eq!(enumerate_strategy_trees(&binary(), 0), Err(Error::EmptyHorizon));
    }

    #[test]
    fn enumeration_is_duplicate_free_and_complete() {
        let al = Alphabets::from_labels(&["x", "y", "z"], &["a", "b"], &["r"]).unwrap();
        let sets = enumerate_strategy_trees(&al, 2).unwrap();
        assert_eq!(sets.layout.node_count(), 4);
        assert_eq!(sets.sender.len(), 16);
        let unique: HashSet<_> = sets.sender.iter().collect();
        assert_eq!(unique.len(), 16);
        assert!(sets.sender.iter().all(|t| t.len() == 4));
        // root is the most significant digit
        assert_eq!(sets.sender[8][0], ActionId(1));
        assert_eq!(sets.sender[7][0], ActionId(0));
    }

    #[test]
    fn guard_reports_the_count() {
        let al = Alphabets::from_labels(&["x", "y", "z"], &["a", "b", "c"], &["r", "s"]).unwrap();
        match enumerate_strategy_trees(&al, 3) {
            Err(Error::TooManyProfiles { count, .. }) => {
                // 13 nodes: 3^13 * 3^13 * 2^13
                assert_eq!(count, 3u128.pow(26) * 2u128.pow(13));
            }
            other => panic!("expected guard error, got {other:?}"),
        }
    }

    #[test]
    fn node_numbering() {
        let layout = NodeLayout::new(2, 3).unwrap();
        assert_eq!(layout.node_count(), 7);
        assert_eq!(layout.node_of(&[]), Some(0));
        assert_eq!(layout.node_of(&[StateId(1)]), Some(2));
        assert_eq!(layout.node_of(&[StateId(1), StateId(0)]), Some(5));
        assert_eq!(layout.node_of(&[StateId(0), StateId(0), StateId(0)]), None);
    }

    #[test]
    fn state_feedback_tracks_last_state() {
        let layout = NodeLayout::new(2, 3).unwrap();
        let tree = StrategyTree::state_feedback(layout, StateId(1), |x| (ActionId(x.0), ActionId(0), ReactionId(0)));
        assert_eq!(tree.action(SenderType::Benign, 0), ActionId(1));
        for (hist, last) in [(vec![0], 0), (vec![1], 1), (vec![0, 1], 1), (vec![1, 0], 0)] {
            let hist: Vec<StateId> = hist.into_iter().map(StateId).collect();
            let node = layout.node_of(&hist).unwrap();
            assert_eq!(tree.action(SenderType::Benign, node), ActionId(last));
        }
    }
}
