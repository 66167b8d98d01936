//! Finite-alphabet Markov decision process underlying the game.
//!
//! States, actions and reactions are ordered label sets; every table is
//! indexed by position in those sets, and all downstream iteration and
//! tie-breaking follows that order.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::error::{Error, Result};

/// Absolute tolerance on row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Two kernel entries closer than this are treated as equal when checking
/// that actions are distinguishable.
pub const ROW_EQ_TOL: f64 = 1e-12;

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_newtype!(
    /// Position of a state label in [`Alphabets::states`].
    StateId
);
index_newtype!(
    /// Position of an action label in [`Alphabets::actions`].
    ActionId
);
index_newtype!(
    /// Position of a reaction label in [`Alphabets::reactions`].
    ReactionId
);

/// Hidden type of the sender. The type space is binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenderType {
    Benign,
    Malicious,
}

impl SenderType {
    pub const ALL: [SenderType; 2] = [SenderType::Benign, SenderType::Malicious];

    pub fn index(self) -> usize {
        match self {
            SenderType::Benign => 0,
            SenderType::Malicious => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SenderType::Benign => "benign",
            SenderType::Malicious => "malicious",
        }
    }

    pub fn other(self) -> SenderType {
        match self {
            SenderType::Benign => SenderType::Malicious,
            SenderType::Malicious => SenderType::Benign,
        }
    }
}

impl fmt::Display for SenderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered label sets for states, actions and reactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    states: Vec<String>,
    actions: Vec<String>,
    reactions: Vec<String>,
}

impl Alphabets {
    pub fn new(states: Vec<String>, actions: Vec<String>, reactions: Vec<String>) -> Result<Self> {
        for (name, set) in [("states", &states), ("actions", &actions), ("reactions", &reactions)] {
            if set.is_empty() {
                return Err(Error::InvalidAlphabet(format!("{name} is empty")));
            }
            let mut seen = HashSet::new();
            for label in set {
                if !seen.insert(label.as_str()) {
                    return Err(Error::InvalidAlphabet(format!("duplicate label {label:?} in {name}")));
                }
            }
        }
        Ok(Self { states, actions, reactions })
    }

    /// Convenience constructor from string slices.
    pub fn from_labels(states: &[&str], actions: &[&str], reactions: &[&str]) -> Result<Self> {
        let own = |s: &[&str]| s.iter().map(|l| l.to_string()).collect();
        Self::new(own(states), own(actions), own(reactions))
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn reactions(&self) -> &[String] {
        &self.reactions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn state(&self, label: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == label).map(StateId)
    }

    pub fn action(&self, label: &str) -> Option<ActionId> {
        self.actions.iter().position(|s| s == label).map(ActionId)
    }

    pub fn reaction(&self, label: &str) -> Option<ReactionId> {
        self.reactions.iter().position(|s| s == label).map(ReactionId)
    }

    pub fn state_label(&self, x: StateId) -> &str {
        &self.states[x.0]
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.actions[a.0]
    }

    pub fn reaction_label(&self, r: ReactionId) -> &str {
        &self.reactions[r.0]
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len()).map(ActionId)
    }

    pub fn reaction_ids(&self) -> impl Iterator<Item = ReactionId> {
        (0..self.reactions.len()).map(ReactionId)
    }

    fn triple_labels(&self, x: StateId, a: ActionId, r: ReactionId) -> (String, String, String) {
        (
            self.state_label(x).to_string(),
            self.action_label(a).to_string(),
            self.reaction_label(r).to_string(),
        )
    }
}

/// Raw, possibly incomplete transition table as read from a configuration.
///
/// Use [`validate_kernel`] to inspect it and [`TransitionKernel::new`] to
/// obtain a kernel the rest of the crate accepts.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    alphabets: Alphabets,
    rows: Vec<Option<Vec<f64>>>,
}

impl KernelTable {
    pub fn new(alphabets: Alphabets) -> Self {
        let n = alphabets.num_states() * alphabets.num_actions() * alphabets.num_reactions();
        Self { alphabets, rows: vec![None; n] }
    }

    fn slot(&self, x: StateId, a: ActionId, r: ReactionId) -> usize {
        let al = &self.alphabets;
        (x.0 * al.num_actions() + a.0) * al.num_reactions() + r.0
    }

    pub fn set_row(&mut self, x: StateId, a: ActionId, r: ReactionId, row: Vec<f64>) {
        let slot = self.slot(x, a, r);
        self.rows[slot] = Some(row);
    }

    /// Sets the row for every reaction at once.
    pub fn set_row_all_reactions(&mut self, x: StateId, a: ActionId, row: Vec<f64>) {
        for r in 0..self.alphabets.num_reactions() {
            self.set_row(x, a, ReactionId(r), row.clone());
        }
    }

    pub fn row(&self, x: StateId, a: ActionId, r: ReactionId) -> Option<&[f64]> {
        self.rows[self.slot(x, a, r)].as_deref()
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }
}

/// One probabilistic defect found by [`validate_kernel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowViolation {
    pub state: String,
    pub action: String,
    pub reaction: String,
    pub defect: String,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}): {}", self.state, self.action, self.reaction, self.defect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub violations: Vec<RowViolation>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every row of the table is a probability vector.
///
/// Structural problems (a missing row or a row of the wrong length) are
/// returned as errors; probabilistic defects are collected in the report.
pub fn validate_kernel(table: &KernelTable) -> Result<KernelReport> {
    let al = table.alphabets();
    let n = al.num_states();
    let mut violations = Vec::new();
    for x in al.state_ids() {
        for a in al.action_ids() {
            for r in al.reaction_ids() {
                let (state, action, reaction) = al.triple_labels(x, a, r);
                let Some(row) = table.row(x, a, r) else {
                    return Err(Error::MissingKernelRow { state, action, reaction });
                };
                if row.len() != n {
                    return Err(Error::KernelRowLength {
                        state,
                        action,
                        reaction,
                        found: row.len(),
                        expected: n,
                    });
                }
                let mut push = |defect: String| {
                    violations.push(RowViolation {
                        state: state.clone(),
                        action: action.clone(),
                        reaction: reaction.clone(),
                        defect,
                    })
                };
                if let Some(bad) = row.iter().find(|p| !p.is_finite()) {
                    push(format!("non-finite entry {bad}"));
                    continue;
                }
                if let Some(neg) = row.iter().find(|&&p| p < 0.0) {
                    push(format!("negative entry {neg}"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    push(format!("row sum {sum} ≠ 1"));
                }
            }
        }
    }
    Ok(KernelReport { violations })
}

/// Validated transition kernel p(x'|x,a,r), stored densely over the full
/// (state, action, reaction) product.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    alphabets: Alphabets,
    probs: Vec<f64>,
}

impl TransitionKernel {
    pub fn new(table: KernelTable) -> Result<Self> {
        let report = validate_kernel(&table)?;
        if !report.passed() {
            let list: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidKernel(list.join("; ")));
        }
        let probs = table.rows.into_iter().flatten().flatten().collect();
        Ok(Self { alphabets: table.alphabets, probs })
    }

    /// Builds a kernel whose rows do not depend on the reaction.
    /// `rows[a][x]` is the distribution of the next state.
    pub fn reaction_independent(alphabets: Alphabets, rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut table = KernelTable::new(alphabets);
        for (a, per_state) in rows.iter().enumerate() {
            for (x, row) in per_state.iter().enumerate() {
                if a < table.alphabets.num_actions() && x < table.alphabets.num_states() {
                    table.set_row_all_reactions(StateId(x), ActionId(a), row.clone());
                }
            }
        }
        Self::new(table)
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn row(&self, x: StateId, a: ActionId, r: ReactionId) -> &[f64] {
        let al = &self.alphabets;
        let n = al.num_states();
        let start = ((x.0 * al.num_actions() + a.0) * al.num_reactions() + r.0) * n;
        &self.probs[start..start + n]
    }

    pub fn prob(&self, next: StateId, x: StateId, a: ActionId, r: ReactionId) -> f64 {
        self.row(x, a, r)[next.0]
    }

    /// True when no row depends on the reaction.
    pub fn is_reaction_independent(&self) -> bool {
        let al = &self.alphabets;
        al.state_ids().all(|x| {
            al.action_ids().all(|a| {
                let first = self.row(x, a, ReactionId(0));
                al.reaction_ids().all(|r| self.row(x, a, r) == first)
            })
        })
    }

    pub fn to_table(&self) -> KernelTable {
        let mut table = KernelTable::new(self.alphabets.clone());
        for x in self.alphabets.state_ids() {
            for a in self.alphabets.action_ids() {
                for r in self.alphabets.reaction_ids() {
                    table.set_row(x, a, r, self.row(x, a, r).to_vec());
                }
            }
        }
        table
    }
}

/// A (state, reaction, action, action') combination at which two distinct
/// actions induce identical next-state distributions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndistinguishableActions {
    pub state: StateId,
    pub reaction: ReactionId,
    pub first: ActionId,
    pub second: ActionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistinguishabilityReport {
    pub witnesses: Vec<IndistinguishableActions>,
}

impl DistinguishabilityReport {
    pub fn distinguishable(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Checks that distinct actions always produce distinct next-state
/// distributions, for every state and reaction.
///
/// Witnesses are listed once per unordered action pair, with `first < second`.
pub fn check_distinguishability(kernel: &TransitionKernel) -> DistinguishabilityReport {
    let al = kernel.alphabets();
    let mut witnesses = Vec::new();
    for x in al.state_ids() {
        for r in al.reaction_ids() {
            for a in al.action_ids() {
                for b in al.action_ids().filter(|b| b.0 > a.0) {
                    let same = kernel
                        .row(x, a, r)
                        .iter()
                        .zip(kernel.row(x, b, r))
                        .all(|(p, q)| (p - q).abs() <= ROW_EQ_TOL);
                    if same {
                        witnesses.push(IndistinguishableActions { state: x, reaction: r, first: a, second: b });
                    }
                }
            }
        }
    }
    DistinguishabilityReport { witnesses }
}

/// Draws the next state from the row (x, a, r) by inverting the cumulative
/// distribution with one uniform draw from `rng`.
pub fn sample_transition<R: Rng + ?Sized>(
    kernel: &TransitionKernel,
    x: StateId,
    a: ActionId,
    r: ReactionId,
    rng: &mut R,
) -> StateId {
    let row = kernel.row(x, a, r);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return StateId(i);
            }
        }
    }
    // Rounding left the cumulative sum just under 1.
    StateId(last_positive)
}

/// Instantaneous utilities. The sender table is indexed by the true type,
/// the receiver table by the hypothesised type.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTables {
    dims: (usize, usize, usize),
    sender: Vec<f64>,
    receiver: Vec<f64>,
}

impl UtilityTables {
    /// Tabulates both utilities from closures over the full
    /// (type, state, action, reaction) product.
    pub fn from_fn<S, R>(alphabets: &Alphabets, mut sender: S, mut receiver: R) -> Result<Self>
    where
        S: FnMut(SenderType, StateId, ActionId, ReactionId) -> f64,
        R: FnMut(SenderType, StateId, ActionId, ReactionId) -> f64,
    {
        let dims = (alphabets.num_states(), alphabets.num_actions(), alphabets.num_reactions());
        let mut s = Vec::with_capacity(2 * dims.0 * dims.1 * dims.2);
        let mut rv = Vec::with_capacity(s.capacity());
        for t in SenderType::ALL {
            for x in alphabets.state_ids() {
                for a in alphabets.action_ids() {
                    for r in alphabets.reaction_ids() {
                        let us = sender(t, x, a, r);
                        let ur = receiver(t, x, a, r);
                        if !us.is_finite() || !ur.is_finite() {
                            let (xs, as_, rs) = alphabets.triple_labels(x, a, r);
                            return Err(Error::InvalidUtility(format!("({t}, {xs}, {as_}, {rs})")));
                        }
                        s.push(us);
                        rv.push(ur);
                    }
                }
            }
        }
        Ok(Self { dims, sender: s, receiver: rv })
    }

    fn slot(&self, t: SenderType, x: StateId, a: ActionId, r: ReactionId) -> usize {
        let (_, na, nr) = self.dims;
        ((t.index() * self.dims.0 + x.0) * na + a.0) * nr + r.0
    }

    pub fn sender(&self, t: SenderType, x: StateId, a: ActionId, r: ReactionId) -> f64 {
        self.sender[self.slot(t, x, a, r)]
    }

    pub fn receiver(&self, t: SenderType, x: StateId, a: ActionId, r: ReactionId) -> f64 {
        self.receiver[self.slot(t, x, a, r)]
    }

    /// Adds `offset` to every sender utility of type `t`.
    pub fn shift_sender(&mut self, t: SenderType, offset: f64) {
        let block = self.dims.0 * self.dims.1 * self.dims.2;
        for v in &mut self.sender[t.index() * block..(t.index() + 1) * block] {
            *v += offset;
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }
}

/// Complete game description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub alphabets: Alphabets,
    pub kernel: TransitionKernel,
    pub utilities: UtilityTables,
    pub initial_state: StateId,
    pub prior: BeliefState,
    /// Receding-horizon window length T.
    pub horizon: usize,
    pub true_type: SenderType,
    pub episode_length: usize,
    pub base_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let al = &self.alphabets;
        if self.kernel.alphabets() != al {
            return Err(Error::InvalidScenario("kernel alphabets differ from scenario alphabets".into()));
        }
        if self.utilities.dims() != (al.num_states(), al.num_actions(), al.num_reactions()) {
            return Err(Error::InvalidScenario("utility tables do not match the alphabets".into()));
        }
        if self.initial_state.0 >= al.num_states() {
            return Err(Error::InvalidScenario(format!("initial state index {} out of range", self.initial_state.0)));
        }
        if self.horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidScenario("episode length must be at least 1".into()));
        }
        Ok(())
    }
}
