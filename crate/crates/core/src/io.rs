//! JSON scenario files and CSV trajectories.
//!
//! Utility tables are nested maps `state → action → reaction → value`; any
//! key may be `"*"` to cover every label not listed explicitly. Kernel rows
//! are arrays over the state labels, in alphabet order, nested as
//! `action → reaction → state` or, with `"reaction_independent": true`,
//! `action → state`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{
    check_distinguishability, ActionId, Alphabets, KernelTable, ReactionId, Scenario, SenderType,
    StateId, TransitionKernel, UtilityTables,
};
use crate::simulator::{Step, Trajectory};

pub const WILDCARD: &str = "*";

/// Column order of exported trajectories.
pub const TRAJECTORY_COLUMNS: [&str; 9] = [
    "k",
    "state",
    "action_b",
    "action_m",
    "applied_action",
    "reaction",
    "belief_m",
    "bayes_coeff",
    "agreement",
];

type UtilityTable = BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetsFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub reactions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    #[serde(default)]
    pub reaction_independent: bool,
    pub rows: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypedTables {
    pub benign: UtilityTable,
    pub malicious: UtilityTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitiesFile {
    pub sender: TypedTables,
    pub receiver: TypedTables,
}

fn default_horizon() -> usize {
    2
}

fn default_steps() -> usize {
    300
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub alphabets: AlphabetsFile,
    pub kernel: KernelFile,
    pub utilities: UtilitiesFile,
    pub prior: f64,
    pub initial_state: String,
    pub true_type: SenderType,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn lookup<'a, V>(map: &'a BTreeMap<String, V>, key: &str) -> Option<&'a V> {
    map.get(key).or_else(|| map.get(WILDCARD))
}

fn check_keys<V>(map: &BTreeMap<String, V>, labels: &[String], context: &str) -> Result<()> {
    for key in map.keys() {
        if key != WILDCARD && !labels.contains(key) {
            return Err(Error::Parse(format!("unknown label {key:?} in {context}")));
        }
    }
    Ok(())
}

fn utility_entry(table: &UtilityTable, al: &Alphabets, x: StateId, a: ActionId, r: ReactionId, context: &str) -> Result<f64> {
    let (xs, as_, rs) = (al.state_label(x), al.action_label(a), al.reaction_label(r));
    lookup(table, xs)
        .and_then(|m| lookup(m, as_))
        .and_then(|m| lookup(m, rs))
        .copied()
        .ok_or_else(|| Error::InvalidUtility(format!("{context}: no value for ({xs}, {as_}, {rs})")))
}

fn check_table(table: &UtilityTable, al: &Alphabets, context: &str) -> Result<()> {
    check_keys(table, al.states(), context)?;
    for by_action in table.values() {
        check_keys(by_action, al.actions(), context)?;
        for by_reaction in by_action.values() {
            check_keys(by_reaction, al.reactions(), context)?;
        }
    }
    Ok(())
}

/// Values in (type, state, action, reaction) order.
fn tabulate(tables: &TypedTables, al: &Alphabets, context: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for t in SenderType::ALL {
        let table = match t {
            SenderType::Benign => &tables.benign,
            SenderType::Malicious => &tables.malicious,
        };
        let ctx = format!("{context}.{t}");
        check_table(table, al, &ctx)?;
        for x in al.state_ids() {
            for a in al.action_ids() {
                for r in al.reaction_ids() {
                    out.push(utility_entry(table, al, x, a, r, &ctx)?);
                }
            }
        }
    }
    Ok(out)
}

fn parse_rows<T: serde::de::DeserializeOwned>(value: &serde_json::Value) -> Result<T> {
    serde_json::from_value(value.clone()).map_err(|e| Error::Parse(format!("kernel.rows: {e}")))
}

fn kernel_table(file: &KernelFile, al: &Alphabets) -> Result<KernelTable> {
    let mut table = KernelTable::new(al.clone());
    if file.reaction_independent {
        let rows: BTreeMap<String, BTreeMap<String, Vec<f64>>> = parse_rows(&file.rows)?;
        check_keys(&rows, al.actions(), "kernel.rows")?;
        for (a_label, by_state) in &rows {
            check_keys(by_state, al.states(), "kernel.rows")?;
            let a = al.action(a_label).expect("checked");
            for (x_label, row) in by_state {
                table.set_row_all_reactions(al.state(x_label).expect("checked"), a, row.clone());
            }
        }
    } else {
        let rows: BTreeMap<String, BTreeMap<String, BTreeMap<String, Vec<f64>>>> = parse_rows(&file.rows)?;
        check_keys(&rows, al.actions(), "kernel.rows")?;
        for (a_label, by_reaction) in &rows {
            check_keys(by_reaction, al.reactions(), "kernel.rows")?;
            let a = al.action(a_label).expect("checked");
            for (r_label, by_state) in by_reaction {
                check_keys(by_state, al.states(), "kernel.rows")?;
                let r = al.reaction(r_label).expect("checked");
                for (x_label, row) in by_state {
                    table.set_row(al.state(x_label).expect("checked"), a, r, row.clone());
                }
            }
        }
    }
    Ok(table)
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents serialise")
    }

    /// The raw transition table, before any probabilistic checks.
    pub fn kernel_table(&self) -> Result<KernelTable> {
        let a = &self.alphabets;
        let alphabets = Alphabets::new(a.states.clone(), a.actions.clone(), a.reactions.clone())?;
        kernel_table(&self.kernel, &alphabets)
    }

    /// Builds and validates the scenario this document describes.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let a = &self.alphabets;
        let alphabets = Alphabets::new(a.states.clone(), a.actions.clone(), a.reactions.clone())?;
        let kernel = TransitionKernel::new(kernel_table(&self.kernel, &alphabets)?)?;

        let u = &self.utilities;
        let sender = tabulate(&u.sender, &alphabets, "utilities.sender")?;
        let receiver = tabulate(&u.receiver, &alphabets, "utilities.receiver")?;
        let (nx, na, nr) = (alphabets.num_states(), alphabets.num_actions(), alphabets.num_reactions());
        let slot = |t: SenderType, x: StateId, a: ActionId, r: ReactionId| ((t.index() * nx + x.0) * na + a.0) * nr + r.0;
        let utilities =
            UtilityTables::from_fn(&alphabets, |t, x, a, r| sender[slot(t, x, a, r)], |t, x, a, r| receiver[slot(t, x, a, r)])?;

        let initial_state = alphabets
            .state(&self.initial_state)
            .ok_or_else(|| Error::Parse(format!("initial_state {:?} is not a state label", self.initial_state)))?;
        let prior = BeliefState::new(self.prior)?;
        let scenario = Scenario {
            alphabets,
            kernel,
            utilities,
            initial_state,
            prior,
            horizon: self.horizon,
            true_type: self.true_type,
            episode_length: self.steps,
            base_seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Fully expanded document for `scenario` (no wildcards).
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let al = &scenario.alphabets;
        let kernel = &scenario.kernel;
        let rows = if kernel.is_reaction_independent() {
            let mut rows: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
            for a in al.action_ids() {
                let by_state = rows.entry(al.action_label(a).to_string()).or_default();
                for x in al.state_ids() {
                    by_state.insert(al.state_label(x).to_string(), kernel.row(x, a, ReactionId(0)).to_vec());
                }
            }
            serde_json::to_value(rows)
        } else {
            let mut rows: BTreeMap<String, BTreeMap<String, BTreeMap<String, Vec<f64>>>> = BTreeMap::new();
            for a in al.action_ids() {
                let by_reaction = rows.entry(al.action_label(a).to_string()).or_default();
                for r in al.reaction_ids() {
                    let by_state = by_reaction.entry(al.reaction_label(r).to_string()).or_default();
                    for x in al.state_ids() {
                        by_state.insert(al.state_label(x).to_string(), kernel.row(x, a, r).to_vec());
                    }
                }
            }
            serde_json::to_value(rows)
        }
        .expect("kernel rows serialise");

        let table = |f: &dyn Fn(StateId, ActionId, ReactionId) -> f64| -> UtilityTable {
            let mut out = UtilityTable::new();
            for x in al.state_ids() {
                for a in al.action_ids() {
                    for r in al.reaction_ids() {
                        out.entry(al.state_label(x).to_string())
                            .or_default()
                            .entry(al.action_label(a).to_string())
                            .or_default()
                            .insert(al.reaction_label(r).to_string(), f(x, a, r));
                    }
                }
            }
            out
        };
        let u = &scenario.utilities;
        let typed = |f: &dyn Fn(SenderType, StateId, ActionId, ReactionId) -> f64| TypedTables {
            benign: table(&|x, a, r| f(SenderType::Benign, x, a, r)),
            malicious: table(&|x, a, r| f(SenderType::Malicious, x, a, r)),
        };
        Self {
            alphabets: AlphabetsFile {
                states: al.states().to_vec(),
                actions: al.actions().to_vec(),
                reactions: al.reactions().to_vec(),
            },
            kernel: KernelFile { reaction_independent: kernel.is_reaction_independent(), rows },
            utilities: UtilitiesFile {
                sender: typed(&|t, x, a, r| u.sender(t, x, a, r)),
                receiver: typed(&|t, x, a, r| u.receiver(t, x, a, r)),
            },
            prior: scenario.prior.malicious(),
            initial_state: al.state_label(scenario.initial_state).to_string(),
            true_type: scenario.true_type,
            horizon: scenario.horizon,
            steps: scenario.episode_length,
            seed: scenario.base_seed,
        }
    }
}

/// A validated scenario plus non-fatal findings.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario> {
    let scenario = ScenarioFile::from_json(text)?.to_scenario()?;
    let al = &scenario.alphabets;
    let warnings = check_distinguishability(&scenario.kernel)
        .witnesses
        .iter()
        .map(|w| {
            format!(
                "actions {} and {} are indistinguishable at state {} under reaction {}",
                al.action_label(w.first),
                al.action_label(w.second),
                al.state_label(w.state),
                al.reaction_label(w.reaction)
            )
        })
        .collect();
    Ok(LoadedScenario { scenario, warnings })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Formats `v` with `digits` significant digits, in positional notation
/// unless the magnitude is extreme.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), v);
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if exp < -5 || exp >= digits as i32 {
        return sci;
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let al = &trajectory.alphabets;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for s in &trajectory.steps {
        w.write_record([
            s.k.to_string(),
            al.state_label(s.state).to_string(),
            al.action_label(s.action_benign).to_string(),
            al.action_label(s.action_malicious).to_string(),
            al.action_label(s.applied_action).to_string(),
            al.reaction_label(s.reaction).to_string(),
            format_significant(s.belief, 12),
            format_significant(s.bayes_coeff, 12),
            s.agreement.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trajectory_csv_string(trajectory: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(trajectory, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("labels are utf-8")
}

fn intern(labels: &mut Vec<String>, label: &str) -> usize {
    labels.iter().position(|l| l == label).unwrap_or_else(|| {
        labels.push(label.to_string());
        labels.len() - 1
    })
}

/// Reads a trajectory written by [`write_trajectory_csv`].
///
/// Alphabets are rebuilt from the labels present, in order of first
/// appearance. The true type is the one whose prescription matches the
/// applied action on any step where the prescriptions differ; when they
/// never differ every coefficient is one and the type does not affect the
/// diagnostics.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().ne(TRAJECTORY_COLUMNS) {
        return Err(Error::Parse(format!("unexpected trajectory header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let (mut states, mut actions, mut reactions) = (Vec::new(), Vec::new(), Vec::new());
    let mut steps = Vec::new();
    let mut true_type = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::Parse(format!("row {}: bad {what} {:?}", line + 1, record));
        let num = |i: usize, what: &str| field(i).parse::<f64>().map_err(|_| bad(what));
        let step = Step {
            k: field(0).parse().map_err(|_| bad("k"))?,
            state: StateId(intern(&mut states, field(1))),
            action_benign: ActionId(intern(&mut actions, field(2))),
            action_malicious: ActionId(intern(&mut actions, field(3))),
            applied_action: ActionId(intern(&mut actions, field(4))),
            reaction: ReactionId(intern(&mut reactions, field(5))),
            belief: num(6, "belief_m")?,
            bayes_coeff: num(7, "bayes_coeff")?,
            agreement: field(8).parse().map_err(|_| bad("agreement"))?,
        };
        if true_type.is_none() && step.action_benign != step.action_malicious {
            true_type = Some(if step.applied_action == step.action_benign {
                SenderType::Benign
            } else {
                SenderType::Malicious
            });
        }
        steps.push(step);
    }
    let last = steps.last().ok_or_else(|| Error::Parse("trajectory has no rows".into()))?;
    let true_type = true_type.unwrap_or(SenderType::Malicious);
    let final_belief = match true_type {
        SenderType::Malicious => last.belief * last.bayes_coeff,
        SenderType::Benign => 1.0 - last.bayes_coeff * (1.0 - last.belief),
    }
    .clamp(0.0, 1.0);
    Ok(Trajectory { alphabets: Alphabets::new(states, actions, reactions)?, true_type, steps, final_belief })
}

/// Scenarios bundled with the crate.
pub mod builtin {
    use super::*;

    /// Binary example: normal/abnormal states, benign/malicious actions,
    /// reaction-independent kernel.
    pub const TABLE1_JSON: &str = include_str!("../scenarios/table1.json");
    /// Same game with malicious rows closer to the benign ones.
    pub const TABLE4_JSON: &str = include_str!("../scenarios/table4.json");

    pub fn table1() -> Scenario {
        parse_scenario(TABLE1_JSON).expect("bundled scenario is valid").scenario
    }

    pub fn table4() -> Scenario {
        parse_scenario(TABLE4_JSON).expect("bundled scenario is valid").scenario
    }
}
