use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use siggame::diagnostics::{agreement_series, convergence_report, random_walk_belief, ConvergenceReport};
use siggame::equilibrium::{Fallback, GameAnalysis, SolutionConcept};
use siggame::io::{load_scenario, read_trajectory_csv, write_trajectory_csv, ScenarioFile};
use siggame::model::{validate_kernel, Scenario};
use siggame::simulator::{run_batch_with, run_episode_with, BatchSummary, SummaryOptions};
use siggame::{BeliefState, Error, RecedingHorizonPolicy};

#[derive(Parser)]
#[command(name = "siggame", version, about = "Receding-horizon signaling game simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    /// Sender-leader solution where no pure equilibrium exists
    SenderLeader,
    /// Stop with an error where no pure equilibrium exists
    Fail,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::SenderLeader => Fallback::SenderLeader,
            FallbackArg::Fail => Fallback::Fail,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report kernel and distinguishability findings
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the window game at one belief and state
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        /// Belief on the malicious type
        #[arg(long)]
        belief: f64,
        /// State label
        #[arg(long)]
        state: String,
        #[arg(long, value_enum, default_value = "sender-leader")]
        fallback: FallbackArg,
    },
    /// Run one episode and write its trajectory as CSV
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the episode length of the scenario
        #[arg(long)]
        steps: Option<usize>,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sender-leader")]
        fallback: FallbackArg,
    },
    /// Run a seeded batch of episodes and print a JSON summary
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: Option<usize>,
        /// Also write one trajectory CSV per episode into this directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// Worker threads (rayon default when absent)
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value = "sender-leader")]
        fallback: FallbackArg,
    },
    /// Convergence diagnostics for trajectory CSV files
    Diagnose {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Closed-form belief of the balanced binary random walk
    AppendixA {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        prior: f64,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let loaded = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.scenario)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    kernel_violations: Vec<String>,
    warnings: Vec<String>,
    error: Option<String>,
}

fn validate(config: &Path) -> Result<bool> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut report = ValidateReport { valid: false, kernel_violations: Vec::new(), warnings: Vec::new(), error: None };
    // Structural and parse problems surface as errors; row defects are listed
    // individually so every offending row is reported at once.
    match siggame::io::parse_scenario(&text) {
        Ok(loaded) => {
            report.valid = true;
            report.warnings = loaded.warnings;
        }
        Err(Error::InvalidKernel(_)) => {
            let file = ScenarioFile::from_json(&text)?;
            let table = file.kernel_table()?;
            report.kernel_violations = validate_kernel(&table)?.violations.iter().map(ToString::to_string).collect();
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    print_json(&report)?;
    Ok(report.valid)
}

#[derive(Serialize)]
struct EquilibriumReport {
    belief: f64,
    state: String,
    concept: SolutionConcept,
    root: RootReport,
    sender_value_benign: f64,
    sender_value_malicious: f64,
    receiver_value: f64,
    multiplicity: u64,
    tie_broken: bool,
    /// Best-response cycle when no pure equilibrium exists.
    cycle: Option<Vec<[u64; 3]>>,
    benign_tree: Vec<String>,
    malicious_tree: Vec<String>,
    receiver_tree: Vec<String>,
}

#[derive(Serialize)]
struct RootReport {
    action_benign: String,
    action_malicious: String,
    reaction: String,
}

fn equilibrium(config: &Path, belief: f64, state: &str, fallback: Fallback) -> Result<()> {
    let scenario = load(config)?;
    let al = &scenario.alphabets;
    let x = al.state(state).with_context(|| format!("unknown state label {state:?}"))?;
    let belief = BeliefState::new(belief)?;
    let analysis = GameAnalysis::new(&scenario, belief, x)?;
    let (result, cycle) = match analysis.bayes_nash() {
        Ok(eq) => (eq, None),
        Err(Error::NoPureEquilibrium { cycle }) if fallback == Fallback::SenderLeader => {
            let cycle = cycle.iter().map(|c| [c.benign, c.malicious, c.receiver]).collect();
            (analysis.sender_leader()?, Some(cycle))
        }
        Err(e) => return Err(e.into()),
    };
    let p = &result.profile;
    let (ab, am, r) = p.root();
    let actions = |b: &[siggame::ActionId]| b.iter().map(|&a| al.action_label(a).to_string()).collect();
    print_json(&EquilibriumReport {
        belief: belief.malicious(),
        state: state.to_string(),
        concept: result.concept,
        root: RootReport {
            action_benign: al.action_label(ab).into(),
            action_malicious: al.action_label(am).into(),
            reaction: al.reaction_label(r).into(),
        },
        sender_value_benign: result.sender_value_b,
        sender_value_malicious: result.sender_value_m,
        receiver_value: result.receiver_value,
        multiplicity: result.multiplicity,
        tie_broken: result.tie_broken,
        cycle,
        benign_tree: actions(p.sender_branch(siggame::SenderType::Benign)),
        malicious_tree: actions(p.sender_branch(siggame::SenderType::Malicious)),
        receiver_tree: p.receiver_branch().iter().map(|&r| al.reaction_label(r).to_string()).collect(),
    })
}

fn with_steps(mut scenario: Scenario, steps: Option<usize>) -> Scenario {
    if let Some(n) = steps {
        scenario.episode_length = n;
    }
    scenario
}

fn simulate(config: &Path, seed: u64, steps: Option<usize>, out: Option<&Path>, fallback: Fallback) -> Result<()> {
    let scenario = with_steps(load(config)?, steps);
    let mut policy = RecedingHorizonPolicy::new(&scenario, fallback);
    let traj = run_episode_with(&mut policy, seed)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_trajectory_csv(&traj, io::BufWriter::new(file))?;
        }
        None => write_trajectory_csv(&traj, io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct BatchReport<'a> {
    #[serde(flatten)]
    summary: &'a BatchSummary,
    median_sustained_agreement: Option<f64>,
}

/// Median over episodes, counting episodes that never settle as infinite.
/// `None` when the median itself is infinite.
fn median_sustained(summary: &BatchSummary) -> Option<f64> {
    let mut ks: Vec<f64> = summary
        .episodes
        .iter()
        .map(|e| e.sustained_agreement.map_or(f64::INFINITY, |k| k as f64))
        .collect();
    ks.sort_by(f64::total_cmp);
    let n = ks.len();
    let m = if n % 2 == 1 { ks[n / 2] } else { (ks[n / 2 - 1] + ks[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

#[allow(clippy::too_many_arguments)]
fn batch(
    config: &Path,
    episodes: usize,
    seed: u64,
    steps: Option<usize>,
    out_dir: Option<&Path>,
    options: SummaryOptions,
    threads: Option<usize>,
    fallback: Fallback,
) -> Result<()> {
    let scenario = with_steps(load(config)?, steps);
    let run = || run_batch_with(&scenario, episodes, seed, fallback, options);
    let batch = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run)?,
        None => run()?,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, traj) in batch.trajectories.iter().enumerate() {
            if let Ok(t) = traj {
                let path = dir.join(format!("episode_{i:05}.csv"));
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_trajectory_csv(t, io::BufWriter::new(file))?;
            }
        }
    }
    print_json(&BatchReport { summary: &batch.summary, median_sustained_agreement: median_sustained(&batch.summary) })
}

#[derive(Serialize)]
struct DiagnoseEntry {
    file: String,
    steps: usize,
    true_type: siggame::SenderType,
    terminal_belief: f64,
    convergence: ConvergenceReport,
    sustained_agreement: Option<usize>,
}

fn diagnose(inputs: &[PathBuf], window: usize, tol: f64) -> Result<()> {
    let mut entries = Vec::with_capacity(inputs.len());
    for path in inputs {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let traj = read_trajectory_csv(io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        let convergence =
            convergence_report(&traj, window, tol).with_context(|| format!("diagnosing {}", path.display()))?;
        entries.push(DiagnoseEntry {
            file: path.display().to_string(),
            steps: traj.len(),
            true_type: traj.true_type,
            terminal_belief: traj.final_belief,
            convergence,
            sustained_agreement: agreement_series(&traj).sustained_from,
        });
    }
    print_json(&entries)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => return validate(&config),
        Command::Equilibrium { config, belief, state, fallback } => equilibrium(&config, belief, &state, fallback.into())?,
        Command::Simulate { config, seed, steps, out, fallback } => {
            simulate(&config, seed, steps, out.as_deref(), fallback.into())?
        }
        Command::Batch { config, episodes, seed, steps, out_dir, window, tol, threads, fallback } => {
            if episodes == 0 {
                bail!("--episodes must be at least 1");
            }
            batch(&config, episodes, seed, steps, out_dir.as_deref(), SummaryOptions { window, tol }, threads, fallback.into())?
        }
        Command::Diagnose { inputs, window, tol } => diagnose(&inputs, window, tol)?,
        Command::AppendixA { p, k, prior } => {
            let b = random_walk_belief(p, k, BeliefState::new(prior)?)?;
            println!("{:.7}", b.malicious());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
