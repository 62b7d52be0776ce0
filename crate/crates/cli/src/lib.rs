//! `trustwork`: one binary for the whole pipeline.
//!
//! Every flag can also be set in a TOML file passed with `--config`. Global
//! flags sit at the top level and subcommand flags in a table named after the
//! subcommand:
//!
//! ```toml
//! seed = 7
//! jobs = 4
//!
//! [simulate-corpus]
//! participants = 200
//! out = "corpus.csv"
//! ```
//!
//! Command-line flags win over the file. Relative paths are resolved against
//! the working directory. Exit codes: 0 success, 2 invalid input, 1 runtime
//! failure.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;
use trustwork_core::estimation::sessions::{read_session_rows, session_rows_to_csv};
use trustwork_core::estimation::{
    filter_outlier_participants, fit_trust_model, fit_workload_model, FitConfig, Sequence,
    SessionRow,
};
use trustwork_core::model::{
    export_model, load_model, model_hash, reference_model, Belief, Experience, Stimulus,
    TrustWorkloadModel,
};
use trustwork_core::policy::{
    export_policy_grid, grid_to_csv, load_policy, save_policy, solve_qmdp, PolicyFile,
    ReliabilitySpec, RewardSpec, STUDY_GAMMA,
};
use trustwork_core::sim::corpus::corpus_rows;
use trustwork_core::sim::{
    filter_step, run_experiment, simulate_corpus, summary_csv, ArmorTimings, CorpusConfig,
    ExperimentConfig, MissionConfig, TransparencyPolicy,
};
use trustwork_core::util::{fmt_f64, write_atomic};
use trustwork_service::{AppState, ServiceConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn input(msg: impl std::fmt::Display) -> CliError {
    CliError::Input(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

fn missing(field: &str) -> CliError {
    CliError::Input(format!("missing required value `{field}` (flag --{field} or config file)"))
}

#[derive(Debug, Parser)]
#[command(name = "trustwork", version, about = "Trust-workload estimation, transparency control and simulation")]
pub struct Cli {
    /// TOML file mirroring the command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a study corpus (three fixed-transparency missions per participant).
    SimulateCorpus(SimulateArgs),
    /// Fit the trust chain and write a model with the fitted trust half.
    FitTrust(FitArgs),
    /// Fit the workload chain and write a model with the fitted workload half.
    FitWorkload(FitArgs),
    /// Solve a Q-MDP transparency policy.
    SolvePolicy(SolveArgs),
    /// Tabulate a policy over the belief grid.
    PolicyGrid(GridArgs),
    /// Compare transparency policies on synthetic humans.
    RunExperiment(ExperimentArgs),
    /// Re-run the belief filter over logged sessions.
    ReplayBelief(ReplayArgs),
    /// Host live missions over HTTP.
    Serve(ServeArgs),
}

trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! mergeable {
    ($ty:ident { $($o:ident),* } bools { $($b:ident),* } lists { $($l:ident),* }) => {
        impl Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self {
                    $($o: self.$o.or(file.$o),)*
                    $($b: self.$b || file.$b,)*
                    $($l: if self.$l.is_empty() { file.$l } else { self.$l },)*
                }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Generating model (default: bundled reference).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub participants: Option<usize>,
    #[arg(long)]
    pub trials_per_mission: Option<usize>,
    /// Session-log CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
mergeable!(SimulateArgs { model, participants, trials_per_mission, out } bools {} lists {});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    /// Session-log CSV, JSON sequence file, or a directory of CSV logs.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Model supplying the half that is not fitted (default: reference).
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional JSON fit report (trace, restarts, warnings).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Drop participants with any response time above this pooled percentile (0-1).
    #[arg(long)]
    pub filter_percentile: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Genetic-search population (workload only).
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub stall_generations: Option<usize>,
    /// Skip the local refinement after the genetic search.
    #[arg(long)]
    pub no_refine: bool,
}
mergeable!(FitArgs {
    sessions, base, out, report, filter_percentile, restarts, max_iterations, tolerance,
    population, generations, stall_generations
} bools { no_refine } lists {});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolveArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Weight of the decision reward against the response-time reward.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// P(aid says present | truth absent).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// P(aid says absent | truth present).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Prior P(threat present).
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
mergeable!(SolveArgs { model, zeta, gamma, alpha, beta, d, out } bools {} lists {});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridArgs {
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Recommendation: absent or present.
    #[arg(long)]
    pub rec: Option<Stimulus>,
    /// Previous experience: reliable or faulty.
    #[arg(long)]
    pub exp: Option<Experience>,
    /// Points per belief axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// CSV to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
mergeable!(GridArgs { policy, rec, exp, resolution, out } bools {} lists {});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentArgs {
    /// Model the controller plans with (default: reference).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Model the synthetic humans follow (default: reference).
    #[arg(long)]
    pub human_model: Option<PathBuf>,
    /// Policies to compare, e.g. `fixed_low,closed_loop_0.95` (default: the standard six).
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
    /// Solved policy files to add as closed-loop arms; each must match the controller model.
    #[arg(long)]
    pub policy_file: Vec<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub trials_per_mission: Option<usize>,
    /// Summary CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional session-log CSV of every simulated mission.
    #[arg(long)]
    pub logs_out: Option<PathBuf>,
}
mergeable!(ExperimentArgs {
    model, human_model, replications, trials_per_mission, out, logs_out
} bools {} lists { policies, policy_file });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReplayArgs {
    /// Session-log CSV or a directory of them.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail when a logged belief differs from the replay.
    #[arg(long)]
    pub strict: bool,
}
mergeable!(ReplayArgs { sessions, model, out } bools { strict } lists {});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ServeArgs {
    /// Listen address (default 127.0.0.1:8080).
    #[arg(long)]
    pub addr: Option<SocketAddr>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for per-session CSV logs (default `sessions`).
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[arg(long)]
    pub trials_per_mission: Option<usize>,
    #[arg(long)]
    pub cors_origin: Option<String>,
    /// Extra solved policies, served under their file stem.
    #[arg(long)]
    pub policy_file: Vec<PathBuf>,
    /// Accept client seeds; unseeded sessions all get the `--seed` mission.
    #[arg(long)]
    pub test_mode: bool,
}
mergeable!(ServeArgs {
    addr, model, log_dir, trials_per_mission, cors_origin
} bools { test_mode } lists { policy_file });

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    simulate_corpus: Option<SimulateArgs>,
    fit_trust: Option<FitArgs>,
    fit_workload: Option<FitArgs>,
    solve_policy: Option<SolveArgs>,
    policy_grid: Option<GridArgs>,
    run_experiment: Option<ExperimentArgs>,
    replay_belief: Option<ReplayArgs>,
    serve: Option<ServeArgs>,
}

fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn merged<T: Merge + Default>(flags: T, file: Option<T>) -> T {
    flags.merge(file.unwrap_or_default())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let jobs = cli.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(input("jobs must be >= 1"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(runtime)?;
    pool.install(|| match cli.command {
        Command::SimulateCorpus(a) => simulate(merged(a, file.simulate_corpus), seed),
        Command::FitTrust(a) => fit(merged(a, file.fit_trust), seed, Chain::Trust),
        Command::FitWorkload(a) => fit(merged(a, file.fit_workload), seed, Chain::Workload),
        Command::SolvePolicy(a) => solve(merged(a, file.solve_policy)),
        Command::PolicyGrid(a) => grid(merged(a, file.policy_grid)),
        Command::RunExperiment(a) => experiment(merged(a, file.run_experiment), seed),
        Command::ReplayBelief(a) => replay(merged(a, file.replay_belief)),
        Command::Serve(a) => serve(merged(a, file.serve), seed),
    })
}

fn model_or_reference(path: Option<&Path>) -> Result<TrustWorkloadModel, CliError> {
    match path {
        Some(p) => load_model(p).map_err(input),
        None => Ok(reference_model()),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_output(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs, seed: u64) -> Result<(), CliError> {
    let out = a.out.ok_or_else(|| missing("out"))?;
    let model = model_or_reference(a.model.as_deref())?;
    let cfg = CorpusConfig {
        participants: a.participants.unwrap_or(200),
        trials_per_mission: a.trials_per_mission.unwrap_or(15),
        seed,
        ..CorpusConfig::default()
    };
    if cfg.participants == 0 || cfg.trials_per_mission == 0 {
        return Err(input("participants and trials-per-mission must be >= 1"));
    }
    let logs = simulate_corpus(&cfg, &model).map_err(runtime)?;
    let bytes = session_rows_to_csv(&corpus_rows(&logs)).map_err(runtime)?;
    log::info!("{} missions simulated", logs.len());
    write_output(&out, &bytes)
}

#[derive(Clone, Copy)]
enum Chain {
    Trust,
    Workload,
}

fn fit_config(a: &FitArgs, seed: u64) -> Result<FitConfig, CliError> {
    let mut cfg = FitConfig {
        seed,
        refine_workload: !a.no_refine,
        ..FitConfig::default()
    };
    if let Some(v) = a.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = a.max_iterations {
        cfg.max_iterations = v;
    }
    if let Some(v) = a.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = a.population {
        cfg.ga.population = v;
    }
    if let Some(v) = a.generations {
        cfg.ga.max_generations = v;
    }
    if let Some(v) = a.stall_generations {
        cfg.ga.stall_generations = v;
    }
    cfg.validate().map_err(input)?;
    Ok(cfg)
}

fn fit(a: FitArgs, seed: u64, chain: Chain) -> Result<(), CliError> {
    let sessions = a.sessions.as_deref().ok_or_else(|| missing("sessions"))?;
    let out = a.out.as_deref().ok_or_else(|| missing("out"))?;
    let cfg = fit_config(&a, seed)?;
    if let Some(p) = a.filter_percentile {
        if !(p > 0.0 && p < 1.0) {
            return Err(input(format!("filter-percentile must lie strictly between 0 and 1 (got {p})")));
        }
    }
    let base = model_or_reference(a.base.as_deref())?;
    let mut data: Vec<Sequence> =
        trustwork_core::estimation::sessions::load_session_path(sessions).map_err(input)?;
    if let Some(p) = a.filter_percentile {
        let rep = filter_outlier_participants(&data, p).map_err(input)?;
        log::info!(
            "response-time threshold {:.3} s; removed {} participant(s)",
            rep.threshold,
            rep.removed.len()
        );
        data = rep.kept;
    }
    log::info!("fitting on {} sequences", data.len());
    let (model, report) = match chain {
        Chain::Trust => {
            let rep = fit_trust_model(&data, &cfg).map_err(runtime)?;
            let m = TrustWorkloadModel {
                trust: rep.model.clone(),
                workload: base.workload,
            };
            (m, serde_json::to_string_pretty(&rep))
        }
        Chain::Workload => {
            let rep = fit_workload_model(&data, &cfg).map_err(runtime)?;
            let m = TrustWorkloadModel {
                trust: base.trust,
                workload: rep.model.clone(),
            };
            (m, serde_json::to_string_pretty(&rep))
        }
    };
    export_model(&model, out).map_err(runtime)?;
    log::info!("wrote {}", out.display());
    if let Some(path) = a.report.as_deref() {
        let mut text = report.map_err(runtime)?;
        text.push('\n');
        write_output(path, text.as_bytes())?;
    }
    Ok(())
}

fn solve(a: SolveArgs) -> Result<(), CliError> {
    let out = a.out.as_deref().ok_or_else(|| missing("out"))?;
    let zeta = a.zeta.ok_or_else(|| missing("zeta"))?;
    let spec = RewardSpec {
        zeta,
        gamma: a.gamma.unwrap_or(STUDY_GAMMA),
        ..RewardSpec::study(zeta)
    };
    spec.validate().map_err(input)?;
    let s = ReliabilitySpec::STUDY;
    let rel = ReliabilitySpec {
        alpha: a.alpha.unwrap_or(s.alpha),
        beta: a.beta.unwrap_or(s.beta),
        d: a.d.unwrap_or(s.d),
    };
    rel.validate().map_err(input)?;
    let model = model_or_reference(a.model.as_deref())?;
    let q = solve_qmdp(&model, &spec, &rel).map_err(runtime)?;
    log::info!("value iteration: {} iterations, residual {:e}", q.iterations, q.residual);
    let file = PolicyFile::new(&q, spec, rel, model_hash(&model));
    save_policy(&file, out).map_err(runtime)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn grid(a: GridArgs) -> Result<(), CliError> {
    let path = a.policy.as_deref().ok_or_else(|| missing("policy"))?;
    let rec = a.rec.ok_or_else(|| missing("rec"))?;
    let exp = a.exp.ok_or_else(|| missing("exp"))?;
    let resolution = a.resolution.unwrap_or(101);
    if resolution < 2 {
        return Err(input(format!("resolution must be >= 2 (got {resolution})")));
    }
    let q = load_policy(path).map_err(input)?.q_table();
    let cells = export_policy_grid(&q, rec, exp, resolution).map_err(runtime)?;
    write_or_print(a.out.as_deref(), &grid_to_csv(&cells))
}

/// A policy file is usable as an experiment arm only if it was solved for
/// the controller model under the experiment's reward settings, since the
/// harness re-solves closed-loop arms from the model and zeta.
fn policy_file_arm(
    path: &Path,
    controller: &TrustWorkloadModel,
    mission: &MissionConfig,
) -> Result<TransparencyPolicy, CliError> {
    let p = load_policy(path).map_err(input)?;
    let mismatch = |field: &str| {
        input(format!(
            "{}: field `{field}` does not match the experiment settings",
            path.display()
        ))
    };
    if p.model_hash != model_hash(controller) {
        return Err(mismatch("model_hash"));
    }
    if p.reliability != mission.reliability {
        return Err(mismatch("reliability"));
    }
    if p.reward.gamma != STUDY_GAMMA {
        return Err(mismatch("gamma"));
    }
    if Ok(p.reward.decision_table) != mission.timings.decision_table().map_err(|e| e.to_string()) {
        return Err(mismatch("decision_table"));
    }
    Ok(TransparencyPolicy::ClosedLoop { zeta: p.reward.zeta })
}

fn experiment(a: ExperimentArgs, seed: u64) -> Result<(), CliError> {
    let out = a.out.as_deref().ok_or_else(|| missing("out"))?;
    let mut policies = if a.policies.is_empty() {
        if a.policy_file.is_empty() {
            TransparencyPolicy::standard()
        } else {
            Vec::new()
        }
    } else {
        a.policies
            .iter()
            .map(|s| s.parse::<TransparencyPolicy>().map_err(input))
            .collect::<Result<_, _>>()?
    };
    let mission = MissionConfig {
        trials_per_mission: a.trials_per_mission.unwrap_or(15),
        timings: ArmorTimings::default(),
        ..MissionConfig::default()
    };
    mission.validate().map_err(input)?;
    let replications = a.replications.unwrap_or(1000);
    if replications < 2 {
        return Err(input(format!("replications must be >= 2 (got {replications})")));
    }
    let controller = model_or_reference(a.model.as_deref())?;
    let human = model_or_reference(a.human_model.as_deref())?;
    for path in &a.policy_file {
        let arm = policy_file_arm(path, &controller, &mission)?;
        if !policies.contains(&arm) {
            policies.push(arm);
        }
    }
    let cfg = ExperimentConfig {
        policies,
        replications,
        mission,
        seed,
    };
    let result = run_experiment(&cfg, &controller, &human).map_err(runtime)?;
    for s in &result.summaries {
        log::info!(
            "{}: decision {:.3} ± {:.3}, rt {:.3} ± {:.3}",
            s.policy,
            s.decision_mean,
            s.decision_sem,
            s.rt_mean,
            s.rt_sem
        );
    }
    if let Some(path) = a.logs_out.as_deref() {
        let bytes = session_rows_to_csv(&corpus_rows(&result.logs)).map_err(runtime)?;
        write_output(path, &bytes)?;
    }
    write_output(out, summary_csv(&result.summaries).as_bytes())
}

fn read_rows(path: &Path) -> Result<Vec<SessionRow>, CliError> {
    let open = |p: &Path| {
        let f = std::fs::File::open(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
        read_session_rows(std::io::BufReader::new(f)).map_err(|e| input(format!("{}: {e}", p.display())))
    };
    if !path.is_dir() {
        return open(path);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| input(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in files {
        rows.extend(open(&f)?);
    }
    Ok(rows)
}

/// Counts from a replay run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub trials: usize,
    /// Trials whose logged snapshot was compared.
    pub compared: usize,
    pub mismatches: usize,
}

/// Replay the filter over grouped session rows and render the CSV. The
/// belief resets to the prior at the start of every mission.
pub fn replay_rows(rows: &[SessionRow], model: &TrustWorkloadModel) -> Result<(String, ReplayOutcome), CliError> {
    let mut csv = String::from(
        "participant_id,mission_id,trial_index,p_trust_high,p_workload_high,logged_p_trust_high,logged_p_workload_high,match\n",
    );
    let mut outcome = ReplayOutcome {
        trials: 0,
        compared: 0,
        mismatches: 0,
    };
    let mut b = Belief::prior(model);
    for (k, r) in rows.iter().enumerate() {
        let new_mission = k == 0
            || rows[k - 1].participant_id != r.participant_id
            || rows[k - 1].mission_id != r.mission_id;
        if new_mission {
            b = Belief::prior(model);
            if r.trial_index != 0 {
                return Err(input(format!(
                    "{}/{}: mission starts at trial {}",
                    r.participant_id, r.mission_id, r.trial_index
                )));
            }
        } else if r.trial_index != rows[k - 1].trial_index + 1 {
            return Err(input(format!(
                "{}/{}: trial {} follows trial {}",
                r.participant_id,
                r.mission_id,
                r.trial_index,
                rows[k - 1].trial_index
            )));
        }
        let (t, w) = (b.p_trust_high(), b.p_workload_high());
        let matched = match (r.p_trust_high, r.p_workload_high) {
            (Some(lt), Some(lw)) => {
                outcome.compared += 1;
                let ok = lt.to_bits() == t.to_bits() && lw.to_bits() == w.to_bits();
                outcome.mismatches += usize::from(!ok);
                if ok { "true" } else { "false" }
            }
            _ => "",
        };
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.participant_id,
            r.mission_id,
            r.trial_index,
            fmt_f64(t),
            fmt_f64(w),
            opt(r.p_trust_high),
            opt(r.p_workload_high),
            matched
        ));
        let obs = r.observation().map_err(input)?;
        b = filter_step(&b, r.action(), &obs, model).map_err(runtime)?.0;
        outcome.trials += 1;
    }
    Ok((csv, outcome))
}

fn replay(a: ReplayArgs) -> Result<(), CliError> {
    let sessions = a.sessions.as_deref().ok_or_else(|| missing("sessions"))?;
    let model = model_or_reference(a.model.as_deref())?;
    let rows = read_rows(sessions)?;
    let (csv, outcome) = replay_rows(&rows, &model)?;
    log::info!(
        "{} trials replayed, {} compared, {} mismatched",
        outcome.trials,
        outcome.compared,
        outcome.mismatches
    );
    write_or_print(a.out.as_deref(), &csv)?;
    if a.strict && outcome.mismatches > 0 {
        return Err(runtime(format!(
            "{} of {} logged beliefs differ from the replay",
            outcome.mismatches, outcome.compared
        )));
    }
    Ok(())
}

fn serve(a: ServeArgs, seed: u64) -> Result<(), CliError> {
    let model = model_or_reference(a.model.as_deref())?;
    let config = ServiceConfig {
        model,
        trials_per_mission: a.trials_per_mission.unwrap_or(15),
        log_dir: a.log_dir.unwrap_or_else(|| PathBuf::from("sessions")),
        test_mode: a.test_mode,
        server_seed: seed,
        cors_origin: a.cors_origin,
        ..ServiceConfig::default()
    };
    let hash = model_hash(&config.model);
    let mut state = AppState::new(config).map_err(input)?;
    for path in &a.policy_file {
        let p = load_policy(path).map_err(input)?;
        if p.model_hash != hash {
            return Err(input(format!(
                "{}: field `model_hash` does not match the served model",
                path.display()
            )));
        }
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| input(format!("{}: no file name", path.display())))?;
        state.add_policy(id, p.q_table());
    }
    let addr = a.addr.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 8080)));
    trustwork_service::serve_blocking(addr, state).map_err(runtime)
}
