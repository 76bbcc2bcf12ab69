use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use swarm_recovery::dot::{automaton_to_dot, rbts_to_dot};
use swarm_recovery::io::{
    parse_estimate, parse_model, parse_zone_list, serialize_model, serialize_supervisor, ROLES,
};
use swarm_recovery::mission::{MissionModel, Zone};
use swarm_recovery::rbts::{
    build_rbts, extract_supervisor, initial_y, DecisionOrder, Exploration, InitialY, SynthConfig,
    SynthError, YState, DEFAULT_NODE_BUDGET,
};
use swarm_recovery::sim::{run_trial_with, Durations, LossPolicy, Outcome, SimConfig, TrialSpec};
use swarm_recovery::trace::{write_trace, Mode};
use swarm_recovery::trials::{format_table1, run_table1, verify_model, VerifyConfig};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O, parse or contract error
  2  unrecoverable: no safe recovery strategy exists
  3  synthesis aborted: node budget exceeded
  4  a check or expected verdict failed";

#[derive(Parser)]
#[command(name = "swarmrec", version, about = "Recovery supervisors for desynchronized swarm drones", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recovery supervisor for an initial estimate.
    Synth(SynthArgs),
    /// Run one fault-and-recovery trial.
    Simulate(SimulateArgs),
    /// Run the benchmark trials and compare verdicts.
    Table1(Table1Args),
    /// Check nonblocking, soundness and engine/oracle agreement.
    Verify(VerifyArgs),
    /// Export an automaton or a recovery game as Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Write the model file for a map.
    Model(ModelArgs),
}

#[derive(Args)]
struct MapArg {
    /// Model file; the standard 5x5 map when absent.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    PreferMove,
    Minimal,
    Random,
    Maxperm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExploreArg {
    Dfs,
    Bfs,
}

#[derive(Args)]
struct EngineArgs {
    /// Work budget of the search.
    #[arg(long, env = "SWARMREC_BUDGET", default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
    #[arg(long, value_enum, default_value = "prefer-move")]
    order: OrderArg,
    #[arg(long, value_enum, default_value = "dfs")]
    explore: ExploreArg,
    /// Seed for the random decision order and the simulator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EngineArgs {
    fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            exploration: match self.explore {
                ExploreArg::Dfs => Exploration::DepthFirst,
                ExploreArg::Bfs => Exploration::BreadthFirst,
            },
            decision_order: match self.order {
                OrderArg::PreferMove => DecisionOrder::PreferMove,
                OrderArg::Minimal => DecisionOrder::Minimal,
                OrderArg::Random => DecisionOrder::Randomized(self.seed),
                OrderArg::Maxperm => DecisionOrder::MaximallyPermissive,
            },
            node_budget: self.budget,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    map: MapArg,
    /// Zone list such as `1,2` or a tuple such as `({1,2},{R},{I})`.
    #[arg(long)]
    estimate: String,
    #[command(flatten)]
    engine: EngineArgs,
    /// Supervisor output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the explored game as DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long)]
    estimate: String,
    /// True zone of the lost drone.
    #[arg(long)]
    start: Zone,
    #[command(flatten)]
    engine: EngineArgs,
    /// `search,move,return,inner` in seconds, or one value for all four.
    #[arg(long, default_value = "2,6,2,4")]
    durations: String,
    /// `never`, `always` or a per-tick probability.
    #[arg(long, default_value = "never")]
    loss: String,
    #[arg(long, default_value_t = 10)]
    drones: usize,
    /// Drone to fault; drawn from the seed when absent.
    #[arg(long)]
    drone: Option<usize>,
    /// Event trace output file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1")]
    durations: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    map: MapArg,
    /// Largest zone estimate checked.
    #[arg(long, default_value_t = 2)]
    max_zones: usize,
    #[arg(long, env = "SWARMREC_BUDGET", default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
}

#[derive(Args)]
struct ExportDotArgs {
    #[command(flatten)]
    map: MapArg,
    /// Export the recovery game from this estimate.
    #[arg(long, conflicts_with = "automaton")]
    estimate: Option<String>,
    /// Export one mission automaton by role.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(ROLES))]
    automaton: Option<String>,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Failure {
    Error(anyhow::Error),
    Unrecoverable,
    Budget(usize),
    Check(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::BudgetExceeded { budget } => Failure::Budget(budget),
            SynthError::NotWinning => Failure::Unrecoverable,
            other => Failure::Error(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_model(arg: &MapArg) -> anyhow::Result<MissionModel> {
    match &arg.map {
        None => Ok(MissionModel::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            parse_model(&text).with_context(|| format!("invalid model file {}", path.display()))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_initial(m: &MissionModel, text: &str) -> anyhow::Result<YState> {
    let raw = if text.trim_start().starts_with('(') {
        parse_estimate(m, text)?
    } else {
        m.zone_estimate(&parse_zone_list(text)?)?
    };
    match initial_y(m, &raw)? {
        InitialY::Ready(y) => Ok(y),
        InitialY::UnsafeAtStart(s) => {
            bail!(
                "estimate {} admits an unsafe state",
                m.composite().display(&s)
            )
        }
    }
}

fn parse_durations(text: &str) -> anyhow::Result<Durations> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid durations `{text}`"))?;
    match vals[..] {
        [x] => Ok(Durations::uniform(x)),
        [search, moves, ret, inner] => Ok(Durations {
            search,
            moves,
            ret,
            inner,
        }),
        _ => bail!("durations take one or four values"),
    }
}

fn parse_loss(text: &str) -> anyhow::Result<LossPolicy> {
    match text {
        "never" => Ok(LossPolicy::Never),
        "always" => Ok(LossPolicy::Always),
        p => Ok(LossPolicy::Probability(
            p.parse()
                .map_err(|_| anyhow!("invalid loss policy `{p}`"))?,
        )),
    }
}

fn synth(args: SynthArgs) -> CmdResult {
    let m = load_model(&args.map)?;
    let y = parse_initial(&m, &args.estimate)?;
    let t = build_rbts(&m, &y, &args.engine.synth_config())?;
    if let Some(path) = &args.dot {
        emit(Some(path), &rbts_to_dot(&t, m.composite()))?;
    }
    if !t.recoverable() {
        return Err(Failure::Unrecoverable);
    }
    let sup = extract_supervisor(&t)?;
    emit(args.out.as_deref(), &serialize_supervisor(&m, &sup))?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let m = load_model(&args.map)?;
    let estimate = parse_zone_list(&args.estimate).map_err(anyhow::Error::from)?;
    let cfg = SimConfig {
        map: m.map().clone(),
        n_drones: args.drones,
        durations: parse_durations(&args.durations)?,
        loss_policy: parse_loss(&args.loss)?,
        seed: args.engine.seed,
        trial: TrialSpec {
            estimate,
            start: args.start,
            drone: args.drone,
        },
        synth: args.engine.synth_config(),
        ..SimConfig::default()
    };
    let report = run_trial_with(&m, &cfg).map_err(|e| match e {
        swarm_recovery::sim::SimError::Synthesis(s) => Failure::from(s),
        other => Failure::Error(other.into()),
    })?;
    if let Some(path) = &args.trace {
        emit(Some(path), &write_trace(&report.trace))?;
    }
    let lost: Vec<&str> = report
        .trace
        .iter()
        .filter(|r| r.drone == report.lost_drone && r.mode != Mode::Nom)
        .map(|r| r.event.as_str())
        .collect();
    let time = |t: Option<f64>| t.map_or("-".into(), |t| format!("{t:.6}"));
    let zones: Vec<String> = report
        .zones_visited
        .iter()
        .map(|(z, n)| {
            if *n > 1 {
                format!("{z}x{n}")
            } else {
                z.clone()
            }
        })
        .collect();
    println!("lost_drone: {}", report.lost_drone);
    println!(
        "recoverable: {}",
        if report.recoverable { "yes" } else { "no" }
    );
    println!("outcome: {}", outcome_name(report.outcome));
    println!("moves: {}", report.move_sequence.join(" "));
    println!("events: {}", lost.join(" "));
    println!(
        "primary_recovery_time: {}",
        time(report.primary_recovery_time)
    );
    println!(
        "secondary_recovery_time: {}",
        time(report.secondary_recovery_time)
    );
    println!("zones_visited: {}", zones.join(" "));
    match report.outcome {
        Outcome::SafetyViolation => Err(Failure::Check(
            "the lost drone entered the no-fly zone".into(),
        )),
        Outcome::Timeout => Err(Failure::Check("tick budget exhausted".into())),
        _ => Ok(()),
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Running => "running",
        Outcome::Regrouped => "regrouped",
        Outcome::Stalled => "stalled",
        Outcome::SafetyViolation => "safety violation",
        Outcome::Timeout => "timeout",
    }
}

fn table1(args: Table1Args) -> CmdResult {
    let m = MissionModel::default();
    let base = SimConfig {
        seed: args.seed,
        ..SimConfig::default()
    };
    let results =
        run_table1(&m, &base, parse_durations(&args.durations)?).map_err(anyhow::Error::from)?;
    print!("{}", format_table1(&results));
    let mismatches = results.iter().filter(|r| !r.matches()).count();
    if mismatches > 0 {
        return Err(Failure::Check(format!(
            "{mismatches} verdict(s) differ from the expected table"
        )));
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CmdResult {
    let m = load_model(&args.map)?;
    let cfg = VerifyConfig {
        max_zones: args.max_zones,
        synth: SynthConfig {
            node_budget: args.budget,
            ..SynthConfig::default()
        },
        ..VerifyConfig::default()
    };
    let report = verify_model(&m, &cfg);
    print!("{report}");
    if !report.passed() {
        return Err(Failure::Check("verification failed".into()));
    }
    Ok(())
}

fn export_dot(args: ExportDotArgs) -> CmdResult {
    let m = load_model(&args.map)?;
    let text = match (&args.estimate, &args.automaton) {
        (Some(est), _) => {
            let y = parse_initial(&m, est)?;
            let t = build_rbts(&m, &y, &args.engine.synth_config())?;
            rbts_to_dot(&t, m.composite())
        }
        (None, Some(role)) => {
            let a = match role.as_str() {
                "navigation" => m.navigation(),
                "exploration" => m.exploration(),
                "scanning" => m.scanning(),
                "inner" => m.inner(),
                "nominal" => m.nominal_supervisor(),
                "secondary" => m.secondary_supervisor(),
                _ => m.mode_switcher(),
            };
            automaton_to_dot(a)
        }
        (None, None) => return Err(anyhow!("give --estimate or --automaton").into()),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(())
}

fn model(args: ModelArgs) -> CmdResult {
    let m = load_model(&args.map)?;
    emit(args.out.as_deref(), &serialize_model(&m))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Simulate(a) => simulate(a),
        Command::Table1(a) => table1(a),
        Command::Verify(a) => verify(a),
        Command::ExportDot(a) => export_dot(a),
        Command::Model(a) => model(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Unrecoverable) => {
            eprintln!("unrecoverable");
            ExitCode::from(2)
        }
        Err(Failure::Budget(b)) => {
            eprintln!("synthesis aborted: node budget of {b} exceeded");
            ExitCode::from(3)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(4)
        }
    }
}
