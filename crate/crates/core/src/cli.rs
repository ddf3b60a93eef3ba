//! Command-line front end: argument parsing, config lookup and CSV/JSON output.
//!
//! Exit status is 0 on success, 1 when a command runs but fails (including a
//! failed `verify`), and 2 for bad arguments or unreadable configs. Every
//! failure ends with one JSON line on stderr: `{"error": kind, "message": ...}`.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Zero;

use crate::binary_model::{
    appendix_table, classify, enumerate_states, Event, NetworkState, StateElement,
};
use crate::perf_eval::{
    check_reference_table, format_rational, monte_carlo_events, parse_rational,
    policy_event_probabilities, BernoulliAssignment,
};
use crate::policy_synth::{
    check_reference_expressions, decision_rows, derive_policy, minimize, KnowledgeSubset,
    NamedPolicy, RelayPolicy, Target, Viewpoint,
};
use crate::sinr_sim::{
    flow_separation_sweep, parse_range, simulate_rows, write_sweep_csv, Protocol, SimConfig,
};

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "COOP_RELAY_SEED";
/// Search path (like `PATH`) for relative `--config` arguments.
pub const CONFIG_PATH_ENV: &str = "COOP_RELAY_CONFIG_PATH";

#[derive(Debug, Parser)]
#[command(
    name = "coop-relay",
    version,
    about = "Synthesize, evaluate and simulate cooperative relay access policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label binary network states as assist/backoff/collision.
    Classify(ClassifyArgs),
    /// Derive and minimize the relay policy for a knowledge subset.
    Synth(SynthArgs),
    /// Exact (and optionally Monte-Carlo) event probabilities of a policy.
    Eval(EvalArgs),
    /// Run one SINR simulation plus its no-relay baseline; CSV per flow.
    Simulate(SimulateArgs),
    /// Sweep flow separation for several protocols; CSV per (run, flow).
    Sweep(SweepArgs),
    /// Check the state labels, policy expressions and event table against
    /// their reference values.
    Verify,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("which").required(true).args(["state", "all"])))]
struct ClassifyArgs {
    /// State index in 0..=255; prints JSON.
    #[arg(long, value_parser = clap::value_parser!(u16).range(0..256))]
    state: Option<u16>,
    /// Print all 256 states as CSV.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Known elements: full, hops:0, hops:1, hops:2 or custom:ELEM,ELEM,...
    #[arg(long, default_value = "full")]
    knowledge: KnowledgeSubset,
    /// Conflict-set resolution: cons or greed.
    #[arg(long, default_value = "cons")]
    view: Viewpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// `p` on the four cross-flow links, 1/2 elsewhere.
    FlowSep,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// fnsi, cons0, cons1, cons2, greed0, greed1, greed2, all, or custom
    /// (custom needs --knowledge and --view).
    #[arg(long)]
    policy: String,
    /// Knowledge subset for --policy custom.
    #[arg(long, requires = "view")]
    knowledge: Option<KnowledgeSubset>,
    /// Viewpoint for --policy custom.
    #[arg(long, requires = "knowledge")]
    view: Option<Viewpoint>,
    /// Parameter scenario.
    #[arg(long, value_enum, default_value = "flow-sep")]
    scenario: Scenario,
    /// Value of p as a rational such as 1/2 or 0.25 [default: 1/2].
    #[arg(long, conflicts_with = "sweep")]
    p: Option<String>,
    /// Inclusive range start:stop:step of p values, or a comma list.
    #[arg(long)]
    sweep: Option<String>,
    /// Print the polynomials in p instead of evaluating them.
    #[arg(long, conflicts_with_all = ["p", "sweep", "mc_samples"])]
    emit_poly: bool,
    /// Monte-Carlo samples per p value; 0 disables the estimate columns.
    #[arg(long, default_value_t = 0)]
    mc_samples: u64,
    /// Monte-Carlo seed.
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON simulation config; relative paths are also searched in
    /// $COOP_RELAY_CONFIG_PATH.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Override the config's protocol.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Override the simulated duration in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON simulation config with a flow_separation topology.
    #[arg(long)]
    config: PathBuf,
    /// Separations in metres: start:stop:step (inclusive) or a comma list.
    #[arg(long, default_value = "50:1000:50")]
    separations: String,
    /// Comma-separated protocols; norelay is always run as the baseline.
    #[arg(long, default_value = "cons0,cons2,greed2,greed0")]
    protocols: String,
    /// Replicas per point; replica seeds are derived from the master seed.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Override the config's master seed.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Override the simulated duration in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn json(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type Out<'a> = &'a mut dyn Write;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let message = first.strip_prefix("error: ").unwrap_or(first).to_string();
            eprintln!("{}", CliError::Usage(message).json());
            return ExitCode::from(2);
        }
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = dispatch(cli.command, &mut out);
    let flushed = out.flush().map_err(CliError::from);
    let result = result.and(flushed);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(m)) if m.contains("Broken pipe") => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command, out: Out) -> Result<(), CliError> {
    match command {
        Command::Classify(a) => cmd_classify(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify => cmd_verify(out),
    }
}

fn cmd_classify(args: ClassifyArgs, out: Out) -> Result<(), CliError> {
    if let Some(index) = args.state {
        let state = NetworkState::from_index(index as u8);
        let bits: serde_json::Map<String, serde_json::Value> = StateElement::ALL
            .iter()
            .map(|&e| (e.name().to_string(), state.get(e).into()))
            .collect();
        let doc = serde_json::json!({ "index": index, "bits": bits, "label": classify(state) });
        writeln!(out, "{doc}")?;
        return Ok(());
    }
    let names: Vec<&str> = StateElement::ALL.iter().map(|e| e.name()).collect();
    writeln!(out, "index,{},label", names.join(","))?;
    for state in enumerate_states() {
        let bits: Vec<&str> = StateElement::ALL
            .iter()
            .map(|&e| if state.get(e) { "1" } else { "0" })
            .collect();
        writeln!(
            out,
            "{},{},{}",
            state.index(),
            bits.join(","),
            classify(state)
        )?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, out: Out) -> Result<(), CliError> {
    let policy = derive_policy(args.knowledge, args.view);
    let elements = args.knowledge.elements();
    let mut header = vec!["bin".to_string()];
    header.extend(elements.iter().map(|e| e.name().to_string()));
    header.push("decision".into());
    writeln!(out, "{}", header.join(","))?;
    for (bin, (assignment, decision)) in decision_rows(&policy).into_iter().enumerate() {
        let mut row = vec![bin.to_string()];
        row.extend(
            assignment
                .iter()
                .map(|(_, v)| if *v { "1" } else { "0" }.to_string()),
        );
        row.push(decision.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    writeln!(out)?;
    writeln!(out, "# knowledge {} view {}", args.knowledge, args.view)?;
    writeln!(
        out,
        "# Z bins are free in both expressions; the relay treats them as Rx"
    )?;
    writeln!(out, "# Tx = {}", minimize(&policy, Target::TxSet))?;
    writeln!(out, "# Rx = {}", minimize(&policy, Target::RxSet))?;
    Ok(())
}

fn eval_policies(args: &EvalArgs) -> Result<Vec<(String, RelayPolicy)>, CliError> {
    match args.policy.trim().to_ascii_lowercase().as_str() {
        "all" => Ok(NamedPolicy::ALL
            .iter()
            .map(|n| (n.id(), n.policy()))
            .collect()),
        "custom" => match (args.knowledge, args.view) {
            (Some(k), Some(v)) => Ok(vec![("custom".into(), derive_policy(k, v))]),
            _ => Err(CliError::Usage(
                "--policy custom needs --knowledge and --view".into(),
            )),
        },
        name => {
            let named: NamedPolicy = name.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            Ok(vec![(named.id(), named.policy())])
        }
    }
}

fn rational_points(args: &EvalArgs) -> Result<Vec<BigRational>, CliError> {
    let usage = |e: crate::perf_eval::PerfError| CliError::Usage(e.to_string());
    let points = if let Some(p) = &args.p {
        vec![parse_rational(p).map_err(usage)?]
    } else if let Some(spec) = &args.sweep {
        parse_rational_range(spec).map_err(usage)?
    } else {
        vec![BigRational::new(1.into(), 2.into())]
    };
    Ok(points)
}

/// `start:stop:step` with exact rational arithmetic, or a comma list.
fn parse_rational_range(spec: &str) -> Result<Vec<BigRational>, crate::perf_eval::PerfError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (
                parse_rational(start)?,
                parse_rational(stop)?,
                parse_rational(step)?,
            );
            if step <= BigRational::zero() || stop < start {
                return Err(crate::perf_eval::PerfError::Parse(spec.to_string()));
            }
            let mut out = Vec::new();
            let mut x = start;
            while x <= stop {
                out.push(x.clone());
                x += &step;
            }
            Ok(out)
        }
        [list] => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_rational)
            .collect(),
        _ => Err(crate::perf_eval::PerfError::Parse(spec.to_string())),
    }
}

fn cmd_eval(args: EvalArgs, out: Out) -> Result<(), CliError> {
    let policies = eval_policies(&args)?;
    let Scenario::FlowSep = args.scenario;
    let scenario = BernoulliAssignment::flow_separation_scenario();
    let exact: Vec<(String, _)> = policies
        .iter()
        .map(|(id, policy)| {
            policy_event_probabilities(policy, &scenario)
                .map(|polys| (id.clone(), polys))
                .map_err(|e| CliError::Runtime(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    if args.emit_poly {
        writeln!(out, "policy,event,polynomial")?;
        for (id, polys) in &exact {
            for (event, poly) in Event::ALL.iter().zip(polys) {
                writeln!(out, "{id},{},{poly}", event.letter())?;
            }
        }
        return Ok(());
    }

    let points = rational_points(&args)?;
    let with_mc = args.mc_samples > 0;
    write!(out, "policy,event,p,exact_value")?;
    writeln!(
        out,
        "{}",
        if with_mc {
            ",mc_estimate,mc_stderr"
        } else {
            ""
        }
    )?;
    for ((id, polys), (_, policy)) in exact.iter().zip(&policies) {
        for p in &points {
            let params = scenario.substitute(p);
            params
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mc = if with_mc {
                Some(
                    monte_carlo_events(policy, &params, args.mc_samples, args.seed)
                        .map_err(|e| CliError::Runtime(e.to_string()))?,
                )
            } else {
                None
            };
            for (k, event) in Event::ALL.iter().enumerate() {
                write!(
                    out,
                    "{id},{},{},{}",
                    event.letter(),
                    format_rational(p),
                    format_rational(&polys[k].eval(p))
                )?;
                match &mc {
                    Some(m) => writeln!(out, ",{},{}", m[k].estimate, m[k].std_error)?,
                    None => writeln!(out)?,
                }
            }
        }
    }
    Ok(())
}

/// Finds `path` as given, or under each directory of the config search path.
fn resolve_config(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dirs) = std::env::var_os(CONFIG_PATH_ENV) {
            for dir in std::env::split_paths(&dirs) {
                let candidate = dir.join(path);
                if candidate.exists() {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(CliError::Usage(format!(
        "config `{}` not found",
        path.display()
    )))
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    duration_s: Option<f64>,
) -> Result<SimConfig, CliError> {
    let mut cfg =
        SimConfig::load(&resolve_config(path)?).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    if let Some(d) = duration_s {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CliError::Usage(format!(
                "--duration-s must be positive, got {d}"
            )));
        }
        cfg.run.duration_s = d;
    }
    Ok(cfg)
}

fn cmd_simulate(args: SimulateArgs, out: Out) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config, args.seed, args.duration_s)?;
    if let Some(p) = args.protocol {
        cfg.protocol = p;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = simulate_rows(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_sweep_csv(&rows, out).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_sweep(args: SweepArgs, out: Out) -> Result<(), CliError> {
    let cfg = load_config(&args.config, args.seed, args.duration_s)?;
    let separations = parse_range(&args.separations).map_err(|e| CliError::Usage(e.to_string()))?;
    let protocols: Vec<Protocol> = args
        .protocols
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e: crate::sinr_sim::SimError| CliError::Usage(e.to_string()))?;
    let table = flow_separation_sweep(&cfg, &separations, &protocols, args.seeds)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_sweep_csv(&table.rows(), out).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_verify(out: Out) -> Result<(), CliError> {
    let mut failures = Vec::new();

    let table = appendix_table();
    let matching = enumerate_states()
        .filter(|&s| classify(s) == table[s.index() as usize])
        .count();
    let harmful = enumerate_states()
        .filter(|&s| classify(s).is_harmful())
        .count();
    let ok = matching == 256 && harmful == 48;
    writeln!(
        out,
        "labels       {}  {matching}/256 match, {harmful} harmful states",
        verdict(ok)
    )?;
    if !ok {
        failures.push("labels");
    }

    let exprs = check_reference_expressions();
    let good = exprs.iter().filter(|c| c.equivalent).count();
    writeln!(
        out,
        "expressions  {}  {good}/{} halt conditions reproduced",
        verdict(good == exprs.len()),
        exprs.len()
    )?;
    for c in exprs.iter().filter(|c| !c.equivalent) {
        writeln!(
            out,
            "  {}: minimized {} reference {}",
            c.policy, c.minimized, c.reference
        )?;
    }
    if good != exprs.len() {
        failures.push("expressions");
    }

    let cells = check_reference_table();
    let good = cells.iter().filter(|c| c.matches()).count();
    writeln!(
        out,
        "event table  {}  {good}/{} cells match",
        verdict(good == cells.len()),
        cells.len()
    )?;
    for c in cells.iter().filter(|c| !c.matches()) {
        writeln!(
            out,
            "  {} {}: computed {} reference {}",
            c.policy,
            c.event.letter(),
            c.computed,
            c.reference
        )?;
    }
    if good != cells.len() {
        failures.push("event table");
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "verification failed: {}",
            failures.join(", ")
        )))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
