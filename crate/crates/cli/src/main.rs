use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prins_core::deadline::Deadline;
use prins_core::evaluation::{kfold_evaluate_with, lds, scalability_run, timing_csv, KFoldConfig};
use prins_core::inference::InferenceConfig;
use prins_core::log_model::{parse_logs, project, write_logs, LogSet};
use prins_core::pipeline::{run_until, PipelineOutput, Strategy, StrategyKind};
use prins_core::synthetic::{generate, GenConfig};
use prins_core::{Error, Exact};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "prins", version, about = "Infer system state machines from component logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer a deterministic system model.
    Infer(InferArgs),
    /// Write the logs of one component.
    Project(ProjectArgs),
    /// Infer and stitch, skipping determinization.
    StitchOnly(InferArgs),
    /// k-fold recall, specificity and balanced accuracy.
    Evaluate(EvaluateArgs),
    /// Stage timings over duplicated inputs.
    Scale(ScaleArgs),
    /// Corpus statistics.
    Stats(IoArgs),
    /// Write a synthetic corpus and its ground-truth machines.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    u: u32,
    #[arg(long, default_value_t = default_workers(), value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    guards: Switch,
    #[arg(long, default_value = "prins", value_parser = parse_strategy)]
    strategy: StrategyKind,
}

impl ModelArgs {
    fn inference(&self) -> InferenceConfig {
        InferenceConfig {
            k: self.k,
            max_workers: self.workers as usize,
            guard_synthesis: self.guards == Switch::On,
        }
    }

    fn strategy(&self, determinize: bool) -> Strategy {
        match self.strategy {
            StrategyKind::Prins => Strategy::Prins { cfg: self.inference(), u: self.u, determinize },
            StrategyKind::Direct => Strategy::direct(self.inference()),
        }
    }
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_seconds)]
    timeout: Option<Duration>,
    /// Also write Graphviz output; replaces the JSON on standard output.
    #[arg(long)]
    dot: bool,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long)]
    component: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate up to `--workers` folds at once.
    #[arg(long)]
    parallel_folds: bool,
}

#[derive(Args, Debug)]
struct ScaleArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    factors: Vec<usize>,
    #[arg(long, value_parser = parse_seconds)]
    timeout: Option<Duration>,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2)]
    components: usize,
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 10)]
    logs: usize,
    #[arg(long, default_value_t = 40)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    extra_edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn default_workers() -> u64 {
    std::thread::available_parallelism().map_or(1, |n| n.get().min(4) as u64)
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seconds(s: &str) -> Result<Duration, String> {
    let secs: f64 = s.parse().map_err(|_| format!("`{s}` is not a number of seconds"))?;
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

fn load(path: &Path) -> Result<LogSet> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let logs = parse_logs(BufReader::new(file)).with_context(|| format!("cannot parse {}", path.display()))?;
    if logs.is_empty() {
        return Err(Error::NoLogs.into());
    }
    Ok(logs)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `model.json` -> `model.json.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn deadline(timeout: Option<Duration>) -> Deadline {
    timeout.map_or(Deadline::NONE, Deadline::after)
}

fn write_model(args: &InferArgs, out: &PipelineOutput) -> Result<()> {
    let output = args.io.output.as_deref();
    match output {
        Some(p) => {
            emit(Some(p), &out.model.to_json()?)?;
            if args.dot {
                emit(Some(&p.with_extension("dot")), &out.model.to_dot())?;
            }
            let mut timings = String::from("stage,seconds\n");
            for (stage, d) in &out.timings {
                timings.push_str(&format!("{stage},{:.6}\n", d.as_secs_f64()));
            }
            emit(Some(&sibling(p, "timings.csv")), &timings)
        }
        None if args.dot => emit(None, &out.model.to_dot()),
        None => emit(None, &(out.model.to_json()? + "\n")),
    }
}

fn infer(args: &InferArgs, determinize: bool) -> Result<()> {
    if !determinize && args.model.strategy == StrategyKind::Direct {
        bail!("stitch-only needs --strategy prins");
    }
    let logs = load(&args.io.input)?;
    let out = run_until(&logs, &args.model.strategy(determinize), deadline(args.timeout))?;
    log::info!(
        "{} states, {} transitions in {:.3}s",
        out.model.state_count(),
        out.model.transitions().len(),
        out.total().as_secs_f64()
    );
    write_model(args, &out)
}

fn project_cmd(args: &ProjectArgs) -> Result<()> {
    let logs = load(&args.io.input)?;
    let projected = project(&logs, &args.component)?;
    let mut buf = Vec::new();
    write_logs(&projected, &mut buf)?;
    emit(args.io.output.as_deref(), &String::from_utf8(buf)?)
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let logs = load(&args.io.input)?;
    let mut cfg = KFoldConfig::new(args.folds as usize, args.seed);
    if args.parallel_folds {
        cfg.fold_workers = args.model.workers as usize;
    }
    let report = kfold_evaluate_with::<Exact>(&logs, &cfg, &args.model.strategy(true))?;
    for f in report.per_fold.iter().filter(|f| f.negative_error.is_some()) {
        log::warn!("fold {}: no negatives ({})", f.fold, f.negative_error.as_deref().unwrap_or_default());
    }
    let json = report.to_json()? + "\n";
    match args.io.output.as_deref() {
        Some(p) => {
            emit(Some(p), &json)?;
            emit(Some(&p.with_extension("csv")), &report.to_csv())
        }
        None => emit(None, &json),
    }
}

fn scale(args: &ScaleArgs) -> Result<()> {
    let logs = load(&args.io.input)?;
    let strategies = [
        Strategy::prins(args.model.inference(), args.model.u),
        Strategy::direct(args.model.inference()),
    ];
    let rows = scalability_run(&logs, &args.factors, &strategies, args.timeout, args.repeat)?;
    emit(args.io.output.as_deref(), &timing_csv(&rows))
}

fn stats(args: &IoArgs) -> Result<()> {
    let logs = load(&args.input)?;
    let mut per_component: BTreeMap<&str, usize> = BTreeMap::new();
    for e in logs.iter().flat_map(|l| &l.entries) {
        *per_component.entry(e.component.as_str()).or_default() += 1;
    }
    let diversity = match lds::<Exact>(&logs) {
        Ok(r) => json!({ "exact": r.to_string(), "value": prins_core::Scalar::to_f64(&r) }),
        Err(_) => serde_json::Value::Null,
    };
    let report = json!({
        "logs": logs.len(),
        "entries": logs.entry_count(),
        "components": logs.components().len(),
        "entries_per_component": per_component,
        "lds": diversity,
    });
    emit(args.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn gen(args: &GenArgs) -> Result<()> {
    let corpus = generate(&GenConfig {
        components: args.components,
        states: args.states,
        logs: args.logs,
        max_len: args.max_len,
        extra_edges: args.extra_edges,
        seed: args.seed,
    })?;
    let mut buf = Vec::new();
    write_logs(&corpus.logs, &mut buf)?;
    emit(Some(&args.output), &String::from_utf8(buf)?)?;
    emit(Some(&sibling(&args.output, "truth.json")), &(corpus.truth_json()? + "\n"))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Infer(a) => infer(a, true),
        Command::StitchOnly(a) => infer(a, false),
        Command::Project(a) => project_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Scale(a) => scale(a),
        Command::Stats(a) => stats(a),
        Command::Gen(a) => gen(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
