//! `bench`: command-line front end for the library's harness.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cpnshop::bench::{export_gantt, run_ablation, run_bench, AblationMode, BenchConfig, GanttFormat};
use cpnshop::instances::{bundled, generate_random, load_instance, InstanceFormat};
use cpnshop::petrinet::write_event_log;
use cpnshop::ppo::{evaluate, train_with_progress, Checkpoint, TrainConfig, TrainLog};
use cpnshop::{EnvConfig, Instance, PolicyKind, Schedule};

#[derive(Parser)]
#[command(name = "bench", version, about = "Job-shop benchmarks on the Petri-net environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run policies over instances and print a makespan table.
    Run(RunArgs),
    /// Train a masked PPO agent on one instance.
    Train(TrainArgs),
    /// Train under one ablation mode and write its metrics log.
    Ablate(AblateArgs),
    /// Render a schedule as a Gantt chart.
    Gantt(GanttArgs),
    /// Generate a random instance from generator seeds.
    Gen(GenArgs),
}

#[derive(Args)]
struct EnvArgs {
    /// Job slots (defaults to the instance's job count).
    #[arg(long)]
    capacity: Option<usize>,
    /// Pending operations per job in the observation.
    #[arg(long, default_value_t = 1)]
    depth: usize,
}

impl EnvArgs {
    fn config(&self) -> EnvConfig {
        EnvConfig {
            capacity: self.capacity,
            observation_depth: self.depth,
            ..EnvConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Glob of instance files, or a bundled name (ta01, ta31, ta41).
    #[arg(long)]
    instances: String,
    #[arg(long, default_value = "taillard")]
    format: InstanceFormat,
    /// Policies to run (repeat or comma-separate); defaults to the six rules.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// Checkpoint for the agent policy.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report gaps against this policy's makespan.
    #[arg(long)]
    baseline: Option<PolicyKind>,
    /// Report CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-row schedules and event logs.
    #[arg(long)]
    schedules: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    instance: String,
    #[arg(long, default_value = "taillard")]
    format: InstanceFormat,
    #[arg(long)]
    steps: Option<u64>,
    /// JSON training configuration; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
    /// Output directory for checkpoint.json, metrics.csv and schedule.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    mode: AblationMode,
    #[arg(long)]
    instance: String,
    #[arg(long, default_value = "taillard")]
    format: InstanceFormat,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
    /// Output directory for metrics.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GanttArgs {
    /// Schedule JSON.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    jobs: usize,
    #[arg(long)]
    machines: usize,
    #[arg(long)]
    time_seed: i64,
    #[arg(long)]
    machine_seed: i64,
    #[arg(long, default_value = "taillard")]
    format: InstanceFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_one(spec: &str, format: InstanceFormat) -> anyhow::Result<Instance> {
    if let Some(inst) = bundled::by_name(spec) {
        if !Path::new(spec).exists() {
            return Ok(inst);
        }
    }
    load_instance(spec, format).with_context(|| format!("loading {spec}"))
}

fn load_many(pattern: &str, format: InstanceFormat) -> anyhow::Result<Vec<(String, Instance)>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    if paths.is_empty() {
        return match bundled::by_name(pattern) {
            Some(inst) => Ok(vec![(pattern.to_string(), inst)]),
            None => bail!("no instance matches {pattern:?}"),
        };
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let inst = load_instance(&p, format).with_context(|| format!("loading {}", p.display()))?;
            Ok((instance_name(&p), inst))
        })
        .collect()
}

fn train_config(path: Option<&Path>, steps: Option<u64>) -> anyhow::Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => serde_json::from_reader(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = steps {
        cfg.total_steps = s;
    }
    Ok(cfg)
}

fn write_metrics(log: &TrainLog, dir: &Path) -> anyhow::Result<()> {
    log.write_metrics_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
    Ok(())
}

fn print_progress(row: &cpnshop::ppo::MetricsRow) {
    eprintln!(
        "step {:>8}  ep_len {:>8.1}  ep_rew {:>9.3}  kl {:.4}  entropy {:.3}  vf_loss {:.4}",
        row.step, row.ep_len, row.ep_rew, row.kl, row.entropy, row.vf_loss
    );
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let instances = load_many(&args.instances, args.format)?;
    let policies = if args.policy.is_empty() { PolicyKind::HEURISTICS.to_vec() } else { args.policy };
    let mut env = args.env.config();
    let agent = match &args.checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?;
            // the network fixes the capacity and observation depth
            env.capacity = ck.env.capacity;
            env.observation_depth = ck.env.observation_depth;
            Some(ck.params()?)
        }
        None => None,
    };
    let config = BenchConfig { env, seed: args.seed, agent, baseline: args.baseline };
    let report = run_bench(&instances, &policies, &config);
    print!("{}", report.to_text());
    if let Some(out) = &args.out {
        report.write_csv(BufWriter::new(File::create(out)?))?;
    }
    if let Some(dir) = &args.schedules {
        fs::create_dir_all(dir)?;
        for row in report.rows.iter().filter(|r| r.is_ok()) {
            let stem = format!("{}_{}", row.instance, row.policy.name().to_ascii_lowercase());
            if let Some(s) = &row.schedule {
                s.write_json(BufWriter::new(File::create(dir.join(format!("{stem}.json")))?))?;
            }
            write_event_log(&row.events, BufWriter::new(File::create(dir.join(format!("{stem}.events.jsonl")))?))?;
        }
    }
    Ok(report.all_ok())
}

fn train_cmd(args: TrainArgs) -> anyhow::Result<bool> {
    let instance = load_one(&args.instance, args.format)?;
    let cfg = train_config(args.config.as_deref(), args.steps)?;
    let env = args.env.config().with_capacity(args.env.capacity.unwrap_or(instance.num_jobs()));
    fs::create_dir_all(&args.out)?;
    let (params, log) = train_with_progress(std::slice::from_ref(&instance), &env, &cfg, print_progress)?;
    Checkpoint::new(&params, &env).save(&args.out.join("checkpoint.json"))?;
    write_metrics(&log, &args.out)?;
    let schedule = evaluate(&params, &instance, &env)?;
    schedule.write_json(BufWriter::new(File::create(args.out.join("schedule.json"))?))?;
    println!("greedy makespan {}", schedule.makespan);
    Ok(true)
}

fn ablate(args: AblateArgs) -> anyhow::Result<bool> {
    let instance = load_one(&args.instance, args.format)?;
    let cfg = train_config(args.config.as_deref(), args.steps)?;
    fs::create_dir_all(&args.out)?;
    let (_, log) = run_ablation(&instance, args.mode, &args.env.config(), &cfg)?;
    write_metrics(&log, &args.out)?;
    match log.rows.last() {
        Some(last) if last.ep_len.is_finite() => {
            println!("{}: final mean episode length {:.1}", args.mode, last.ep_len)
        }
        _ => println!("{}: no episode finished within the budget", args.mode),
    }
    Ok(true)
}

fn gantt(args: GanttArgs) -> anyhow::Result<bool> {
    let schedule = Schedule::read_json(File::open(&args.schedule).with_context(|| format!("opening {}", args.schedule.display()))?)?;
    let targets = [(args.svg, GanttFormat::Svg), (args.csv, GanttFormat::Csv), (args.json, GanttFormat::Json)];
    if targets.iter().all(|(p, _)| p.is_none()) {
        bail!("give at least one of --svg, --csv, --json");
    }
    for (path, format) in targets {
        if let Some(p) = path {
            export_gantt(&schedule, &p, format)?;
        }
    }
    Ok(true)
}

fn gen(args: GenArgs) -> anyhow::Result<bool> {
    let inst = generate_random(args.jobs, args.machines, args.time_seed, args.machine_seed)?;
    let text = match args.format {
        InstanceFormat::Taillard => inst.to_taillard()?,
        InstanceFormat::Orlib => inst.to_orlib(),
    };
    match &args.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    if inst == bundled::ta01() {
        eprintln!("note: these seeds regenerate ta01; a \"random 15x15\" row built from them is that single instance");
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Train(a) => train_cmd(a),
        Command::Ablate(a) => ablate(a),
        Command::Gantt(a) => gantt(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
