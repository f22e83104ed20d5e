//! `critp`: train with live critical-period detection, sweep switch epochs
//! from checkpoints, replay detection over a trace, and compare runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use critical_periods::cost::{EmissionAssumptions, Price};
use critical_periods::detector::DetectorConfig;
use critical_periods::engine::OptimizerKind;
use critical_periods::harness::{
    cmd_detect, cmd_report, oracle_sweep, render_report, train, write_oracle_csv, Experiment,
    RunConfig, LOG_FILE,
};
use critical_periods::rotation::RotationTrace;
use critical_periods::schedule::ScheduleMode;

#[derive(Parser, Debug)]
#[command(name = "critp", version, about = "Critical-period detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run, detecting the critical epoch as it goes.
    Train(TrainArgs),
    /// Resume a checkpointed baseline at each candidate epoch with `k_post`.
    OracleSweep(SweepArgs),
    /// Replay the detector over a trace CSV and print the fired epoch.
    Detect(DetectArgs),
    /// Compare a run log against a baseline log.
    Report(ReportArgs),
}

/// Command-line overrides for fields of the TOML config.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// static-baseline | reduce-at-critical | prune-anneal
    #[arg(long)]
    mode: Option<ScheduleMode>,
    #[arg(long)]
    k_pre: Option<f64>,
    #[arg(long)]
    k_post: Option<f64>,
    #[arg(long)]
    k_prune: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// sgd | adamw | rmsprop | adagrad
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed_init: Option<u64>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_augment: Option<u64>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.mode {
            c.schedule.mode = v;
        }
        if let Some(v) = self.k_pre {
            c.schedule.k_pre = v;
        }
        if let Some(v) = self.k_post {
            c.schedule.k_post = v;
        }
        if let Some(v) = self.k_prune {
            c.schedule.k_prune = v;
        }
        if let Some(v) = self.delta {
            c.schedule.delta = v;
        }
        if let Some(v) = self.optimizer {
            c.optimizer.kind = v;
        }
        if let Some(v) = self.learning_rate {
            c.optimizer.learning_rate = v;
        }
        if let Some(v) = self.seed_init {
            c.seeds.init = v;
        }
        if let Some(v) = self.seed_data {
            c.seeds.data = v;
        }
        if let Some(v) = self.seed_augment {
            c.seeds.augment = v;
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Write a checkpoint at the start of every epoch.
    #[arg(long)]
    checkpoints: bool,
    /// Fix the switch epoch instead of detecting it.
    #[arg(long)]
    switch_at: Option<usize>,
    /// Baseline log to report against once training finishes.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Config of the checkpointed baseline run.
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the baseline's per-epoch checkpoints.
    #[arg(long)]
    checkpoints: PathBuf,
    /// Comma-separated switch epochs; every epoch 0..N when omitted.
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "oracle.csv")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Planned run length N; defaults to the number of trace rows.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 45.0)]
    threshold: f64,
    #[arg(long)]
    epoch_scale: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    distance_scale: f64,
    /// Fire on the first shallow window even if no steep one came before.
    #[arg(long)]
    no_arm: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    /// Output directory; defaults to the run log's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    emissions: EmissionArgs,
}

#[derive(Args, Debug)]
struct EmissionArgs {
    #[arg(long)]
    power_watts: Option<f64>,
    #[arg(long)]
    carbon_kg_per_kwh: Option<f64>,
    #[arg(long, conflicts_with = "price_per_hour")]
    price_per_kwh: Option<f64>,
    #[arg(long)]
    price_per_hour: Option<f64>,
}

impl EmissionArgs {
    fn resolve(&self, mut a: EmissionAssumptions) -> EmissionAssumptions {
        if let Some(v) = self.power_watts {
            a.power_watts = v;
        }
        if let Some(v) = self.carbon_kg_per_kwh {
            a.carbon_kg_per_kwh = v;
        }
        if let Some(v) = self.price_per_kwh {
            a.price = Price::PerKwh(v);
        }
        if let Some(v) = self.price_per_hour {
            a.price = Price::PerHour(v);
        }
        a
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut config =
        RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    overrides.apply(&mut config);
    Ok(config)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut config = load_config(&args.config, &args.overrides)?;
    if let Some(dir) = args.output_dir {
        config.output_dir = Some(dir);
    }
    if args.checkpoints {
        config.checkpoints = true;
    }
    if args.switch_at.is_some() {
        config.switch_at = args.switch_at;
    }
    if args.baseline.is_some() && config.output_dir.is_none() {
        bail!("--baseline needs an output directory for the run log");
    }
    let emissions = config.emissions;
    let out_dir = config.output_dir.clone();
    let exp = Experiment::prepare(config)?;
    let outcome = train(&exp)?;
    let summary = outcome.log.summary.as_ref().expect("completed run");
    println!("mode            {}", exp.config.schedule.mode);
    match (&outcome.log.detection, summary.critical_epoch) {
        (Some(d), Some(i)) => println!("detected epoch  {}\nswitch epoch    {i}", d.epoch),
        (None, Some(i)) => println!("switch epoch    {i}"),
        _ => println!("detected epoch  none"),
    }
    println!("final accuracy  {:.4}", summary.final_accuracy);
    println!("total samples   {}", summary.total_samples);
    println!("wall seconds    {:.2}", summary.wall_seconds);
    if let (Some(baseline), Some(dir)) = (args.baseline, out_dir) {
        let report = cmd_report(&dir.join(LOG_FILE), &baseline, &emissions, &dir)?;
        print!("{}", render_report(&report));
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let config = load_config(&args.config, &args.overrides)?;
    let epochs = config.epochs;
    let exp = Experiment::prepare(config)?;
    let candidates = if args.candidates.is_empty() {
        (0..epochs).collect()
    } else {
        args.candidates
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let entries = oracle_sweep(&exp, &args.checkpoints, &candidates, workers)?;
    write_oracle_csv(&entries, &args.out)?;
    println!("switch  accuracy  cost    extra");
    for e in &entries {
        println!(
            "{:>6}  {:.4}    {:.4}  {:.4}",
            e.switch_epoch, e.final_accuracy, e.normalized_cost, e.extra_cost
        );
    }
    Ok(())
}

fn run_detect(args: DetectArgs) -> Result<()> {
    let total_epochs = match args.epochs {
        Some(n) => n,
        None => RotationTrace::load_csv(&args.trace)?.len(),
    };
    let config = DetectorConfig {
        window: args.window,
        threshold_degrees: args.threshold,
        total_epochs,
        epoch_scale: args.epoch_scale,
        distance_scale: args.distance_scale,
        arm_before_fire: !args.no_arm,
    };
    match cmd_detect(&args.trace, &config)? {
        Some(i) => println!("{i}"),
        None => println!("none"),
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<()> {
    let out = match args.out {
        Some(dir) => dir,
        None => args
            .run
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let assumptions = args.emissions.resolve(EmissionAssumptions::default());
    let report = cmd_report(&args.run, &args.baseline, &assumptions, &out)?;
    print!("{}", render_report(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::OracleSweep(a) => run_sweep(a),
        Command::Detect(a) => run_detect(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
