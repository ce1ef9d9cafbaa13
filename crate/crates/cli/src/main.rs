use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fastft::dataset::{load_csv, synth, Task};
use fastft::engine::{
    export_outputs, read_report, run, run_baseline_erg, run_baseline_rfg, write_feature_csv, RunConfig, RunOutcome,
};
use fastft::transform::{apply_sequence, parse_sequence};
use fastft::Error;

#[derive(Parser)]
#[command(name = "fastft", version, about = "Reinforcement-learned feature transformation for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a feature transformation sequence.
    Run(RunArgs),
    /// Run a random (rfg) or exhaustive (erg) generation baseline.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Re-apply a saved sequence to a dataset.
    Replay {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long, default_value = "classification")]
        task: Task,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the report of a finished run.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Write a synthetic benchmark dataset as CSV.
    Synth {
        #[arg(long, value_enum, default_value = "classification")]
        kind: SynthKind,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Rfg,
    Erg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Classification,
    Regression,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long)]
    task: Option<Task>,
    /// key=value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "cold-start")]
    cold_start: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "eps-start")]
    eps_start: Option<f64>,
    #[arg(long = "eps-end")]
    eps_end: Option<f64>,
    #[arg(long)]
    decay: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> fastft::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_kv_file(path)?;
        }
        let c = &mut cfg;
        self.episodes.map(|v| c.episodes = v);
        self.steps.map(|v| c.steps_per_episode = v);
        self.cold_start.map(|v| c.cold_start_episodes = v);
        self.alpha.map(|v| c.gate.alpha = v);
        self.beta.map(|v| c.gate.beta = v);
        self.eps_start.map(|v| c.reward.eps_start = v);
        self.eps_end.map(|v| c.reward.eps_end = v);
        self.decay.map(|v| c.reward.decay = v);
        self.gamma.map(|v| c.reward.gamma = v);
        self.buffer.map(|v| c.buffer_capacity = v);
        self.seed.map(|v| c.seed = v);
        if let Some(t) = self.task {
            c.task = Some(t);
        }
        if let Some(o) = &self.out {
            c.output_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(args: &RunArgs, runner: fn(&RunConfig, &fastft::dataset::Dataset) -> fastft::Result<RunOutcome>) -> fastft::Result<()> {
    let cfg = args.config()?;
    let task = cfg.task.ok_or_else(|| Error::Config("--task is required (or task= in --config)".into()))?;
    let dataset = load_csv(&args.data, &args.label, task)?;
    let outcome = runner(&cfg, &dataset)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("fastft-output"));
    export_outputs(&outcome, &dataset, &dir)?;
    let r = &outcome.report;
    println!("metric            {}", r.metric);
    println!("baseline score    {:.6}", r.baseline_score);
    println!("best score        {:.6}", r.best_score);
    println!("evaluated steps   {}/{}", r.evaluated_steps, r.total_steps);
    println!("best sequence     {}", r.best_sequence);
    println!("outputs           {}", dir.display());
    Ok(())
}

fn replay(sequence: &Path, data: &Path, label: &str, task: Task, out: &Path) -> fastft::Result<()> {
    let text = std::fs::read_to_string(sequence).map_err(|e| Error::Data(format!("{}: {e}", sequence.display())))?;
    let seq = parse_sequence(&text)?;
    let dataset = load_csv(data, label, task)?;
    let features = apply_sequence(&seq, &dataset)?;
    write_feature_csv(&features, &dataset, out)?;
    println!("wrote {} features to {}", features.n_features(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> fastft::Result<()> {
    match cli.command {
        Command::Run(args) => execute(&args, run),
        Command::Baseline { kind, args } => match kind {
            BaselineKind::Rfg => execute(&args, run_baseline_rfg),
            BaselineKind::Erg => execute(&args, run_baseline_erg),
        },
        Command::Replay { sequence, data, label, task, out } => replay(&sequence, &data, &label, task, &out),
        Command::Report { dir } => {
            let report = read_report(&dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Synth { kind, n, seed, out } => {
            let ds = match kind {
                SynthKind::Classification => synth::synth_c(n, seed),
                SynthKind::Regression => synth::synth_r(n, seed),
            };
            std::fs::write(&out, synth::to_csv(&ds)).map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
            println!("wrote {} rows to {}", n, out.display());
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
