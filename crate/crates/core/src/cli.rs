//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::experts::{generate_dataset, ExpertConfig, ExpertController};
use crate::io::{
    curve_svg, decode_header, read_checkpoint, read_curve, read_dataset, trajectory_svg, write_checkpoint, write_curve,
    write_dataset, write_metrics, RunConfig,
};
use crate::rollout::rollout;
use crate::rollout::PolicyController;
use crate::trainer::{evaluate, evaluate_controller, train, EVAL_EPOCH};
use crate::perception::NoiseStream;

#[derive(Debug, Parser)]
#[command(name = "swarmcl", version, about = "Curriculum imitation learning for multi-robot policies")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an expert dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy; writes checkpoints and curve.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate closed-loop on a test set; writes per-trajectory metrics.
    Eval(EvalArgs),
    /// Render an SVG figure.
    Plot(PlotArgs),
    /// Print dataset header fields.
    Inspect {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "expert_replay")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise seed for evaluation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate the analytical expert instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub expert_replay: bool,
    /// Run configuration supplying expert gains for `--expert-replay`.
    #[arg(long, requires = "expert_replay")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Learning curves (`curve.csv`); repeat to overlay.
    #[arg(long, conflicts_with = "traj")]
    pub curve: Vec<PathBuf>,
    /// Plot one dataset trajectory, optionally with a policy rollout.
    #[arg(long)]
    pub traj: bool,
    #[arg(long, requires = "traj")]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "traj")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Files created by a command, removed again if it fails.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dir: Option<PathBuf>,
}

impl Outputs {
    fn track(&mut self, path: &Path) -> PathBuf {
        self.files.push(path.to_owned());
        path.to_owned()
    }

    fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if let Some(d) = &self.dir {
            let _ = fs::remove_dir(d);
        }
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_command(command: Command, outputs: &mut Outputs) -> anyhow::Result<()> {
    match command {
        Command::Generate { config, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let dataset = generate_dataset(&cfg.generation())?;
            write_dataset(&dataset, &outputs.track(&out))?;
        }
        Command::Train { config, data, out_dir } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let dataset = read_dataset::<f64>(&data).with_context(|| format!("reading {}", data.display()))?;
            if cfg.task != dataset.task() {
                bail!("config task {} does not match dataset task {}", cfg.task.name(), dataset.task().name());
            }
            if !out_dir.exists() {
                fs::create_dir_all(&out_dir)?;
                outputs.dir = Some(out_dir.clone());
            }
            let result = train(&dataset, &cfg.training())?;
            for ckpt in &result.checkpoints {
                let path = outputs.track(&out_dir.join(format!("ckpt_{:06}.swck", ckpt.step)));
                write_checkpoint(ckpt, &path)?;
            }
            write_checkpoint(result.last(), &outputs.track(&out_dir.join("final.swck")))?;
            let curve = outputs.track(&out_dir.join("curve.csv"));
            write_curve(&result.curve, fs::File::create(&curve)?)?;
        }
        Command::Eval(args) => {
            let testset = read_dataset::<f64>(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
            let report = if args.expert_replay {
                let expert = match &args.config {
                    Some(p) => RunConfig::load(p)?.expert,
                    None => ExpertConfig::default(),
                };
                evaluate_controller(&ExpertController { config: expert }, &testset, 0.0)?
            } else {
                let path = args.checkpoint.expect("required by clap");
                let ckpt = read_checkpoint::<f64>(&path).with_context(|| format!("reading {}", path.display()))?;
                evaluate(&ckpt, &testset, args.sigma, args.seed)?
            };
            let out = outputs.track(&args.out);
            write_metrics(&report, fs::File::create(&out)?)?;
        }
        Command::Plot(args) => {
            let svg = if args.traj {
                let data = args.data.context("--traj needs --data")?;
                let dataset = read_dataset::<f64>(&data)?;
                let expert = dataset
                    .trajectories()
                    .get(args.index)
                    .with_context(|| format!("dataset has {} trajectories", dataset.len()))?;
                let predicted = match &args.checkpoint {
                    Some(p) => {
                        let ckpt = read_checkpoint::<f64>(p)?;
                        let controller = PolicyController {
                            params: &ckpt.params,
                            sigma: args.sigma,
                            stream: NoiseStream::new(0),
                        };
                        Some(rollout(&controller, &expert.samples[0], expert.horizon(), &expert.world, EVAL_EPOCH, args.index as u64)?)
                    }
                    None => None,
                };
                trajectory_svg(expert, predicted.as_ref())
            } else {
                if args.curve.is_empty() {
                    bail!("plot needs --curve <file> or --traj");
                }
                let curves = args
                    .curve
                    .iter()
                    .map(|p| Ok((p.display().to_string(), read_curve(p)?)))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                curve_svg(&curves)
            };
            write_text(&outputs.track(&args.out), &svg)?;
        }
        Command::Inspect { data } => {
            let bytes = fs::read(&data).with_context(|| format!("reading {}", data.display()))?;
            println!("{}", decode_header(&bytes)?);
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return std::process::ExitCode::FAILURE;
        }
    }
    let mut outputs = Outputs::default();
    match run_command(cli.command, &mut outputs) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            outputs.discard();
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
