//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! backend, file or pipeline step fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use segbench_core::bench::refilter;
use segbench_core::filtering::LexiconEmbedder;
use segbench_core::scenes::PrototypeSegmenter;

use crate::checkpoint::{load_toy, save_toy};
use crate::config::RunConfig;
use crate::dataset::{generate, load_dataset, save_scene};
use crate::pipeline::{self, DenoiserBackend};
use crate::store::{load_benchmark, save_benchmark};

#[derive(Debug, Parser)]
#[command(
    name = "segbench",
    version,
    about = "Build and evaluate attribute-edited segmentation benchmarks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (JSON). Required.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Denoiser backend.
    #[arg(long, global = true, value_enum, value_name = "NAME")]
    pub backend: Option<Backend>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// Trained toy denoiser loaded from a checkpoint.
    Toy,
    /// Untrained near-identity linear denoiser.
    Linear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic scene generation.
    Scenes {
        #[command(subcommand)]
        command: ScenesCommand,
    },
    /// Denoiser training.
    Denoiser {
        #[command(subcommand)]
        command: DenoiserCommand,
    },
    /// Benchmark construction and evaluation.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenesCommand {
    /// Render scenes with labels and caption sidecars (default out: data).
    Gen {
        /// Number of scenes; defaults to the configured count.
        #[arg(long)]
        count: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DenoiserCommand {
    /// Train the toy denoiser and write `<out>/denoiser.ckpt` (default out: checkpoints).
    Train {
        #[arg(long, value_name = "DIR", default_value = "data")]
        data: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Build a benchmark into `<out>/<name>` (default out: bench).
    Build {
        #[arg(long, value_name = "DIR", default_value = "data")]
        data: PathBuf,
        /// Toy denoiser checkpoint.
        #[arg(long, value_name = "PATH", default_value = "checkpoints/denoiser.ckpt")]
        checkpoint: PathBuf,
    },
    /// Rerun the filters with the configured thresholds and rewrite the benchmark.
    Filter {
        #[arg(long, value_name = "DIR")]
        bench: Option<PathBuf>,
        /// Source scenes the benchmark was built from.
        #[arg(long, value_name = "DIR", default_value = "data")]
        data: PathBuf,
    },
    /// Evaluate the prototype segmenter; writes report.json and report.md.
    Eval {
        #[arg(long, value_name = "DIR")]
        bench: Option<PathBuf>,
    },
    /// Write a per-subset summary (summary.md).
    Report {
        #[arg(long, value_name = "DIR")]
        bench: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Run(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Run(_) => 2,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".to_string()))?;
    let mut config = RunConfig::load(path)
        .map_err(|e| CliError::Config(e.context(format!("config {}", path.display()))))?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(global: &GlobalArgs, default: &str) -> PathBuf {
    global.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn bench_dir(arg: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    arg.clone()
        .unwrap_or_else(|| Path::new("bench").join(&config.build.name))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(&cli.global)?;
    let g = &cli.global;
    match &cli.command {
        Command::Scenes {
            command: ScenesCommand::Gen { count },
        } => {
            let out = out_dir(g, "data");
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let scenes = generate(&config.world, count.unwrap_or(config.scenes), config.seed)?;
            for (scene, meta) in &scenes {
                save_scene(&out, scene, meta)?;
            }
            log::info!("wrote {} scenes to {}", scenes.len(), out.display());
        }
        Command::Denoiser {
            command: DenoiserCommand::Train { data },
        } => {
            if g.backend == Some(Backend::Linear) {
                return Err(CliError::Usage(
                    "the linear backend has no trainable parameters".to_string(),
                ));
            }
            let dataset = load_dataset(data)?;
            if dataset.is_empty() {
                return Err(anyhow!("no scenes in {}", data.display()).into());
            }
            let (denoiser, vocab, schedule, report) =
                pipeline::train(&config, &dataset, config.seed)?;
            let path = out_dir(g, "checkpoints").join("denoiser.ckpt");
            save_toy(&path, &denoiser, &vocab, &schedule)?;
            let tail = &report.losses[report.losses.len().saturating_sub(20)..];
            let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
            log::info!(
                "trained {} steps (final loss {mean:.4}); wrote {}",
                report.losses.len(),
                path.display()
            );
        }
        Command::Bench { command } => bench(command, g, &config)?,
    }
    Ok(())
}

fn bench(command: &BenchCommand, g: &GlobalArgs, config: &RunConfig) -> Result<(), CliError> {
    match command {
        BenchCommand::Build { data, checkpoint } => {
            let dataset = load_dataset(data)?;
            let sources: Vec<_> = dataset.into_iter().map(|(s, _)| s).collect();
            let (backend, vocab, schedule) = match g.backend.unwrap_or(Backend::Toy) {
                Backend::Toy => {
                    let (d, vocab, schedule) = load_toy(checkpoint)?;
                    if schedule.steps() != config.diffusion_steps
                        || schedule.kind != config.schedule
                    {
                        bail_config(format!(
                            "checkpoint schedule ({:?}, {} steps) differs from the config",
                            schedule.kind,
                            schedule.steps()
                        ))?;
                    }
                    (DenoiserBackend::Toy(d), vocab, schedule)
                }
                Backend::Linear => (
                    DenoiserBackend::linear(config, config.seed),
                    pipeline::world_vocabulary(config),
                    pipeline::schedule(config).map_err(CliError::Config)?,
                ),
            };
            let bench = pipeline::build(
                config,
                &sources,
                backend.as_denoiser(),
                &vocab,
                &schedule,
                config.seed,
            )?;
            let (dir, hash) = save_benchmark(&out_dir(g, "bench"), &bench)?;
            println!("{} {hash}", dir.display());
        }
        BenchCommand::Filter { bench, data } => {
            let dir = bench_dir(bench, config);
            let mut set = load_benchmark(&dir)?;
            let real: Vec<_> = load_dataset(data)?
                .into_iter()
                .map(|(s, _)| (s.image, s.label))
                .collect();
            let surrogate = PrototypeSegmenter::fit(&real, config.surrogate_temperature)
                .map_err(anyhow::Error::from)?;
            let embedder = LexiconEmbedder::for_world(
                &config.world,
                config.embedder.dim,
                config.embedder.seed,
            )
            .map_err(anyhow::Error::from)?;
            refilter(
                &mut set,
                &real,
                &embedder,
                &surrogate,
                &config.build.thresholds,
            )
            .map_err(anyhow::Error::from)?;
            let root = g
                .out
                .clone()
                .unwrap_or_else(|| dir.parent().map(Path::to_path_buf).unwrap_or_default());
            let (dir, hash) = save_benchmark(&root, &set)?;
            println!("{} {hash}", dir.display());
        }
        BenchCommand::Eval { bench } => {
            let dir = bench_dir(bench, config);
            let set = load_benchmark(&dir)?;
            let reports = pipeline::evaluate(config, &set)?;
            let out = g.out.clone().unwrap_or_else(|| dir.clone());
            pipeline::write_reports(&out, &reports, &set.info.class_names)?;
            for r in &reports {
                println!(
                    "{} {}: rmIoU {:.2} mR {:.2}",
                    r.benchmark, r.baseline, r.rmiou, r.mr
                );
            }
        }
        BenchCommand::Report { bench } => {
            let dir = bench_dir(bench, config);
            let set = load_benchmark(&dir)?;
            let md = pipeline::summary_markdown(&set);
            let out = g.out.clone().unwrap_or_else(|| dir.clone());
            std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
            std::fs::write(out.join("summary.md"), &md).map_err(anyhow::Error::from)?;
            print!("{md}");
        }
    }
    Ok(())
}

fn bail_config(msg: String) -> Result<(), CliError> {
    Err(CliError::Config(anyhow!(msg)))
}
