use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nuelab_cli::{exit_code, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "nuelab", version, about = "Experiments on randomly perturbed non-uniformly expanding maps")]
struct Cli {
    /// TOML or JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate one random orbit with derivative data.
    Orbit,
    /// Constructive (Pliss) hyperbolic times on sampled orbits.
    Pliss,
    /// Direct vs constructive hyperbolic times.
    Hyp,
    /// Tail curve of the expansion/recurrence times and decay fits.
    Tails,
    /// Induced Gibbs-Markov map of a circle map.
    Induce,
    /// Stationary density (Ulam and/or empirical).
    Density,
    /// Stochastic-stability sweep over noise levels.
    Stability,
    /// Finite-time Lyapunov spectra.
    Lyapunov,
    /// Conservation and structural checks of a catalog map.
    VerifyMap,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Orbit => "orbit",
            Command::Pliss => "pliss",
            Command::Hyp => "hyp",
            Command::Tails => "tails",
            Command::Induce => "induce",
            Command::Density => "density",
            Command::Stability => "stability",
            Command::Lyapunov => "lyapunov",
            Command::VerifyMap => "verify-map",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = (|| {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.select(cli.command.kind())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(w) = cli.workers {
            cfg.workers = w;
        }
        if let Some(o) = &cli.out {
            cfg.out = o.clone();
        }
        Ok::<_, nuelab_cli::CliError>(cfg)
    })();
    let result = cfg.and_then(|cfg| run(&cfg));
    match result {
        Ok(m) => {
            if let Some(e) = &m.error {
                log::error!("{e}");
            }
            ExitCode::from(exit_code(&m) as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
