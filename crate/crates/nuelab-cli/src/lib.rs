//! Config-driven experiment runner: one TOML (or JSON) file drives one experiment, whose outputs
//! land atomically in an output directory together with a checksummed `manifest.json`.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;

use std::time::Instant;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig};
pub use output::{RunManifest, RunStatus};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Pipeline(_) | CliError::Io(_) => 3,
        }
    }
}

/// Exit code of a run that produced a manifest.
pub fn exit_code(m: &RunManifest) -> i32 {
    match m.status {
        RunStatus::Ok => 0,
        RunStatus::PipelineError => 3,
        RunStatus::VerificationFailed => 4,
    }
}

/// Runs the selected experiment. Pipeline failures and failed verifications still produce a
/// manifest (with whatever outputs were written); only config and I/O errors return `Err`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let map = cfg.map.build().map_err(|e| CliError::Config { path: "map".into(), message: e.to_string() })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config { path: "workers".into(), message: e.to_string() })?;
    let mut out = output::RunOutput::create(&cfg.out)?;
    let start = Instant::now();
    let result = pool.install(|| experiments::dispatch(cfg, map.as_ref(), &mut out));
    let (status, error) = match result {
        Ok(experiments::Verdict::Pass) => (RunStatus::Ok, None),
        Ok(experiments::Verdict::Fail(m)) => (RunStatus::VerificationFailed, Some(m)),
        Err(e @ CliError::Config { .. }) => return Err(e),
        Err(e) => (RunStatus::PipelineError, Some(e.to_string())),
    };
    log::info!("{} finished in {:.2}s: {:?}", cfg.experiment.as_ref().map_or("?", |e| e.kind()), start.elapsed().as_secs_f64(), status);
    out.finish(cfg, status, error, start.elapsed().as_secs_f64())
}
