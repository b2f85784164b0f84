use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    PipelineError,
    VerificationFailed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Every numerically resolved constant the run consumed, by registry name.
    pub constants: BTreeMap<String, f64>,
    /// Experiment-specific summary (pass/fail details, counts).
    pub summary: serde_json::Value,
    pub wall_time_s: f64,
    pub files: Vec<OutputFile>,
}

/// Writes `bytes` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Output directory of one run: every file is written atomically and checksummed.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<OutputFile>,
    pub constants: BTreeMap<String, f64>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<RunOutput, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(RunOutput { dir: dir.to_path_buf(), files: Vec::new(), constants: BTreeMap::new(), summary: Default::default() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir, name, bytes).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.files.retain(|f| f.name != name);
        self.files.push(OutputFile { name: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: Csv) -> Result<(), CliError> {
        let bytes = csv.finish()?;
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summaries serialize"));
    }

    pub fn finish(
        self,
        config: &ExperimentConfig,
        status: RunStatus,
        error: Option<String>,
        wall_time_s: f64,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            config: config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status,
            error,
            constants: self.constants,
            summary: serde_json::Value::Object(self.summary),
            wall_time_s,
            files: self.files,
        };
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        write_atomic(&self.dir, "manifest.json", s.as_bytes()).map_err(|e| CliError::Io(format!("manifest.json: {e}")))?;
        Ok(manifest)
    }
}

/// In-memory CSV with `,` delimiter, header row and LF endings.
pub struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header).expect("writing to memory");
        Csv(w)
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.0.write_record(fields).expect("writing to memory");
    }

    pub fn finish(self) -> Result<Vec<u8>, CliError> {
        self.0.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// `Some(v)` as its shortest round-trip decimal, `None` as an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
