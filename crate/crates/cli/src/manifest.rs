use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Emfac,
    /// Scripted breach-point chaser.
    Rule,
    /// Independent actor-critic.
    Iac,
    /// Plain raw-action mean field.
    Mf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandSpec {
    NashVerify,
    Surface,
    Train { algo: Algo, resume: Option<PathBuf> },
    Eval { algo: Algo, checkpoint: Option<PathBuf>, episodes: usize, trace: bool },
    Ablate,
}

impl CommandSpec {
    pub fn label(&self) -> &'static str {
        match self {
            CommandSpec::NashVerify => "nash-verify",
            CommandSpec::Surface => "surface",
            CommandSpec::Train { .. } => "train",
            CommandSpec::Eval { .. } => "eval",
            CommandSpec::Ablate => "ablate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed { exit_code: i32, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandSpec,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: Option<f64>,
    pub status: RunStatus,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
}

pub fn code_version() -> String {
    match option_env!("PDLAB_BUILD_TAG") {
        Some(tag) => format!("{} ({tag})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn begin(command: CommandSpec, config: RunConfig) -> Self {
        RunManifest {
            command,
            seed: config.train.seed,
            config,
            version: code_version(),
            started: now(),
            finished: None,
            status: RunStatus::Running,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, outcome: &Result<Vec<String>, CliError>) {
        self.finished = Some(now());
        match outcome {
            Ok(outputs) => {
                self.outputs = outputs.clone();
                self.status = RunStatus::Succeeded;
            }
            Err(e) => self.status = RunStatus::Failed { exit_code: e.exit_code(), message: e.to_string() },
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        crate::write_file(&dir.join(MANIFEST_FILE), text)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
