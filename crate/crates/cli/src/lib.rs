//! Library side of the `pdlab` binary. Every subcommand runs through [`run`], which writes a
//! [`RunManifest`] into the output directory before starting and finalizes it afterwards.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{execute, rerun, run};
pub use config::{RunConfig, SurfaceConfig};
pub use manifest::{Algo, CommandSpec, RunManifest, RunStatus, MANIFEST_FILE};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_CHECK: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
    /// A run finished but a built-in check on its output failed.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Divergence { .. } => EXIT_DIVERGENCE,
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<pdlab_core::emfac::EmfacError> for CliError {
    fn from(e: pdlab_core::emfac::EmfacError) -> Self {
        use pdlab_core::emfac::EmfacError as E;
        match e {
            E::Divergence { step, detail } => CliError::Divergence { step, detail },
            E::Io(e) => CliError::Io(e.to_string()),
            E::Neural(pdlab_core::neural::NeuralError::Checkpoint(m)) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<pdlab_core::geometry::GeometryError> for CliError {
    fn from(e: pdlab_core::geometry::GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Directory holding a run's files when `path` names either the directory or a file in it.
pub(crate) fn run_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}
