//! Experiment runner behind the `paylab` binary: configuration, single runs,
//! offline verification, parameter sweeps and the measurements the
//! acceptance suite shares with them.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod fit;
pub mod measure;
pub mod run;
pub mod sweep;
pub mod topo;
pub mod verify;

pub use config::{ExperimentConfig, ProtocolKind, SweepGrid};
pub use run::{execute, write_artifacts, AdversarySpec, RunArtifacts, Summary};
pub use sweep::{run_sweep, SweepOutput};
pub use verify::{verify_dir, VerifyReport};

/// `git describe` of the tree this binary was built from.
pub const BUILD_ID: &str = env!("PAYLAB_BUILD_ID");

#[derive(Debug, Error)]
pub enum PaylabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] simnet::SimError),
    #[error(transparent)]
    Hop(#[from] hopnet::HopError),
    #[error(transparent)]
    Cancel(#[from] cancel::CancelError),
    #[error("{0}")]
    Data(String),
}

impl PaylabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PaylabError::Io { path: path.to_path_buf(), source }
    }

    /// Usage problems exit with 2, everything else with 1.
    pub fn is_usage(&self) -> bool {
        matches!(self, PaylabError::Config(_))
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), PaylabError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PaylabError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| PaylabError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, PaylabError> {
    std::fs::read_to_string(path).map_err(|e| PaylabError::io(path, e))
}
