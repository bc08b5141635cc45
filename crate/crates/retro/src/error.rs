use std::path::{Path, PathBuf};

use retro_core::discovery::DiscoveryError;
use retro_core::manifest::{ManifestError, MapViolation};
use retro_core::metrics::MetricsError;
use retro_core::perception::PerceptionError;
use retro_core::predictions::PredictionError;
use retro_core::synthesis::SynthesisError;
use retro_core::tensor::TensorError;
use thiserror::Error;

use crate::rten::RtenError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}{}: {message}", .path.display(), line_suffix(*.line))]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Rten(#[from] RtenError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("class transform map is invalid: {}", join(.0))]
    InvalidMap(Vec<MapViolation>),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// `summary` is the command's normal output, still worth printing.
    #[error("{failed} of {total} item(s) failed")]
    ItemsFailed {
        failed: usize,
        total: usize,
        summary: String,
    },
}

fn join(violations: &[MapViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(":{l}")).unwrap_or_default()
}

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ITEMS_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const INVALID_DATA: i32 = 5;
    pub const INCOMPLETE_LOG: i32 = 6;
    pub const UNDEFINED: i32 = 7;
    pub const CONFIG: i32 = 8;
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: Option<usize>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => exit::IO,
            Error::Parse { .. } | Error::Rten(_) | Error::Prediction(_) => exit::PARSE,
            Error::Tensor(_) | Error::Manifest(_) | Error::Perception(_) | Error::InvalidMap(_) => {
                exit::INVALID_DATA
            }
            Error::Discovery(e) => match e {
                DiscoveryError::IncompleteLog { .. } => exit::INCOMPLETE_LOG,
                DiscoveryError::UndefinedRecall(_) => exit::UNDEFINED,
                DiscoveryError::InvalidThreshold { .. } | DiscoveryError::EmptyGrid => exit::CONFIG,
                _ => exit::INVALID_DATA,
            },
            Error::Synthesis(e) => match e {
                SynthesisError::NoEquivariantPairs => exit::UNDEFINED,
                SynthesisError::InvalidProbability(_)
                | SynthesisError::TransformMismatch { .. } => exit::CONFIG,
                _ => exit::INVALID_DATA,
            },
            Error::Metrics(e) => match e {
                MetricsError::EmptySelection => exit::UNDEFINED,
                MetricsError::ZeroK | MetricsError::MissingMap => exit::CONFIG,
                _ => exit::INVALID_DATA,
            },
            Error::Config(_) => exit::CONFIG,
            Error::ItemsFailed { .. } => exit::ITEMS_FAILED,
        }
    }
}
