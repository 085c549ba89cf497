//! Text-conditioned molecular graph generation: contrastively aligned text
//! and graph encoders, a one-shot graph VAE, a conditional latent diffusion
//! model with classifier-free guidance, evaluation metrics and the
//! training/generation pipeline.

pub mod encoders;
pub mod evalmetrics;
pub mod genvae;
pub mod latentdiff;
pub mod pipeline;
pub mod training;

pub use chem;
pub use numcore;

use numcore::NumError;
use chem::{ChemError, SmilesError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("empty molecule")]
    EmptyMolecule,
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path} at line {line}, column {column}: {msg}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("checkpoint format version {found} is incompatible with {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("missing prerequisite: {0}")]
    StageOrder(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Stable machine-readable name printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid_input",
            Error::EmptyMolecule => "empty_molecule",
            Error::Num(_) => "numeric",
            Error::Chem(_) => "chemistry",
            Error::Smiles(_) => "smiles",
            Error::Io { .. } => "io",
            Error::Json { .. } => "corrupt_file",
            Error::Version { .. } => "version_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config { .. } => "config",
            Error::StageOrder(_) => "stage_order",
            Error::Dataset(_) => "dataset",
        }
    }

    /// Process exit code for [`Error::category`].
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Json { .. } | Error::Version { .. } | Error::Checkpoint(_) => 4,
            Error::Config { .. } => 5,
            Error::StageOrder(_) => 6,
            Error::Dataset(_) => 7,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
