//! Experiment pipelines on top of `mvsde-core`: drift generation, density
//! comparison and the convergence-rate sweep. Each pipeline finishes all
//! computation before it writes a single file, so artifacts depend only on
//! the resolved configuration.

pub mod pipeline;
pub mod scenario;

use std::path::PathBuf;

pub use pipeline::{
    density_compare, drift_gen, halving_check, rate_sweep, DensityCompare, DriftGen, HalvingCheck,
    KsRow, RateSweep, RunRate, SweepSummary,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(mvsde_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(mvsde_core::Error),
    #[error("quality gate failed: {0}")]
    Gate(String),
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<mvsde_core::Error> for PipelineError {
    fn from(e: mvsde_core::Error) -> Self {
        if e.is_config_error() {
            PipelineError::Config(e)
        } else {
            PipelineError::Numerical(e)
        }
    }
}

impl PipelineError {
    /// Process exit status: 2 for configuration, 3 for numerical failures
    /// and breached gates, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Numerical(_) | PipelineError::Gate(_) => 3,
            PipelineError::Run { source, .. } => source.exit_code(),
            PipelineError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
