use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("geometry sampling gave up after {attempts} draws: {reason}")]
    DegenerateGeometry { attempts: usize, reason: String },

    #[error("path-loss model is only valid for distances >= 1 m (got {0} m)")]
    DistanceOutOfRange(f64),

    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    #[error("non-Hermitian matrix (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("malformed conic program: {0}")]
    MalformedProgram(String),

    #[error("solver returned {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("scenario infeasible: terminal slack {slack:e} after {escalations} penalty escalations")]
    Infeasible { slack: f64, escalations: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
