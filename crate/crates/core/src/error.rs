use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by grid construction, stepping, analysis and persistence.
#[derive(Debug, Error)]
pub enum KsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unknown initial-data preset `{0}`")]
    UnknownPreset(String),

    #[error("preset `{preset}` is incompatible with the boundary data: {reason}")]
    IncompatiblePreset { preset: String, reason: String },

    #[error("field length {found} does not match grid node count {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("density went negative: min u = {min:e} at node {node}")]
    NegativeDensity { min: f64, node: usize },

    #[error("chemical concentration hit the floor: min c = {min:e} at node {node}")]
    Singularity { min: f64, node: usize },

    #[error("time step {dt:e} exceeds the transport bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("step failed at t = {time}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<KsError>,
    },

    #[error("trajectories are not sampled identically: {0}")]
    SamplingMismatch(String),

    #[error("empty interval [{lo}, {hi}] contains no grid node")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("rate fit needs at least 3 strictly positive pairs with decreasing eps: {0}")]
    BadFitData(String),

    #[error("gamma = {gamma:e} exceeds the admissible gamma0 = {gamma0:e}")]
    GammaTooLarge { gamma: f64, gamma0: f64 },

    #[error("extremal solution blew up near t = {time}")]
    BlowUp { time: f64 },

    #[error("integration did not converge: {0}")]
    NotConverged(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, KsError>;

impl KsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_time(self, time: f64) -> Self {
        KsError::StepFailed {
            time,
            source: Box::new(self),
        }
    }
}
