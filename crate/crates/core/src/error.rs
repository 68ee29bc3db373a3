use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: {components} components")]
    DisconnectedGraph { components: usize },

    #[error("edge ({src}, {dst}) has nonpositive weight {weight}")]
    NonpositiveWeight { src: usize, dst: usize, weight: f64 },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step {h} exceeds the explicit stability bound {bound}")]
    StepTooLarge { h: f64, bound: f64 },

    #[error("grid shape is empty or has a zero-length axis")]
    EmptyShape,

    #[error("mutation graph has {got} nodes but {expected} channels were requested")]
    ChannelCountMismatch { expected: usize, got: usize },

    #[error("invalid mass distribution: {0}")]
    InvalidMass(String),

    #[error("marginal does not match geometry: {0}")]
    MarginalMismatch(String),

    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),

    #[error("time grid needs at least 2 subintervals, got {0}")]
    BadTimeGrid(usize),

    #[error("marginal masses differ: {0} vs {1}")]
    InfeasibleBoundary(f64, f64),

    #[error("solver stopped after {iterations} iterations without meeting tolerances")]
    MaxIterationsExceeded { iterations: usize },

    #[error("conjugate gradient stalled at residual {residual:e} after {iterations} iterations")]
    CgStall { residual: f64, iterations: usize },

    #[error("cubic root find did not converge for input ({rho_bar}, |q|={q_norm})")]
    NonconvergentRootFind { rho_bar: f64, q_norm: f64 },

    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("flow problem is infeasible")]
    Infeasible,

    #[error("entry {index} is not strictly positive ({value})")]
    NonpositiveEntry { index: usize, value: f64 },

    #[error("adaptive step fell below {0:e}")]
    StepUnderflow(f64),

    #[error("problem size {size} exceeds oracle limit {limit}")]
    ScaleExceeded { size: usize, limit: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image has no intensity")]
    ZeroImage,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
