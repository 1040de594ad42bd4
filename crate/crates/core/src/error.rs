use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: index {value} out of range ({message})")]
    Range {
        line: usize,
        value: String,
        message: String,
    },

    #[error("input contains no edge records")]
    EmptyInput,

    #[error("layer {layer} out of range (network has {layers} layers)")]
    LayerOutOfRange { layer: usize, layers: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero regularized degree at nodes {nodes:?} (tau = 0)")]
    SingularDegree { nodes: Vec<usize> },

    #[error("requested {k} eigenpairs from a {n}x{n} matrix")]
    TooManyEigenpairs { k: usize, n: usize },

    #[error("matrix is not symmetric: |M(i,j) - M(j,i)| = {deviation:e} at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize, deviation: f64 },

    #[error("eigenpair {index} residual {residual:e} exceeds bound {bound:e}")]
    EigenResidual {
        index: usize,
        residual: f64,
        bound: f64,
    },

    #[error("requested {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },

    #[error("partitions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("clustering error needs a permutation search over K = {0} labels; at most 10 are supported")]
    UnsupportedK(usize),

    #[error("estimate uses {est} labels but the reference partition has only {truth} communities")]
    LabelCountMismatch { truth: usize, est: usize },

    #[error("community {0} is empty")]
    EmptyCommunity(usize),

    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("unknown simulation study {0}")]
    UnknownStudy(u32),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
