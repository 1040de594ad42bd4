//! Community detection in multi-layer networks by regularized spectral
//! clustering of debiased sums of squared adjacency matrices.

pub mod aggregation;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod generators;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod modularity;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod simulation;
pub mod spectral;

pub use error::{Error, Result};
pub use network::{Layer, MultiLayerNetwork, Partition};
pub use spectral::{detect, DetectOptions, Detection, MethodId, TauSpec};
