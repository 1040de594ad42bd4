//! Multi-layer stochastic block models, with and without degree correction.

mod presets;

pub use presets::{simulation_presets, GridPoint, SimCase, StudyPreset, SweepParam, ThetaScheme};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Layer, MultiLayerNetwork, Partition};
use crate::rng;

/// How edge probabilities are scaled on top of the connectivity matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeModel {
    /// MLSBM: `P(i, j) = rho * B(l(i), l(j))`.
    Sparsity(f64),
    /// MLDCSBM: `P(i, j) = theta(i) * theta(j) * B(l(i), l(j))`.
    Heterogeneous(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockModelParams {
    pub membership: Partition,
    /// One symmetric `K x K` matrix per layer, entries in `[0, 1]`.
    pub connectivity: Vec<Vec<Vec<f64>>>,
    pub degree: DegreeModel,
}

impl BlockModelParams {
    pub fn new(membership: Partition, connectivity: Vec<DMatrix<f64>>, degree: DegreeModel) -> Result<Self> {
        let connectivity = connectivity
            .iter()
            .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect();
        let params = BlockModelParams {
            membership,
            connectivity,
            degree,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn mlsbm(membership: Partition, rho: f64, connectivity: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(membership, connectivity, DegreeModel::Sparsity(rho))
    }

    pub fn mldcsbm(membership: Partition, theta: Vec<f64>, connectivity: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(membership, connectivity, DegreeModel::Heterogeneous(theta))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.membership.k();
        let n = self.membership.len();
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if n == 0 || k == 0 {
            return bad("membership must cover at least one node and one community".into());
        }
        if let Some(c) = self.membership.sizes().iter().position(|&s| s == 0) {
            return bad(format!("community {c} is empty"));
        }
        if self.connectivity.is_empty() {
            return bad("at least one layer is required".into());
        }
        for (l, b) in self.connectivity.iter().enumerate() {
            if b.len() != k || b.iter().any(|r| r.len() != k) {
                return bad(format!("connectivity matrix {l} is not {k}x{k}"));
            }
            for p in 0..k {
                for q in 0..k {
                    let v = b[p][q];
                    if !(0.0..=1.0).contains(&v) {
                        return bad(format!("probability {v} outside [0, 1] in layer {l}"));
                    }
                    if v != b[q][p] {
                        return bad(format!("connectivity matrix {l} is not symmetric"));
                    }
                }
            }
        }
        match &self.degree {
            DegreeModel::Sparsity(rho) if !(0.0..=1.0).contains(rho) => {
                bad(format!("sparsity {rho} outside [0, 1]"))
            }
            DegreeModel::Heterogeneous(theta) if theta.len() != n => {
                bad(format!("theta has {} entries for {n} nodes", theta.len()))
            }
            DegreeModel::Heterogeneous(theta) => match theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                Some(t) => bad(format!("theta entry {t} outside [0, 1]")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    pub fn layer_count(&self) -> usize {
        self.connectivity.len()
    }

    pub fn k(&self) -> usize {
        self.membership.k()
    }

    pub fn connectivity_matrix(&self, l: usize) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |p, q| self.connectivity[l][p][q])
    }

    /// Edge probability between `i` and `j` in layer `l` (also defined for `i == j`).
    pub fn edge_probability(&self, l: usize, i: usize, j: usize) -> f64 {
        let labels = self.membership.labels();
        let b = self.connectivity[l][labels[i]][labels[j]];
        match &self.degree {
            DegreeModel::Sparsity(rho) => rho * b,
            DegreeModel::Heterogeneous(theta) => theta[i] * theta[j] * b,
        }
    }

    pub fn is_degree_corrected(&self) -> bool {
        matches!(self.degree, DegreeModel::Heterogeneous(_))
    }
}

/// Samples a network from either model. Layer `l` uses ChaCha stream `l`
/// of `seed`, and each upper-triangular pair consumes exactly one draw in
/// row-major order, so the output is a pure function of `(params, seed)`.
pub fn sample(params: &BlockModelParams, seed: u64) -> Result<(MultiLayerNetwork, Partition)> {
    params.validate()?;
    let n = params.node_count();
    let layers: Vec<Layer> = (0..params.layer_count())
        .into_par_iter()
        .map(|l| {
            let mut stream = rng::stream(seed, l as u64);
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let u = rng::unit(&mut stream);
                    if u < params.edge_probability(l, i, j) {
                        adj[i].push(j);
                        adj[j].push(i);
                    }
                }
            }
            Layer::from_adjacency_unchecked(adj)
        })
        .collect();
    let net = MultiLayerNetwork::new(n, layers)?;
    Ok((net, params.membership.clone()))
}

/// MLSBM sampling; rejects degree-corrected parameters.
pub fn sample_mlsbm(params: &BlockModelParams, seed: u64) -> Result<(MultiLayerNetwork, Partition)> {
    if params.is_degree_corrected() {
        return Err(Error::InvalidParameter("MLSBM parameters must not carry theta".into()));
    }
    sample(params, seed)
}

/// MLDCSBM sampling; requires a theta vector.
pub fn sample_mldcsbm(params: &BlockModelParams, seed: u64) -> Result<(MultiLayerNetwork, Partition)> {
    if !params.is_degree_corrected() {
        return Err(Error::InvalidParameter("MLDCSBM parameters need a theta vector".into()));
    }
    sample(params, seed)
}

/// Population adjacency matrices `Omega_l`, one per layer. The diagonal
/// holds the model value `rho * B(k, k)` (or `theta(i)^2 * B(k, k)`) even
/// though sampled layers carry no self-loops.
pub fn expected_adjacency(params: &BlockModelParams) -> Result<Vec<DMatrix<f64>>> {
    params.validate()?;
    let n = params.node_count();
    Ok((0..params.layer_count())
        .map(|l| DMatrix::from_fn(n, n, |i, j| params.edge_probability(l, i, j)))
        .collect())
}
