//! Layer aggregation (`S`, `S~`, `A_sum`) and the regularized Laplacian.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MultiLayerNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateRole {
    /// `S = sum_l (A_l^2 - D_l)`: off-diagonal common-neighbor counts.
    DebiasedSoS,
    /// `S~ = sum_l A_l^2`.
    SoS,
    /// `A_sum = sum_l A_l`.
    Sum,
}

impl AggregateRole {
    fn code(self) -> u8 {
        match self {
            AggregateRole::DebiasedSoS => 0,
            AggregateRole::SoS => 1,
            AggregateRole::Sum => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(AggregateRole::DebiasedSoS),
            1 => Some(AggregateRole::SoS),
            2 => Some(AggregateRole::Sum),
            _ => None,
        }
    }
}

/// Dense symmetric aggregate with its row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateMatrix {
    matrix: DMatrix<f64>,
    role: AggregateRole,
    degrees: Vec<f64>,
}

impl AggregateMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. a population aggregate.
    pub fn from_matrix(matrix: DMatrix<f64>, role: AggregateRole) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("aggregate must be a non-empty square matrix".into()));
        }
        let degrees = matrix.row_iter().map(|r| r.sum()).collect();
        Ok(AggregateMatrix { matrix, role, degrees })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn role(&self) -> AggregateRole {
        self.role
    }

    /// `D(i) = sum_j M(i, j)`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Little-endian container: `n: u64`, `role: u8`, then `n * n` row-major `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.node_count();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&[self.role.code()])?;
        for i in 0..n {
            for j in 0..n {
                w.write_all(&self.matrix[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let role = AggregateRole::from_code(code[0])
            .ok_or_else(|| Error::InvalidParameter(format!("unknown role code {}", code[0])))?;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        Self::from_matrix(DMatrix::from_row_slice(n, n, &data), role)
    }
}

/// Squares every layer. Sparse layers go through neighbor lists (node `m`
/// adds one to `M(a, b)` for each ordered pair of its neighbors); dense
/// layers use a matrix product. Entries are small integers either way, so
/// both routes give identical values.
fn squared_layers(net: &MultiLayerNetwork, keep_diagonal: bool) -> DMatrix<f64> {
    let n = net.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for layer in net.layers() {
        let pair_work: usize = (0..n).map(|i| layer.degree(i).pow(2)).sum();
        if pair_work.saturating_mul(16) > n.pow(3) {
            let a = layer.to_dense();
            let mut sq = &a * &a;
            if !keep_diagonal {
                sq.fill_diagonal(0.0);
            }
            m += sq;
            continue;
        }
        for hub in 0..n {
            let nbrs = layer.neighbors(hub);
            for &a in nbrs {
                for &b in nbrs {
                    if a != b || keep_diagonal {
                        m[(a, b)] += 1.0;
                    }
                }
            }
        }
    }
    m
}

pub fn debiased_sos(net: &MultiLayerNetwork) -> AggregateMatrix {
    finish(squared_layers(net, false), AggregateRole::DebiasedSoS)
}

pub fn sos(net: &MultiLayerNetwork) -> AggregateMatrix {
    finish(squared_layers(net, true), AggregateRole::SoS)
}

pub fn sum_adjacency(net: &MultiLayerNetwork) -> AggregateMatrix {
    let n = net.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for layer in net.layers() {
        for (i, j) in layer.edges() {
            m[(i, j)] += 1.0;
            m[(j, i)] += 1.0;
        }
    }
    finish(m, AggregateRole::Sum)
}

pub fn aggregate(net: &MultiLayerNetwork, role: AggregateRole) -> AggregateMatrix {
    match role {
        AggregateRole::DebiasedSoS => debiased_sos(net),
        AggregateRole::SoS => sos(net),
        AggregateRole::Sum => sum_adjacency(net),
    }
}

fn finish(matrix: DMatrix<f64>, role: AggregateRole) -> AggregateMatrix {
    debug_assert!(matrix.iter().all(|v| v.fract() == 0.0));
    let degrees = matrix.row_iter().map(|r| r.sum()).collect();
    AggregateMatrix { matrix, role, degrees }
}

/// `tau = sum(D) / (10 n)`.
pub fn default_tau(agg: &AggregateMatrix) -> f64 {
    mean_degree(agg) / 10.0
}

/// `sum(D) / n`, the scale used by nu-scaled regularizers.
pub fn mean_degree(agg: &AggregateMatrix) -> f64 {
    agg.degrees.iter().sum::<f64>() / agg.node_count() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedLaplacian {
    pub matrix: DMatrix<f64>,
    pub tau: f64,
    pub role: AggregateRole,
}

/// `L = D_tau^{-1/2} M D_tau^{-1/2}` with `D_tau = D + tau I`.
pub fn regularized_laplacian(agg: &AggregateMatrix, tau: f64) -> Result<RegularizedLaplacian> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be a finite value >= 0, got {tau}")));
    }
    let shifted: Vec<f64> = agg.degrees.iter().map(|d| d + tau).collect();
    let singular: Vec<usize> = (0..shifted.len()).filter(|&i| shifted[i] <= 0.0).collect();
    if !singular.is_empty() {
        return Err(Error::SingularDegree { nodes: singular });
    }
    let scale: Vec<f64> = shifted.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = agg.node_count();
    let matrix = DMatrix::from_fn(n, n, |i, j| agg.matrix[(i, j)] * scale[i] * scale[j]);
    Ok(RegularizedLaplacian {
        matrix,
        tau,
        role: agg.role,
    })
}
