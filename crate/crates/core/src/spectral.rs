//! The eight detection pipelines: aggregate, optionally regularize, embed,
//! optionally row-normalize, then cluster.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aggregation::{self, AggregateMatrix, AggregateRole};
use crate::eigen::{leading_eigs_with, EigenSolver, SpectralEmbedding};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KmeansOptions};
use crate::network::{MultiLayerNetwork, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "RDSoS")]
    Rdsos,
    #[serde(rename = "DC-RDSoS")]
    DcRdsos,
    #[serde(rename = "RSoS")]
    Rsos,
    #[serde(rename = "DC-RSoS")]
    DcRsos,
    #[serde(rename = "RSum")]
    Rsum,
    #[serde(rename = "DC-RSum")]
    DcRsum,
    #[serde(rename = "SoS-Debias")]
    SosDebias,
    #[serde(rename = "NDSoSA")]
    Ndsosa,
}

impl MethodId {
    pub const ALL: [MethodId; 8] = [
        MethodId::Rdsos,
        MethodId::DcRdsos,
        MethodId::Rsos,
        MethodId::DcRsos,
        MethodId::Rsum,
        MethodId::DcRsum,
        MethodId::SosDebias,
        MethodId::Ndsosa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Rdsos => "RDSoS",
            MethodId::DcRdsos => "DC-RDSoS",
            MethodId::Rsos => "RSoS",
            MethodId::DcRsos => "DC-RSoS",
            MethodId::Rsum => "RSum",
            MethodId::DcRsum => "DC-RSum",
            MethodId::SosDebias => "SoS-Debias",
            MethodId::Ndsosa => "NDSoSA",
        }
    }

    pub fn role(self) -> AggregateRole {
        match self {
            MethodId::Rdsos | MethodId::DcRdsos | MethodId::SosDebias | MethodId::Ndsosa => AggregateRole::DebiasedSoS,
            MethodId::Rsos | MethodId::DcRsos => AggregateRole::SoS,
            MethodId::Rsum | MethodId::DcRsum => AggregateRole::Sum,
        }
    }

    pub fn regularized(self) -> bool {
        !matches!(self, MethodId::SosDebias | MethodId::Ndsosa)
    }

    pub fn row_normalized(self) -> bool {
        matches!(self, MethodId::DcRdsos | MethodId::DcRsos | MethodId::DcRsum | MethodId::Ndsosa)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Regularizer choice for the Laplacian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSpec {
    /// `sum(D) / (10 n)`.
    #[default]
    Auto,
    Value(f64),
    /// `nu * sum(D) / n`.
    Nu(f64),
}

impl TauSpec {
    pub fn resolve(self, agg: &AggregateMatrix) -> Result<f64> {
        let tau = match self {
            TauSpec::Auto => aggregation::default_tau(agg),
            TauSpec::Value(t) => t,
            TauSpec::Nu(nu) => {
                if !(nu >= 0.0) {
                    return Err(Error::InvalidParameter(format!("nu must be >= 0, got {nu}")));
                }
                nu * aggregation::mean_degree(agg)
            }
        };
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be a finite value >= 0, got {tau}")));
        }
        Ok(tau)
    }
}

impl FromStr for TauSpec {
    type Err = Error;

    /// `auto`, a number, or `nu:<value>` (also `nu=<value>`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(TauSpec::Auto);
        }
        let bad = |_| Error::InvalidParameter(format!("cannot parse tau '{s}'"));
        match s.strip_prefix("nu:").or_else(|| s.strip_prefix("nu=")) {
            Some(v) => Ok(TauSpec::Nu(v.parse().map_err(bad)?)),
            None => Ok(TauSpec::Value(s.parse().map_err(bad)?)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectOptions {
    pub tau: TauSpec,
    pub kmeans: KmeansOptions,
    pub solver: EigenSolver,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectDiagnostics {
    pub method: MethodId,
    /// `None` for unregularized methods and `K = 1`.
    pub tau: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub kmeans_objective: f64,
    pub kmeans_restart: usize,
    pub max_relative_residual: f64,
    pub gapless: bool,
    pub zero_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub partition: Partition,
    pub diagnostics: DetectDiagnostics,
}

/// Scales nonzero rows to unit norm; rows below `1e-12` become exact zeros
/// and are listed in `zero_rows`.
pub fn row_normalize(emb: &SpectralEmbedding) -> SpectralEmbedding {
    let mut out = emb.clone();
    out.zero_rows.clear();
    for (i, mut row) in out.vectors.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm < 1e-12 {
            row.fill(0.0);
            out.zero_rows.push(i);
        } else {
            row /= norm;
        }
    }
    out.normalized = true;
    out
}

/// The matrix a method decomposes, with the regularizer it used.
pub fn method_matrix(agg: &AggregateMatrix, method: MethodId, tau: TauSpec) -> Result<(DMatrix<f64>, Option<f64>)> {
    if method.role() != agg.role() {
        return Err(Error::InvalidParameter(format!(
            "{method} expects a {:?} aggregate, got {:?}",
            method.role(),
            agg.role()
        )));
    }
    if method.regularized() {
        let t = tau.resolve(agg)?;
        let lap = aggregation::regularized_laplacian(agg, t)?;
        Ok((lap.matrix, Some(t)))
    } else {
        Ok((agg.matrix().clone(), None))
    }
}

/// Optional row normalization followed by K-means on the embedding rows.
pub fn cluster_embedding(
    emb: &SpectralEmbedding,
    normalize: bool,
    opts: &KmeansOptions,
    seed: u64,
) -> Result<(Partition, SpectralEmbedding, f64, usize)> {
    let emb = if normalize { row_normalize(emb) } else { emb.clone() };
    let res = kmeans(&emb.vectors, emb.k(), opts, seed)?;
    Ok((res.partition, emb, res.objective, res.restart))
}

pub fn detect(
    net: &MultiLayerNetwork,
    k: usize,
    method: MethodId,
    opts: &DetectOptions,
    seed: u64,
) -> Result<Detection> {
    let n = net.node_count();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if k == 1 {
        return Ok(trivial(n, method));
    }
    let agg = aggregation::aggregate(net, method.role());
    detect_aggregate(&agg, k, method, opts, seed)
}

/// Runs a method on a prebuilt aggregate, e.g. a population aggregate.
pub fn detect_aggregate(
    agg: &AggregateMatrix,
    k: usize,
    method: MethodId,
    opts: &DetectOptions,
    seed: u64,
) -> Result<Detection> {
    let n = agg.node_count();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if k == 1 {
        return Ok(trivial(n, method));
    }
    let (m, tau) = method_matrix(agg, method, opts.tau)?;
    let mut det = detect_matrix(&m, k, method.row_normalized(), opts, seed)?;
    det.diagnostics.method = method;
    det.diagnostics.tau = tau;
    Ok(det)
}

/// Embeds and clusters an arbitrary symmetric matrix.
pub fn detect_matrix(
    m: &DMatrix<f64>,
    k: usize,
    normalize: bool,
    opts: &DetectOptions,
    seed: u64,
) -> Result<Detection> {
    let emb = leading_eigs_with(m, k, opts.solver)?;
    let (partition, emb, objective, restart) = cluster_embedding(&emb, normalize, &opts.kmeans, seed)?;
    Ok(Detection {
        partition,
        diagnostics: DetectDiagnostics {
            method: if normalize { MethodId::DcRdsos } else { MethodId::Rdsos },
            tau: None,
            eigenvalues: emb.eigenvalues.clone(),
            kmeans_objective: objective,
            kmeans_restart: restart,
            max_relative_residual: emb.max_relative_residual,
            gapless: emb.gapless,
            zero_rows: emb.zero_rows,
        },
    })
}

fn trivial(n: usize, method: MethodId) -> Detection {
    Detection {
        partition: Partition::single(n),
        diagnostics: DetectDiagnostics {
            method,
            tau: None,
            eigenvalues: Vec::new(),
            kmeans_objective: 0.0,
            kmeans_restart: 0,
            max_relative_residual: 0.0,
            gapless: false,
            zero_rows: Vec::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{sample, BlockModelParams};
    use proptest::prelude::*;

    fn planted(n_per: usize, layers: usize, rho: f64, seed: u64) -> (MultiLayerNetwork, Partition) {
        let z = Partition::from_sizes(&[n_per, n_per, n_per]);
        let b = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.9]);
        let params = BlockModelParams::mlsbm(z, rho, vec![b; layers]).unwrap();
        sample(&params, seed).unwrap()
    }

    fn fast() -> DetectOptions {
        DetectOptions {
            kmeans: KmeansOptions { restarts: 10, max_iters: 100 },
            ..Default::default()
        }
    }

    #[test]
    fn decomposition_table() {
        let rows: Vec<(AggregateRole, bool, bool)> =
            MethodId::ALL.iter().map(|m| (m.role(), m.regularized(), m.row_normalized())).collect();
        use AggregateRole::*;
        assert_eq!(
            rows,
            vec![
                (DebiasedSoS, true, false),
                (DebiasedSoS, true, true),
                (SoS, true, false),
                (SoS, true, true),
                (Sum, true, false),
                (Sum, true, true),
                (DebiasedSoS, false, false),
                (DebiasedSoS, false, true),
            ]
        );
        let mut seen = std::collections::HashSet::new();
        assert!(rows.iter().all(|r| seen.insert(*r)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
            assert_eq!(m.name().to_lowercase().parse::<MethodId>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("scoRE".parse::<MethodId>().is_err());
    }

    #[test]
    fn tau_parsing() {
        assert_eq!("auto".parse::<TauSpec>().unwrap(), TauSpec::Auto);
        assert_eq!("0.5".parse::<TauSpec>().unwrap(), TauSpec::Value(0.5));
        assert_eq!("nu=0.1".parse::<TauSpec>().unwrap(), TauSpec::Nu(0.1));
        assert_eq!("nu:2".parse::<TauSpec>().unwrap(), TauSpec::Nu(2.0));
        assert!("x".parse::<TauSpec>().is_err());
    }

    #[test]
    fn row_normalize_cases() {
        let emb = SpectralEmbedding {
            vectors: DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]),
            eigenvalues: vec![1.0, 1.0],
            normalized: false,
            max_relative_residual: 0.0,
            gapless: false,
            zero_rows: Vec::new(),
        };
        let once = row_normalize(&emb);
        assert_eq!(once.vectors, DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.0, 0.0]));
        assert_eq!(once.zero_rows, vec![1]);
        assert!(once.normalized);
        let twice = row_normalize(&once);
        assert!((twice.vectors.clone() - once.vectors.clone()).amax() < 1e-15);
    }

    #[test]
    fn single_community_skips_eigensolver() {
        let net = MultiLayerNetwork::from_edge_lists(4, &[vec![]]).unwrap();
        let det = detect(&net, 1, MethodId::Rdsos, &fast(), 0).unwrap();
        assert_eq!(det.partition, Partition::single(4));
        assert!(det.diagnostics.eigenvalues.is_empty());
    }

    #[test]
    fn isolated_nodes_with_zero_tau() {
        let net = MultiLayerNetwork::from_edge_lists(4, &[vec![(0, 1), (1, 2)]]).unwrap();
        let opts = DetectOptions { tau: TauSpec::Value(0.0), ..fast() };
        match detect(&net, 2, MethodId::Rsum, &opts, 0) {
            Err(Error::SingularDegree { nodes }) => assert_eq!(nodes, vec![3]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(detect(&net, 2, MethodId::Rsum, &fast(), 0).is_ok());
    }

    #[test]
    fn planted_partition_recovered() {
        let (net, truth) = planted(60, 3, 0.3, 11);
        for m in MethodId::ALL {
            let det = detect(&net, 3, m, &fast(), 5).unwrap();
            assert!(det.partition.same_up_to_permutation(&truth), "{m}");
            assert!(det.diagnostics.max_relative_residual <= 1e-8);
        }
    }

    #[test]
    fn regularized_methods_report_tau() {
        let (net, _) = planted(20, 2, 0.5, 1);
        let det = detect(&net, 3, MethodId::Rdsos, &fast(), 0).unwrap();
        let agg = aggregation::debiased_sos(&net);
        assert_eq!(det.diagnostics.tau, Some(aggregation::default_tau(&agg)));
        let det = detect(&net, 3, MethodId::SosDebias, &fast(), 0).unwrap();
        assert_eq!(det.diagnostics.tau, None);
    }

    #[test]
    fn dc_differs_only_by_normalization() {
        let (net, _) = planted(20, 2, 0.5, 2);
        let agg = aggregation::debiased_sos(&net);
        let (plain, _) = method_matrix(&agg, MethodId::Rdsos, TauSpec::Auto).unwrap();
        let (dc, _) = method_matrix(&agg, MethodId::DcRdsos, TauSpec::Auto).unwrap();
        assert_eq!(plain, dc);
        let a = detect(&net, 3, MethodId::DcRdsos, &fast(), 9).unwrap();
        let b = detect_matrix(&plain, 3, true, &fast(), 9).unwrap();
        assert_eq!(a.partition, b.partition);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn permutation_equivariance(seed in 0u64..500, shift in 1usize..59) {
            let (net, _) = planted(20, 2, 0.4, seed);
            let n = net.node_count();
            let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
            let moved = net.permute(&perm).unwrap();
            let a = detect(&net, 3, MethodId::Rdsos, &fast(), seed).unwrap();
            let b = detect(&moved, 3, MethodId::Rdsos, &fast(), seed).unwrap();
            let a_moved = a.partition.permute(&perm).unwrap();
            prop_assert!(a_moved.same_up_to_permutation(&b.partition));
        }
    }
}
