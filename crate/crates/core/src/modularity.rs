//! Modularity scores, K selection by modularity maximization, and
//! per-community degree profiles.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{self, AggregateMatrix};
use crate::eigen::leading_eigs_with;
use crate::error::{Error, Result};
use crate::network::{MultiLayerNetwork, Partition};
use crate::rng;
use crate::spectral::{cluster_embedding, method_matrix, DetectOptions, MethodId};

pub const DEFAULT_K_CANDIDATES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModularityMetric {
    #[serde(rename = "SoS")]
    Sos,
    #[serde(rename = "MNavrg")]
    Mnavrg,
}

impl ModularityMetric {
    pub const ALL: [ModularityMetric; 2] = [ModularityMetric::Sos, ModularityMetric::Mnavrg];

    pub fn name(self) -> &'static str {
        match self {
            ModularityMetric::Sos => "SoS",
            ModularityMetric::Mnavrg => "MNavrg",
        }
    }
}

impl fmt::Display for ModularityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModularityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sos" => Ok(ModularityMetric::Sos),
            "mnavrg" => Ok(ModularityMetric::Mnavrg),
            _ => Err(Error::InvalidParameter(format!("unknown modularity metric '{s}'"))),
        }
    }
}

fn check_len(net: &MultiLayerNetwork, p: &Partition) -> Result<()> {
    if net.node_count() != p.len() {
        return Err(Error::LengthMismatch(net.node_count(), p.len()));
    }
    Ok(())
}

/// Modularity of `p` on a dense aggregate, diagonal included.
pub fn aggregate_modularity(agg: &AggregateMatrix, p: &Partition) -> Result<f64> {
    let n = agg.node_count();
    if n != p.len() {
        return Err(Error::LengthMismatch(n, p.len()));
    }
    let two_m: f64 = agg.degrees().iter().sum();
    if two_m <= 0.0 {
        return Err(Error::DegenerateNetwork("aggregate has no mass".into()));
    }
    let labels = p.labels();
    let m = agg.matrix();
    let mut inside = 0.0;
    let mut degree_mass = vec![0.0; p.k()];
    for j in 0..n {
        degree_mass[labels[j]] += agg.degrees()[j];
        for i in 0..n {
            if labels[i] == labels[j] {
                inside += m[(i, j)];
            }
        }
    }
    let expected: f64 = degree_mass.iter().map(|d| (d / two_m) * (d / two_m)).sum();
    Ok(inside / two_m - expected)
}

/// Modularity on `S~ = sum_l A_l^2`.
pub fn sos_modularity(net: &MultiLayerNetwork, p: &Partition) -> Result<f64> {
    check_len(net, p)?;
    aggregate_modularity(&aggregation::sos(net), p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerAverage {
    pub value: f64,
    /// Layers without edges; they contribute zero but still count in `T`.
    pub skipped_layers: Vec<usize>,
}

/// Newman-Girvan modularity averaged over layers.
pub fn mnavrg_modularity(net: &MultiLayerNetwork, p: &Partition) -> Result<f64> {
    mnavrg_modularity_detailed(net, p).map(|r| r.value)
}

pub fn mnavrg_modularity_detailed(net: &MultiLayerNetwork, p: &Partition) -> Result<LayerAverage> {
    check_len(net, p)?;
    let labels = p.labels();
    let mut total = 0.0;
    let mut skipped = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        let edges = layer.edge_count();
        if edges == 0 {
            skipped.push(l);
            continue;
        }
        let two_e = 2.0 * edges as f64;
        let mut inside = 0usize;
        let mut degree_mass = vec![0.0; p.k()];
        for i in 0..net.node_count() {
            degree_mass[labels[i]] += layer.degree(i) as f64;
            inside += layer.neighbors(i).iter().filter(|&&j| labels[j] == labels[i]).count();
        }
        let expected: f64 = degree_mass.iter().map(|d| (d / two_e) * (d / two_e)).sum();
        total += inside as f64 / two_e - expected;
    }
    if skipped.len() == net.layer_count() {
        return Err(Error::DegenerateNetwork("every layer is empty".into()));
    }
    Ok(LayerAverage {
        value: total / net.layer_count() as f64,
        skipped_layers: skipped,
    })
}

pub fn modularity(net: &MultiLayerNetwork, p: &Partition, metric: ModularityMetric) -> Result<f64> {
    match metric {
        ModularityMetric::Sos => sos_modularity(net, p),
        ModularityMetric::Mnavrg => mnavrg_modularity(net, p),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModularityCurve {
    pub method: MethodId,
    pub metric: ModularityMetric,
    /// `(k, Q)` for `k = 1..=K_C`.
    pub values: Vec<(usize, f64)>,
    pub best_k: usize,
    pub best_q: f64,
    #[serde(skip)]
    pub partitions: Vec<Partition>,
    pub skipped_layers: Vec<usize>,
}

impl ModularityCurve {
    fn from_scores(
        method: MethodId,
        metric: ModularityMetric,
        partitions: Vec<Partition>,
        scores: Vec<f64>,
        skipped_layers: Vec<usize>,
    ) -> Self {
        let mut best = 0;
        for (i, &q) in scores.iter().enumerate() {
            if q > scores[best] {
                best = i;
            }
        }
        ModularityCurve {
            method,
            metric,
            values: scores.iter().enumerate().map(|(i, &q)| (i + 1, q)).collect(),
            best_k: best + 1,
            best_q: scores[best],
            partitions,
            skipped_layers,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,Q")?;
        for (k, q) in &self.values {
            writeln!(w, "{k},{q}")?;
        }
        Ok(())
    }
}

/// Partitions for `k = 1..=k_max` from one aggregate and one decomposition.
/// Each `k` clusters the first `k` eigenvectors with seed `derive(seed, k)`.
pub fn partitions_for_k_range(
    net: &MultiLayerNetwork,
    method: MethodId,
    k_max: usize,
    opts: &DetectOptions,
    seed: u64,
) -> Result<Vec<Partition>> {
    let n = net.node_count();
    if k_max == 0 || k_max > n {
        return Err(Error::TooManyClusters { k: k_max, n });
    }
    if k_max == 1 {
        return Ok(vec![Partition::single(n)]);
    }
    let agg = aggregation::aggregate(net, method.role());
    let (m, _) = method_matrix(&agg, method, opts.tau)?;
    let full = leading_eigs_with(&m, k_max, opts.solver)?;
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            if k == 1 {
                return Ok(Partition::single(n));
            }
            let emb = full.truncate(k, None);
            let (p, ..) = cluster_embedding(&emb, method.row_normalized(), &opts.kmeans, k_seed(seed, k))?;
            Ok(p)
        })
        .collect()
}

/// Seed used for the `k`-community fit inside a K scan.
pub fn k_seed(seed: u64, k: usize) -> u64 {
    rng::derive_seed(seed, &[k as u64])
}

/// Scores the same partitions under every metric.
pub fn estimate_k_all(
    net: &MultiLayerNetwork,
    method: MethodId,
    k_max: usize,
    opts: &DetectOptions,
    seed: u64,
) -> Result<Vec<ModularityCurve>> {
    let parts = partitions_for_k_range(net, method, k_max, opts, seed)?;
    let sos = aggregation::sos(net);
    let sos_scores = parts.iter().map(|p| aggregate_modularity(&sos, p)).collect::<Result<Vec<_>>>()?;
    let mut skipped = Vec::new();
    let mn_scores = parts
        .iter()
        .map(|p| {
            mnavrg_modularity_detailed(net, p).map(|r| {
                skipped = r.skipped_layers;
                r.value
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        ModularityCurve::from_scores(method, ModularityMetric::Sos, parts.clone(), sos_scores, Vec::new()),
        ModularityCurve::from_scores(method, ModularityMetric::Mnavrg, parts, mn_scores, skipped),
    ])
}

pub fn estimate_k(
    net: &MultiLayerNetwork,
    method: MethodId,
    metric: ModularityMetric,
    k_max: usize,
    opts: &DetectOptions,
    seed: u64,
) -> Result<ModularityCurve> {
    let parts = partitions_for_k_range(net, method, k_max, opts, seed)?;
    let (scores, skipped) = match metric {
        ModularityMetric::Sos => {
            let sos = aggregation::sos(net);
            let s = parts.iter().map(|p| aggregate_modularity(&sos, p)).collect::<Result<Vec<_>>>()?;
            (s, Vec::new())
        }
        ModularityMetric::Mnavrg => {
            let detailed = parts
                .iter()
                .map(|p| mnavrg_modularity_detailed(net, p))
                .collect::<Result<Vec<_>>>()?;
            let skipped = detailed.first().map(|d| d.skipped_layers.clone()).unwrap_or_default();
            (detailed.into_iter().map(|d| d.value).collect(), skipped)
        }
    };
    Ok(ModularityCurve::from_scores(method, metric, parts, scores, skipped))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunityStats {
    pub size: usize,
    pub mean_degree: f64,
    pub mean_in_degree: f64,
    pub mean_out_degree: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunityProfile {
    pub communities: Vec<CommunityStats>,
}

impl CommunityProfile {
    /// One row per community, numbered from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "Cluster,Size,Mean-degree,Mean-in-degree,Mean-out-degree")?;
        for (c, s) in self.communities.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.4},{:.4},{:.4}",
                c + 1,
                s.size,
                s.mean_degree,
                s.mean_in_degree,
                s.mean_out_degree
            )?;
        }
        Ok(())
    }
}

/// Layer-averaged degree, within-community degree, and the mean number of
/// edges received by outside nodes adjacent to the community. A layer in
/// which no outside node touches the community contributes zero to the
/// last index.
pub fn community_profile(net: &MultiLayerNetwork, p: &Partition) -> Result<CommunityProfile> {
    check_len(net, p)?;
    let sizes = p.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCommunity(empty));
    }
    let labels = p.labels();
    let t = net.layer_count() as f64;
    let n = net.node_count();
    let communities = (0..p.k())
        .map(|c| {
            let (mut degree, mut inside, mut out) = (0usize, 0usize, 0.0);
            for layer in net.layers() {
                let mut cross = 0usize;
                let mut touched = vec![false; n];
                for i in (0..n).filter(|&i| labels[i] == c) {
                    degree += layer.degree(i);
                    for &j in layer.neighbors(i) {
                        if labels[j] == c {
                            inside += 1;
                        } else {
                            cross += 1;
                            touched[j] = true;
                        }
                    }
                }
                let outside = touched.iter().filter(|&&x| x).count();
                if outside > 0 {
                    out += cross as f64 / outside as f64;
                }
            }
            let nk = sizes[c] as f64;
            CommunityStats {
                size: sizes[c],
                mean_degree: degree as f64 / (t * nk),
                mean_in_degree: inside as f64 / (t * nk),
                mean_out_degree: out / t,
            }
        })
        .collect();
    Ok(CommunityProfile { communities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{sample, BlockModelParams};
    use crate::kmeans::KmeansOptions;
    use crate::spectral::detect;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn triangles(layers: usize) -> MultiLayerNetwork {
        let edges = vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
        MultiLayerNetwork::from_edge_lists(6, &vec![edges; layers]).unwrap()
    }

    fn split() -> Partition {
        Partition::from_sizes(&[3, 3])
    }

    /// Literal double sum over all `(i, j)`.
    fn direct(m: &DMatrix<f64>, p: &Partition) -> f64 {
        let n = m.nrows();
        let d: Vec<f64> = (0..n).map(|i| m.row(i).sum()).collect();
        let two_m: f64 = d.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if p.labels()[i] == p.labels()[j] {
                    q += m[(i, j)] - d[i] * d[j] / two_m;
                }
            }
        }
        q / two_m
    }

    #[test]
    fn disjoint_triangles() {
        let net = triangles(1);
        let q = sos_modularity(&net, &split()).unwrap();
        let oracle = direct(aggregation::sos(&net).matrix(), &split());
        assert!((q - oracle).abs() < 1e-14);
        assert!(q > 0.0);
        assert_eq!(sos_modularity(&net, &Partition::single(6)).unwrap(), 0.0);
        let ng = mnavrg_modularity(&net, &split()).unwrap();
        assert!((ng - direct(&net.layer(0).unwrap().to_dense(), &split())).abs() < 1e-14);
        assert!((mnavrg_modularity(&triangles(3), &split()).unwrap() - ng).abs() < 1e-14);
    }

    #[test]
    fn empty_network_is_degenerate() {
        let net = MultiLayerNetwork::from_edge_lists(3, &[vec![], vec![]]).unwrap();
        assert!(matches!(sos_modularity(&net, &Partition::single(3)), Err(Error::DegenerateNetwork(_))));
        assert!(matches!(mnavrg_modularity(&net, &Partition::single(3)), Err(Error::DegenerateNetwork(_))));
    }

    #[test]
    fn empty_layers_count_in_average() {
        let mut edges = vec![vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]];
        edges.push(vec![]);
        let net = MultiLayerNetwork::from_edge_lists(6, &edges).unwrap();
        let r = mnavrg_modularity_detailed(&net, &split()).unwrap();
        assert_eq!(r.skipped_layers, vec![1]);
        assert!((r.value - mnavrg_modularity(&triangles(1), &split()).unwrap() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_profile() {
        let prof = community_profile(&triangles(2), &split()).unwrap();
        for s in &prof.communities {
            assert_eq!((s.size, s.mean_degree, s.mean_in_degree, s.mean_out_degree), (3, 2.0, 2.0, 0.0));
        }
        let single = community_profile(&triangles(1), &Partition::single(6)).unwrap();
        assert_eq!(single.communities[0].mean_out_degree, 0.0);
        let mut out = Vec::new();
        prof.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "Cluster,Size,Mean-degree,Mean-in-degree,Mean-out-degree\n1,3,2.0000,2.0000,0.0000\n2,3,2.0000,2.0000,0.0000\n"
        );
    }

    #[test]
    fn out_degree_counts_touched_outsiders() {
        // Star from node 0 into three outside nodes plus one edge 1-4.
        let net = MultiLayerNetwork::from_edge_lists(5, &[vec![(0, 2), (0, 3), (0, 4), (1, 4), (0, 1)]]).unwrap();
        let p = Partition::from_labels(vec![0, 0, 1, 1, 1]);
        let prof = community_profile(&net, &p).unwrap();
        // Four cross edges into three distinct outside nodes.
        assert!((prof.communities[0].mean_out_degree - 4.0 / 3.0).abs() < 1e-15);
        assert!((prof.communities[0].mean_in_degree - 1.0).abs() < 1e-15);
        // From community 1: the same four edges reach both nodes of community 0.
        assert!((prof.communities[1].mean_out_degree - 2.0).abs() < 1e-15);
    }

    #[test]
    fn scan_matches_direct_detection() {
        let z = Partition::from_sizes(&[30, 30, 30]);
        let b = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.9]);
        let params = BlockModelParams::mlsbm(z, 0.25, vec![b; 4]).unwrap();
        let (net, truth) = sample(&params, 3).unwrap();
        let opts = DetectOptions {
            kmeans: KmeansOptions { restarts: 10, max_iters: 100 },
            ..Default::default()
        };
        let curve = estimate_k(&net, MethodId::Rdsos, ModularityMetric::Sos, 6, &opts, 42).unwrap();
        assert_eq!(curve.values.len(), 6);
        assert_eq!(curve.values[0].1, 0.0);
        assert_eq!(curve.best_k, 3);
        assert!(curve.values.iter().all(|&(_, q)| q <= curve.best_q));
        for k in 2..=6 {
            let det = detect(&net, k, MethodId::Rdsos, &opts, k_seed(42, k)).unwrap();
            assert_eq!(det.partition, curve.partitions[k - 1], "k = {k}");
        }
        assert!(curve.partitions[2].same_up_to_permutation(&truth));
        let both = estimate_k_all(&net, MethodId::Rdsos, 6, &opts, 42).unwrap();
        assert_eq!(both[0], curve);
        let mut csv = Vec::new();
        curve.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("k,Q\n1,0\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn relabel_invariance_and_bounds(
            edges in proptest::collection::vec((0usize..10, 0usize..10), 5..30),
            labels in proptest::collection::vec(0usize..3, 10),
        ) {
            let net = MultiLayerNetwork::from_edge_lists(10, &[edges.clone(), edges.iter().map(|&(a, b)| (a, (b + 1) % 10)).collect()]).unwrap();
            prop_assume!(net.layers().iter().any(|l| l.edge_count() > 0));
            let p = Partition::new(labels.clone(), 3).unwrap();
            let renamed = Partition::new(labels.iter().map(|&c| 2 - c).collect(), 3).unwrap();
            let q = sos_modularity(&net, &p).unwrap();
            prop_assert!((q - sos_modularity(&net, &renamed).unwrap()).abs() < 1e-12);
            prop_assert!((q - direct(aggregation::sos(&net).matrix(), &p)).abs() < 1e-12);
            prop_assert!(q <= 1.0);
            let mn = mnavrg_modularity(&net, &p).unwrap();
            prop_assert!((mn - mnavrg_modularity(&net, &renamed).unwrap()).abs() < 1e-12);
            prop_assert!(mn <= 1.0);
            prop_assert!(sos_modularity(&net, &Partition::single(10)).unwrap().abs() < 1e-12);
            prop_assert!(mnavrg_modularity(&net, &Partition::single(10)).unwrap().abs() < 1e-12);
        }
    }
}
