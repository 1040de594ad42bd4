//! Exact population quantities for block models and structural checks on
//! their leading eigenvectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::aggregation::{self, AggregateMatrix, AggregateRole};
use crate::eigen::{leading_eigs_symmetric, SpectralEmbedding};
use crate::error::Result;
use crate::generators::{expected_adjacency, BlockModelParams};
use crate::network::Partition;
use crate::spectral::{row_normalize, TauSpec};

/// Squared-distance tolerance used by both checks.
pub const ROW_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PopulationLaplacian {
    /// `sum_l Omega_l^2`.
    pub s: DMatrix<f64>,
    pub degrees: Vec<f64>,
    pub tau: f64,
    pub laplacian: DMatrix<f64>,
    pub embedding: SpectralEmbedding,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl PopulationLaplacian {
    /// The population aggregate, usable in place of a sampled `S`.
    pub fn aggregate(&self) -> AggregateMatrix {
        AggregateMatrix::from_matrix(self.s.clone(), AggregateRole::DebiasedSoS).expect("square matrix")
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.embedding.vectors
    }
}

pub fn population_aggregate(params: &BlockModelParams) -> Result<DMatrix<f64>> {
    let n = params.node_count();
    let mut s = DMatrix::zeros(n, n);
    for omega in expected_adjacency(params)? {
        s += &omega * &omega;
    }
    Ok(s)
}

/// Expectation of the sampled debiased aggregate. Sampled layers have no
/// self-loops, so this is `sum_l Omega0_l^2` with `Omega0` the hollow
/// version of `Omega`, and a zero diagonal.
pub fn expected_debiased_sos(params: &BlockModelParams) -> Result<DMatrix<f64>> {
    let (mean, _) = debiased_sos_moments(params)?;
    Ok(mean)
}

/// Mean and exact variance of every entry of the sampled debiased aggregate.
/// Off-diagonal `S(i, j)` is a sum of independent products of Bernoulli
/// edges with success probability `q = Omega(i, m) Omega(m, j)`.
pub fn debiased_sos_moments(params: &BlockModelParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = params.node_count();
    let mut mean = DMatrix::zeros(n, n);
    let mut var = DMatrix::zeros(n, n);
    for mut omega in expected_adjacency(params)? {
        omega.fill_diagonal(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (mut m1, mut v1) = (0.0, 0.0);
                for m in 0..n {
                    let q = omega[(i, m)] * omega[(m, j)];
                    m1 += q;
                    v1 += q * (1.0 - q);
                }
                mean[(i, j)] += m1;
                var[(i, j)] += v1;
            }
        }
    }
    Ok((mean, var))
}

pub fn population_laplacian(params: &BlockModelParams, tau: TauSpec) -> Result<PopulationLaplacian> {
    let s = population_aggregate(params)?;
    let agg = AggregateMatrix::from_matrix(s.clone(), AggregateRole::DebiasedSoS)?;
    let t = tau.resolve(&agg)?;
    let lap = aggregation::regularized_laplacian(&agg, t)?;
    let embedding = leading_eigs_symmetric(&lap.matrix, params.k())?;
    let degrees = agg.degrees().to_vec();
    let delta_min = degrees.iter().copied().fold(f64::INFINITY, f64::min);
    let delta_max = degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PopulationLaplacian {
        s,
        degrees,
        tau: t,
        laplacian: lap.matrix,
        embedding,
        delta_min,
        delta_max,
    })
}

/// Numerical rank of `sum_l B_l^2`.
pub fn connectivity_rank(params: &BlockModelParams) -> usize {
    let k = params.k();
    let mut sum = DMatrix::zeros(k, k);
    for l in 0..params.layer_count() {
        let b = params.connectivity_matrix(l);
        sum += &b * &b;
    }
    let eig = SymmetricEigen::new(sum);
    let scale = eig.eigenvalues.amax();
    eig.eigenvalues.iter().filter(|v| v.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE)).count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunityDistance {
    pub a: usize,
    pub b: usize,
    pub squared: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowStructureReport {
    pub passed: bool,
    pub k: usize,
    pub rank: usize,
    pub rank_deficient: bool,
    /// Largest squared distance between two rows of the same community.
    pub within_deviation: f64,
    pub within_pair: Option<(usize, usize)>,
    /// Largest `|d^2 - expected|` between community representatives.
    pub between_deviation: f64,
    pub between_pair: Option<(usize, usize)>,
    pub distances: Vec<CommunityDistance>,
}

/// Rows of `U` coincide within communities and sit `sqrt(1/n_a + 1/n_b)` apart.
pub fn check_community_rows(pop: &PopulationLaplacian, params: &BlockModelParams, z: &Partition) -> RowStructureReport {
    let sizes = z.sizes();
    check_rows(pop.vectors(), z, connectivity_rank(params), |a, b| {
        1.0 / sizes[a] as f64 + 1.0 / sizes[b] as f64
    })
}

/// Rows of the row-normalized `U` coincide within communities and sit
/// `sqrt(2)` apart.
pub fn check_normalized_rows(pop: &PopulationLaplacian, params: &BlockModelParams, z: &Partition) -> RowStructureReport {
    let normalized = row_normalize(&pop.embedding);
    check_rows(&normalized.vectors, z, connectivity_rank(params), |_, _| 2.0)
}

fn sq_dist(u: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (u.row(i) - u.row(j)).norm_squared()
}

fn check_rows(u: &DMatrix<f64>, z: &Partition, rank: usize, expected: impl Fn(usize, usize) -> f64) -> RowStructureReport {
    let k = z.k();
    let reps: Vec<usize> = (0..k).map(|c| z.members(c).first().copied().unwrap_or(0)).collect();
    let mut within = (0.0, None);
    for (i, &c) in z.labels().iter().enumerate() {
        let d = sq_dist(u, reps[c], i);
        if d > within.0 {
            within = (d, Some((reps[c], i)));
        }
    }
    let mut between = (0.0, None);
    let mut distances = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let d = sq_dist(u, reps[a], reps[b]);
            let want = expected(a, b);
            let dev = (d - want).abs();
            if dev > between.0 || between.1.is_none() {
                between = (dev, Some((reps[a], reps[b])));
            }
            distances.push(CommunityDistance { a, b, squared: d, expected: want });
        }
    }
    let rank_deficient = rank < k;
    RowStructureReport {
        passed: !rank_deficient && within.0 <= ROW_TOL && between.0 <= ROW_TOL,
        k,
        rank,
        rank_deficient,
        within_deviation: within.0,
        within_pair: within.1,
        between_deviation: between.0,
        between_pair: between.1,
        distances,
    }
}

/// Three-layer, three-community MLSBM on 20 nodes (sizes 10, 4, 6, `rho = 1`).
pub fn example_mlsbm() -> BlockModelParams {
    BlockModelParams::mlsbm(Partition::from_sizes(&[10, 4, 6]), 1.0, example_connectivity())
        .expect("valid example parameters")
}

/// The same connectivity with degree heterogeneity `theta(i) = 1 - 0.04 i`.
pub fn example_mldcsbm() -> BlockModelParams {
    let theta = (0..20).map(|i| 1.0 - 0.04 * i as f64).collect();
    BlockModelParams::mldcsbm(Partition::from_sizes(&[10, 4, 6]), theta, example_connectivity())
        .expect("valid example parameters")
}

fn example_connectivity() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(3, 3, &[0.9, 0.2, 0.5, 0.2, 0.6, 0.4, 0.5, 0.4, 0.1]),
        DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 0.8, 0.1, 0.2, 0.1, 0.7]),
        DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.3, 0.7, 0.2, 0.2, 0.2, 0.8]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{sample, DegreeModel};
    use crate::kmeans::KmeansOptions;
    use crate::spectral::{detect_aggregate, DetectOptions, MethodId};
    use crate::rng;
    use proptest::prelude::*;

    fn random_params(n: usize, k: usize, layers: usize, dc: bool, seed: u64) -> BlockModelParams {
        let mut r = rng::stream(seed, 0);
        let sizes: Vec<usize> = (0..k).map(|c| n / k + usize::from(c < n % k)).collect();
        let z = Partition::from_sizes(&sizes);
        let bs: Vec<DMatrix<f64>> = (0..layers)
            .map(|_| {
                let a = DMatrix::from_fn(k, k, |_, _| 0.05 + 0.95 * rng::unit(&mut r));
                (&a + a.transpose()) * 0.5
            })
            .collect();
        let degree = if dc {
            DegreeModel::Heterogeneous((0..n).map(|_| 0.05 + 0.95 * rng::unit(&mut r)).collect())
        } else {
            DegreeModel::Sparsity(0.5)
        };
        BlockModelParams::new(z, bs, degree).unwrap()
    }

    #[test]
    fn example_row_distances() {
        let params = example_mlsbm();
        let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
        let u = pop.vectors();
        let d = |i, j| sq_dist(u, i, j).sqrt();
        assert!((d(0, 10) - 0.5916).abs() < 1e-3);
        assert!((d(0, 14) - 0.5164).abs() < 1e-3);
        assert!((d(10, 14) - 0.6455).abs() < 1e-3);
        let report = check_community_rows(&pop, &params, &params.membership);
        assert!(report.passed, "{report:?}");
        assert!(pop.embedding.eigenvalues.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn example_dc_distances() {
        let params = example_mldcsbm();
        let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
        let report = check_normalized_rows(&pop, &params, &params.membership);
        assert!(report.passed, "{report:?}");
        for d in &report.distances {
            assert!((d.squared.sqrt() - 2f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_community() {
        let params = BlockModelParams::mlsbm(Partition::single(5), 0.3, vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        let omega = expected_adjacency(&params).unwrap();
        assert!(omega[0].iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
        assert_eq!(pop.vectors().ncols(), 1);
        let report = check_community_rows(&pop, &params, &params.membership);
        assert!(report.within_deviation < 1e-20);
        assert!(report.distances.is_empty());
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let b = DMatrix::from_element(3, 3, 0.5);
        let params = BlockModelParams::mlsbm(Partition::from_sizes(&[4, 4, 4]), 1.0, vec![b; 2]).unwrap();
        let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
        let report = check_community_rows(&pop, &params, &params.membership);
        assert_eq!(report.rank, 1);
        assert!(report.rank_deficient);
        assert!(!report.passed);
    }

    #[test]
    fn constant_theta_still_root_two() {
        let mut params = example_mldcsbm();
        params.degree = DegreeModel::Heterogeneous(vec![0.7; 20]);
        let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
        assert!(check_normalized_rows(&pop, &params, &params.membership).passed);
    }

    #[test]
    fn hollow_expectation_matches_direct_sum() {
        let params = example_mlsbm();
        let omega = expected_adjacency(&params).unwrap();
        let mean = expected_debiased_sos(&params).unwrap();
        // Direct formula: sum over intermediate nodes other than i and j.
        let n = 20;
        for (i, j) in [(0, 1), (0, 10), (3, 17), (12, 19)] {
            let direct: f64 = omega
                .iter()
                .map(|o| (0..n).filter(|&m| m != i && m != j).map(|m| o[(i, m)] * o[(m, j)]).sum::<f64>())
                .sum();
            assert!((mean[(i, j)] - direct).abs() < 1e-12);
        }
        assert!(mean.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn population_pipeline_is_exact() {
        let opts = DetectOptions {
            kmeans: KmeansOptions { restarts: 10, max_iters: 100 },
            ..Default::default()
        };
        for (params, method) in [(example_mlsbm(), MethodId::Rdsos), (example_mldcsbm(), MethodId::DcRdsos)] {
            let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
            let det = detect_aggregate(&pop.aggregate(), 3, method, &opts, 0).unwrap();
            assert!(det.partition.same_up_to_permutation(&params.membership));
        }
    }

    #[test]
    fn sampled_mean_approaches_population() {
        let params = BlockModelParams::mlsbm(
            Partition::from_sizes(&[5, 5]),
            0.6,
            vec![DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.7]); 2],
        )
        .unwrap();
        let (mean, var) = debiased_sos_moments(&params).unwrap();
        let reps = 400;
        let mut acc = DMatrix::zeros(10, 10);
        for seed in 0..reps {
            let (net, _) = sample(&params, seed).unwrap();
            acc += aggregation::debiased_sos(&net).matrix();
        }
        acc /= reps as f64;
        for i in 0..10 {
            for j in 0..10 {
                let sd = (var[(i, j)] / reps as f64).sqrt();
                assert!((acc[(i, j)] - mean[(i, j)]).abs() <= 4.0 * sd + 1e-12, "({i},{j})");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_full_rank_models_pass(seed in 0u64..10_000, dc in any::<bool>()) {
            let params = random_params(30, 3, 3, dc, seed);
            prop_assume!(connectivity_rank(&params) == 3);
            let pop = population_laplacian(&params, TauSpec::Auto).unwrap();
            let report = if dc {
                check_normalized_rows(&pop, &params, &params.membership)
            } else {
                check_community_rows(&pop, &params, &params.membership)
            };
            prop_assert!(report.passed, "{:?}", report);
            prop_assert!(pop.embedding.eigenvalues.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }
}
