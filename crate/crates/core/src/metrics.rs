//! Agreement between an estimated partition and a reference partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Partition;

pub const MAX_PERMUTATION_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clustering_error: f64,
    pub hamming_error: f64,
    pub ari: f64,
    pub nmi: f64,
    /// `best_permutation[a]` is the estimated label matched to reference community `a`
    /// under the clustering-error optimum.
    pub best_permutation: Vec<usize>,
}

pub fn evaluate(truth: &Partition, est: &Partition) -> Result<MetricReport> {
    let (clustering_error, best_permutation) = clustering_error_with_permutation(truth, est)?;
    Ok(MetricReport {
        clustering_error,
        hamming_error: hamming_error(truth, est)?,
        ari: ari(truth, est)?,
        nmi: nmi(truth, est)?,
        best_permutation,
    })
}

/// Confusion counts `c[a][b] = |{i : truth(i) = a, est(i) = b}|`, padded to
/// `size x size`.
fn contingency(truth: &Partition, est: &Partition, size: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != est.len() {
        return Err(Error::LengthMismatch(truth.len(), est.len()));
    }
    let mut c = vec![vec![0usize; size]; size];
    for (&a, &b) in truth.labels().iter().zip(est.labels()) {
        c[a][b] += 1;
    }
    Ok(c)
}

pub fn clustering_error(truth: &Partition, est: &Partition) -> Result<f64> {
    clustering_error_with_permutation(truth, est).map(|(e, _)| e)
}

/// Minimum over label bijections `p` of
/// `max_a (|C_a \ E_p(a)| + |E_p(a) \ C_a|) / |C_a|`.
pub fn clustering_error_with_permutation(truth: &Partition, est: &Partition) -> Result<(f64, Vec<usize>)> {
    let k = truth.k();
    if est.k() > k {
        return Err(Error::LabelCountMismatch { truth: k, est: est.k() });
    }
    if k > MAX_PERMUTATION_K {
        return Err(Error::UnsupportedK(k));
    }
    let c = contingency(truth, est, k)?;
    let truth_sizes = truth.sizes();
    if let Some(empty) = truth_sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCommunity(empty));
    }
    let est_sizes = est.sizes();
    let cost = |a: usize, b: usize| -> f64 {
        let est_size = est_sizes.get(b).copied().unwrap_or(0);
        let miss = truth_sizes[a] - c[a][b];
        let extra = est_size - c[a][b];
        (miss + extra) as f64 / truth_sizes[a] as f64
    };
    let table: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| cost(a, b)).collect()).collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; k];
    search(&table, &mut current, &mut used, 0.0, &mut best);
    Ok(best)
}

/// Depth-first search over permutations in lexicographic order, pruning
/// branches whose running maximum cannot beat the incumbent.
fn search(table: &[Vec<f64>], current: &mut Vec<usize>, used: &mut [bool], running: f64, best: &mut (f64, Vec<usize>)) {
    let a = current.len();
    if a == table.len() {
        if running < best.0 {
            *best = (running, current.clone());
        }
        return;
    }
    for b in 0..table.len() {
        if used[b] {
            continue;
        }
        let next = running.max(table[a][b]);
        if next >= best.0 {
            continue;
        }
        used[b] = true;
        current.push(b);
        search(table, current, used, next, best);
        current.pop();
        used[b] = false;
    }
}

/// Fraction of nodes misassigned under the best label bijection.
pub fn hamming_error(truth: &Partition, est: &Partition) -> Result<f64> {
    let size = truth.k().max(est.k());
    let c = contingency(truth, est, size)?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let cost: Vec<Vec<i64>> = c.iter().map(|row| row.iter().map(|&v| -(v as i64)).collect()).collect();
    let assignment = min_cost_assignment(&cost);
    let matched: usize = assignment.iter().enumerate().map(|(a, &b)| c[a][b]).sum();
    Ok((truth.len() - matched) as f64 / truth.len() as f64)
}

/// Hungarian algorithm with potentials on a square cost matrix; returns the
/// column assigned to each row.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    // One-based internal indexing; column 0 is a virtual start.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            rows[p[j] - 1] = j - 1;
        }
    }
    rows
}

fn choose2(x: usize) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when the expected and maximum indices
/// coincide (both partitions trivial in the same way).
pub fn ari(truth: &Partition, est: &Partition) -> Result<f64> {
    let size = truth.k().max(est.k());
    let c = contingency(truth, est, size)?;
    let n = truth.len();
    if n < 2 {
        return Ok(1.0);
    }
    let index: f64 = c.iter().flatten().map(|&v| choose2(v)).sum();
    let rows: f64 = c.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..size).map(|b| choose2(c.iter().map(|r| r[b]).sum())).sum();
    let expected = rows * cols / choose2(n);
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the geometric mean of the two entropies, natural
/// logarithms. Two single-cluster partitions score 1; otherwise zero when
/// either partition has zero entropy.
pub fn nmi(truth: &Partition, est: &Partition) -> Result<f64> {
    let size = truth.k().max(est.k());
    let c = contingency(truth, est, size)?;
    let n = truth.len() as f64;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<usize> = c.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..size).map(|b| c.iter().map(|r| r[b]).sum()).collect();
    let (hu, hv) = (entropy(&rows, n), entropy(&cols, n));
    if hu == 0.0 && hv == 0.0 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for a in 0..size {
        for b in 0..size {
            if c[a][b] > 0 {
                let pab = c[a][b] as f64 / n;
                mi += pab * (pab * n * n / (rows[a] as f64 * cols[b] as f64)).ln();
            }
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// Share of trials whose estimate equals `true_k`.
pub fn accuracy_rate(estimated: &[usize], true_k: usize) -> f64 {
    if estimated.is_empty() {
        return 0.0;
    }
    estimated.iter().filter(|&&k| k == true_k).count() as f64 / estimated.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec())
    }

    #[test]
    fn small_examples() {
        let truth = p(&[0, 0, 1, 1]);
        let est = p(&[0, 0, 0, 1]);
        assert_eq!(clustering_error(&truth, &truth).unwrap(), 0.0);
        assert_eq!(clustering_error(&truth, &p(&[1, 1, 0, 0])).unwrap(), 0.0);
        assert_eq!(clustering_error(&truth, &est).unwrap(), 0.5);
        assert_eq!(hamming_error(&truth, &est).unwrap(), 0.25);
        assert_eq!(hamming_error(&truth, &Partition::new(vec![0; 4], 2).unwrap()).unwrap(), 0.5);
        // Contingency table all ones: index 0, expected 2/3, max 2.
        assert!((ari(&truth, &p(&[0, 1, 0, 1])).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(ari(&truth, &p(&[1, 1, 0, 0])).unwrap(), 1.0);
        assert!((nmi(&truth, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nmi(&Partition::single(4), &truth).unwrap(), 0.0);
        assert_eq!(nmi(&Partition::single(4), &Partition::single(4)).unwrap(), 1.0);
    }

    #[test]
    fn clustering_error_is_asymmetric() {
        let a = p(&[0, 0, 0, 0, 1]);
        let b = p(&[0, 0, 0, 1, 1]);
        let ab = clustering_error(&a, &b).unwrap();
        let ba = clustering_error(&b, &a).unwrap();
        assert_eq!(ab, 1.0);
        assert_eq!(ba, 0.5);
    }

    #[test]
    fn errors() {
        let a = p(&[0, 1, 2]);
        assert!(matches!(clustering_error(&p(&[0, 0, 1]), &a), Err(Error::LabelCountMismatch { .. })));
        assert!(matches!(clustering_error(&a, &p(&[0, 1])), Err(Error::LengthMismatch(3, 2))));
        let big: Vec<usize> = (0..11).collect();
        assert!(matches!(clustering_error(&p(&big), &p(&big)), Err(Error::UnsupportedK(11))));
        assert_eq!(hamming_error(&p(&big), &p(&big)).unwrap(), 0.0);
        let holed = Partition::new(vec![0, 0, 2], 3).unwrap();
        assert!(matches!(clustering_error(&holed, &a), Err(Error::EmptyCommunity(1))));
    }

    #[test]
    fn accuracy() {
        assert_eq!(accuracy_rate(&[3; 5], 3), 1.0);
        assert_eq!(accuracy_rate(&[2; 5], 3), 0.0);
        assert_eq!(accuracy_rate(&[3, 3, 3, 3, 3, 3, 3, 2, 4, 5], 3), 0.7);
    }

    #[test]
    fn independent_labels_have_small_nmi() {
        let mut r = rng::stream(77, 0);
        let n = 10_000;
        let a: Vec<usize> = (0..n).map(|_| (rng::unit(&mut r) * 3.0) as usize).collect();
        let b: Vec<usize> = (0..n).map(|_| (rng::unit(&mut r) * 3.0) as usize).collect();
        assert!(nmi(&p(&a), &p(&b)).unwrap() < 0.05);
    }

    #[test]
    fn assignment_matches_exhaustive_search() {
        let mut r = rng::stream(3, 0);
        for _ in 0..50 {
            let k = 1 + (rng::unit(&mut r) * 6.0) as usize;
            let cost: Vec<Vec<i64>> =
                (0..k).map(|_| (0..k).map(|_| (rng::unit(&mut r) * 20.0) as i64 - 10).collect()).collect();
            let got: i64 = min_cost_assignment(&cost).iter().enumerate().map(|(a, &b)| cost[a][b]).sum();
            let mut best = i64::MAX;
            let mut perm: Vec<usize> = (0..k).collect();
            permutations(&mut perm, 0, &mut |q| {
                best = best.min(q.iter().enumerate().map(|(a, &b)| cost[a][b]).sum());
            });
            assert_eq!(got, best);
        }
    }

    fn permutations(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
        if i == v.len() {
            f(v);
            return;
        }
        for j in i..v.len() {
            v.swap(i, j);
            permutations(v, i + 1, f);
            v.swap(i, j);
        }
    }

    fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..4, n),
                proptest::collection::vec(0usize..4, n),
                Just((0..4).rev().collect::<Vec<usize>>()),
            )
        })
    }

    proptest! {
        #[test]
        fn relabeling_invariance((a, b, relabel) in labels_strategy()) {
            let truth = p(&a).canonical();
            let est = p(&b).canonical();
            let renamed = Partition::new(b.iter().map(|&x| relabel[x]).collect(), 4).unwrap();
            prop_assert_eq!(hamming_error(&truth, &est).unwrap(), hamming_error(&truth, &renamed).unwrap());
            prop_assert!((ari(&truth, &est).unwrap() - ari(&truth, &renamed).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&truth, &est).unwrap() - nmi(&truth, &renamed).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&truth, &est).unwrap() - ari(&est, &truth).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&truth, &est).unwrap() - nmi(&est, &truth).unwrap()).abs() < 1e-12);
            prop_assert_eq!(hamming_error(&truth, &est).unwrap(), hamming_error(&est, &truth).unwrap());
            let h = hamming_error(&truth, &est).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
            prop_assert!(ari(&truth, &est).unwrap() <= 1.0 + 1e-12);
            if est.k() <= truth.k() {
                let ce = clustering_error(&truth, &est).unwrap();
                prop_assert!(ce >= 0.0);
                prop_assert_eq!(ce == 0.0, h == 0.0);
                prop_assert_eq!(h == 0.0, truth.same_up_to_permutation(&est));
            }
        }
    }
}
