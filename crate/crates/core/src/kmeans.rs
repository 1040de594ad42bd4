//! Lloyd's K-means with k-means++ seeding and independent restarts.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Partition;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 100,
            max_iters: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    pub partition: Partition,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    /// Restart that produced the result.
    pub restart: usize,
    pub iterations: usize,
}

/// Clusters the rows of `points`. Restart `r` draws from stream `r` of
/// `seed`; the lowest objective wins, ties to the lowest restart.
pub fn kmeans(points: &DMatrix<f64>, k: usize, opts: &KmeansOptions, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    let runs: Vec<KmeansResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            single_run(&rows, k, opts.max_iters, &mut rng, r)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart");
    Ok(best)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let pick = |rng: &mut ChaCha8Rng, n: usize| ((rng::unit(rng) * n as f64) as usize).min(n - 1);
    let mut centers = vec![rows[pick(rng, n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng::unit(rng) * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            pick(rng, n)
        };
        let c = rows[chosen].clone();
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn centroids(rows: &[Vec<f64>], labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in rows.iter().zip(labels) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(r) {
            *s += x;
        }
    }
    for (s, &m) in sums.iter_mut().zip(&counts) {
        if m > 0 {
            s.iter_mut().for_each(|v| *v /= m as f64);
        }
    }
    (sums, counts)
}

/// Moves the point farthest from its centroid (among clusters with more than
/// one member) into each empty cluster.
fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centers: &mut [Vec<f64>], counts: &mut [usize]) {
    let k = centers.len();
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, r) in rows.iter().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d = sq_dist(r, &centers[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        counts[labels[i]] -= 1;
        labels[i] = empty;
        counts[empty] = 1;
        centers[empty] = rows[i].clone();
    }
}

fn single_run(rows: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut ChaCha8Rng, restart: usize) -> KmeansResult {
    let mut centers = plus_plus(rows, k, rng);
    let mut labels: Vec<usize> = rows.iter().map(|r| nearest(r, &centers).0).collect();
    let mut iterations = 0;
    loop {
        let (mut next, mut counts) = centroids(rows, &labels, k);
        if counts.contains(&0) {
            repair_empty(rows, &mut labels, &mut next, &mut counts);
            let (c, _) = centroids(rows, &labels, k);
            next = c;
        }
        centers = next;
        if iterations >= max_iters {
            break;
        }
        iterations += 1;
        let updated: Vec<usize> = rows.iter().map(|r| nearest(r, &centers).0).collect();
        if updated == labels {
            break;
        }
        labels = updated;
    }
    let objective = rows
        .iter()
        .zip(&labels)
        .map(|(r, &c)| sq_dist(r, &centers[c]))
        .sum();
    KmeansResult {
        partition: Partition::new(labels, k).expect("labels below k"),
        objective,
        restart,
        iterations,
    }
}
