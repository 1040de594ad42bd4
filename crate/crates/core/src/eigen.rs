//! Leading eigenpairs of real symmetric matrices, ordered by magnitude.
//!
//! Matrices up to [`DENSE_LIMIT`] rows go through a full dense
//! decomposition (Householder tridiagonalization + implicit QR); larger ones
//! use Lanczos with full reorthogonalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rng;

pub const DENSE_LIMIT: usize = 500;

/// Residual bound: `||M v - lambda v|| <= RESIDUAL_TOL * ||M||_F`.
pub const RESIDUAL_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-10;
const LANCZOS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenSolver {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// Leading `K` eigenvectors (columns) and eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedding {
    pub vectors: DMatrix<f64>,
    /// Ordered by `|lambda|` descending, then `lambda` descending.
    pub eigenvalues: Vec<f64>,
    pub normalized: bool,
    /// Worst `||M v - lambda v|| / ||M||_F` over the returned pairs.
    pub max_relative_residual: f64,
    /// `|lambda_K| == |lambda_{K+1}|`: the leading subspace is not unique.
    pub gapless: bool,
    /// Rows left at zero by row normalization.
    pub zero_rows: Vec<usize>,
}

impl SpectralEmbedding {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Keeps the first `k` pairs. `gapless` is recomputed only when the full
    /// spectrum is known, so it is cleared here.
    pub fn truncate(&self, k: usize, next_magnitude: Option<f64>) -> SpectralEmbedding {
        let k = k.min(self.k());
        let next = next_magnitude.or_else(|| self.eigenvalues.get(k).map(|v| v.abs()));
        SpectralEmbedding {
            vectors: self.vectors.columns(0, k).into_owned(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            normalized: self.normalized,
            max_relative_residual: self.max_relative_residual,
            gapless: k > 0 && next.is_some_and(|m| magnitudes_tie(self.eigenvalues[k - 1].abs(), m)),
            zero_rows: Vec::new(),
        }
    }
}

fn magnitudes_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.max(b).max(f64::MIN_POSITIVE)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let dev = (m[(i, j)] - m[(j, i)]).abs();
            if dev > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { i, j, deviation: dev });
            }
        }
    }
    Ok(())
}

/// Flips `v` so its largest-magnitude coordinate (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Indices of `values` ordered by `(|lambda| desc, lambda desc, index asc)`.
fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    idx
}

pub fn leading_eigs_symmetric(m: &DMatrix<f64>, k: usize) -> Result<SpectralEmbedding> {
    leading_eigs_with(m, k, EigenSolver::Auto)
}

pub fn leading_eigs_with(m: &DMatrix<f64>, k: usize, solver: EigenSolver) -> Result<SpectralEmbedding> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { k, n });
    }
    check_symmetric(m)?;
    let use_dense = match solver {
        EigenSolver::Auto => n <= DENSE_LIMIT,
        EigenSolver::Dense => true,
        EigenSolver::Lanczos => false,
    };
    let (values, mut vectors, next) = if use_dense { dense(m, k) } else { lanczos(m, k) };
    for mut col in vectors.column_iter_mut() {
        fix_sign(col.as_mut_slice());
    }
    let norm = m.norm();
    let mut worst: f64 = 0.0;
    for (idx, &lambda) in values.iter().enumerate() {
        let v = vectors.column(idx);
        let residual = (m * v - v * lambda).norm();
        let bound = RESIDUAL_TOL * norm;
        if residual > bound {
            return Err(Error::EigenResidual { index: idx, residual, bound });
        }
        if norm > 0.0 {
            worst = worst.max(residual / norm);
        }
    }
    let gapless = next.is_some_and(|nx| magnitudes_tie(values[k - 1].abs(), nx));
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues: values,
        normalized: false,
        max_relative_residual: worst,
        gapless,
        zero_rows: Vec::new(),
    })
}

/// Returns the leading `k` pairs plus `|lambda_{k+1}|` when known.
fn dense(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>, Option<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = magnitude_order(&all);
    let values = order[..k].iter().map(|&i| all[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    let next = order.get(k).map(|&i| all[i].abs());
    (values, vectors, next)
}

fn lanczos(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>, Option<f64>) {
    let n = m.nrows();
    let norm = m.norm();
    let tol = LANCZOS_TOL * norm.max(f64::MIN_POSITIVE);
    let mut start_rng = rng::stream(0x1a2c_2005, 0);
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_fn(n, |_, _| rng::unit(&mut start_rng) - 0.5);
            orthogonalize(&mut v, basis);
            orthogonalize(&mut v, basis);
            let len = v.norm();
            if len > 1e-8 {
                return Some(v / len);
            }
        }
        None
    };

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut current = random_unit(&basis).expect("nonzero start vector");
    let mut beta_prev = 0.0;
    let mut target = n.min((2 * k + 20).max(40));

    loop {
        while basis.len() < target {
            let j = basis.len();
            let mut w = m * &current;
            let alpha = current.dot(&w);
            w.axpy(-alpha, &current, 1.0);
            if j > 0 {
                w.axpy(-beta_prev, &basis[j - 1], 1.0);
            }
            basis.push(current.clone());
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &basis);
            alphas.push(alpha);
            let beta = w.norm();
            if basis.len() == n {
                break;
            }
            if beta <= 1e-12 * norm.max(f64::MIN_POSITIVE) {
                // Invariant subspace: continue in a fresh orthogonal direction.
                match random_unit(&basis) {
                    Some(v) => current = v,
                    None => break,
                }
                betas.push(0.0);
                beta_prev = 0.0;
            } else {
                current = w / beta;
                betas.push(beta);
                beta_prev = beta;
            }
        }
        let dim = basis.len();
        let tri = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let ritz: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let order = magnitude_order(&ritz);
        let tail_beta = if dim < n { betas.get(dim - 1).copied().unwrap_or(0.0) } else { 0.0 };
        let converged = order[..k.min(dim)]
            .iter()
            .all(|&i| (tail_beta * eig.eigenvectors[(dim - 1, i)]).abs() <= tol);
        if (converged && dim >= k) || dim == n {
            let values: Vec<f64> = order[..k].iter().map(|&i| ritz[i]).collect();
            let mut vectors = DMatrix::zeros(n, k);
            for (c, &i) in order[..k].iter().enumerate() {
                let mut col = DVector::zeros(n);
                for (q, b) in basis.iter().enumerate() {
                    col.axpy(eig.eigenvectors[(q, i)], b, 1.0);
                }
                let len = col.norm();
                vectors.set_column(c, &(col / len));
            }
            let next = if dim == n { order.get(k).map(|&i| ritz[i].abs()) } else { None };
            return (values, vectors, next);
        }
        target = n.min(target * 2);
    }
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for b in basis {
        let c = b.dot(v);
        v.axpy(-c, b, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi rotations: an independent full decomposition oracle.
    fn jacobi_oracle(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = m.nrows();
        let mut a = m.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }

    fn projector(vectors: &DMatrix<f64>) -> DMatrix<f64> {
        vectors * vectors.transpose()
    }

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream(seed, 0);
        let a = DMatrix::from_fn(n, n, |_, _| rng::unit(&mut r) * 2.0 - 1.0);
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn identity_and_magnitude_order() {
        let e = leading_eigs_symmetric(&DMatrix::identity(3, 3), 2).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        assert!(e.gapless);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 1.0]));
        let e = leading_eigs_symmetric(&d, 2).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] + 2.0).abs() < 1e-14);
        assert!(!e.gapless);
        // sign rule: dominant coordinate positive
        assert!(e.vectors[(0, 0)] > 0.0 && e.vectors[(1, 1)] > 0.0);
    }

    #[test]
    fn ties_prefer_positive_eigenvalue() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.5, 2.0]));
        let e = leading_eigs_symmetric(&d, 1).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0]);
        assert!(e.gapless);
    }

    #[test]
    fn errors() {
        let m = DMatrix::identity(3, 3);
        assert!(matches!(leading_eigs_symmetric(&m, 4), Err(Error::TooManyEigenpairs { .. })));
        assert!(matches!(leading_eigs_symmetric(&m, 0), Err(Error::TooManyEigenpairs { .. })));
        let mut asym = DMatrix::identity(3, 3);
        asym[(0, 2)] = 0.5;
        assert!(matches!(leading_eigs_symmetric(&asym, 1), Err(Error::NotSymmetric { .. })));
        let mut tiny = DMatrix::identity(3, 3);
        tiny[(0, 2)] = 1e-13;
        assert!(leading_eigs_symmetric(&tiny, 1).is_ok());
    }

    #[test]
    fn orthonormal_columns() {
        let m = random_symmetric(30, 5);
        for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
            let e = leading_eigs_with(&m, 6, solver).unwrap();
            let gram = e.vectors.transpose() * &e.vectors;
            assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-8);
            for w in e.eigenvalues.windows(2) {
                assert!(w[0].abs() >= w[1].abs());
            }
        }
    }

    #[test]
    fn matches_jacobi_oracle() {
        for seed in 0..20u64 {
            let n = 4 + (seed as usize * 3) % 29;
            let k = 1 + (seed as usize) % n.min(5);
            let m = random_symmetric(n, 100 + seed);
            let (vals, vecs) = jacobi_oracle(&m);
            let order = magnitude_order(&vals);
            let want = DMatrix::from_fn(n, k, |r, c| vecs[(r, order[c])]);
            for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
                let e = leading_eigs_with(&m, k, solver).unwrap();
                let diff = (projector(&e.vectors) - projector(&want)).amax();
                assert!(diff < 1e-8, "seed {seed} {solver:?}: {diff}");
                for (c, &i) in order[..k].iter().enumerate() {
                    assert!((e.eigenvalues[c] - vals[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lanczos_on_low_rank_matrix() {
        // Rank-3 PSD matrix: the Krylov space collapses after three steps.
        let n = 60;
        let u = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 2)) % 7) as f64 - 3.0 + j as f64 * 0.1);
        let m = &u * u.transpose();
        let dense = leading_eigs_with(&m, 3, EigenSolver::Dense).unwrap();
        let lz = leading_eigs_with(&m, 3, EigenSolver::Lanczos).unwrap();
        assert!((projector(&dense.vectors) - projector(&lz.vectors)).amax() < 1e-8);
        let lz4 = leading_eigs_with(&m, 5, EigenSolver::Lanczos).unwrap();
        assert!(lz4.eigenvalues[3].abs() < 1e-8 * m.norm());
    }

    #[test]
    fn truncation_matches_direct_call() {
        let m = random_symmetric(25, 9);
        let full = leading_eigs_symmetric(&m, 8).unwrap();
        let direct = leading_eigs_symmetric(&m, 3).unwrap();
        let cut = full.truncate(3, None);
        assert_eq!(cut.vectors, direct.vectors);
        assert_eq!(cut.eigenvalues, direct.eigenvalues);
    }
}
