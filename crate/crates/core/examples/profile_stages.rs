use std::time::Instant;

use nalgebra::DMatrix;
use rdsos::aggregation::{debiased_sos, default_tau, regularized_laplacian};
use rdsos::eigen::{leading_eigs_with, EigenSolver};
use rdsos::generators::{sample, BlockModelParams};
use rdsos::kmeans::{kmeans, KmeansOptions};
use rdsos::Partition;

fn main() {
    let n: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().unwrap());
    let z = Partition::from_sizes(&[n / 2, n / 5, n - n / 2 - n / 5]);
    let b = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.9]);
    let p = BlockModelParams::mlsbm(z, 0.04, vec![b; 10]).unwrap();
    let t = Instant::now();
    let (net, _) = sample(&p, 1).unwrap();
    println!("sample {:?}", t.elapsed());
    let t = Instant::now();
    let s = debiased_sos(&net);
    println!("aggregate {:?}", t.elapsed());
    let t = Instant::now();
    let l = regularized_laplacian(&s, default_tau(&s)).unwrap();
    println!("laplacian {:?}", t.elapsed());
    for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
        let t = Instant::now();
        let e = leading_eigs_with(&l.matrix, 3, solver).unwrap();
        println!("{solver:?} {:?}", t.elapsed());
        let t = Instant::now();
        kmeans(&e.vectors, 3, &KmeansOptions::default(), 0).unwrap();
        println!("kmeans {:?}", t.elapsed());
    }
}
