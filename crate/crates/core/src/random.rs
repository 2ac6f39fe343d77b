//! Seeded random states and operators for tests and sweeps.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::LatticeSpec;
use crate::linalg::{self, c64, CMat};
use crate::states::DensityOperator;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unit vector of length `n`.
pub fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<c64> {
    loop {
        let v: Vec<c64> = (0..n).map(|_| gaussian(rng)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum::<f64>());
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Haar-random pure state on the full lattice.
pub fn pure_state<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> DensityOperator {
    let v = unit_vector(spec.hilbert_dim(), rng);
    let m = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    DensityOperator::mixture(*spec, vec![1.0], Arc::new(m), true)
}

/// Product of independent Haar-random single-site states.
pub fn product_state<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> DensityOperator {
    let locals: Vec<Vec<c64>> = (0..spec.sites()).map(|_| unit_vector(spec.local_dim(), rng)).collect();
    DensityOperator::product(spec, &locals).expect("local vectors match the lattice")
}

/// Full-rank state `G G^dagger / tr` with Gaussian `G` (Hilbert-Schmidt
/// measure).
pub fn mixed_state<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> DensityOperator {
    let d = spec.hilbert_dim();
    let g = Mat::from_fn(d, d, |_, _| gaussian(rng));
    let mut m = linalg::matmul_adj(g.as_ref(), g.as_ref());
    let tr = linalg::trace(m.as_ref()).re;
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] /= tr;
        }
    }
    DensityOperator::from_matrix_unchecked(*spec, linalg::hermitian_part(m.as_ref()))
}

/// Gaussian Hermitian matrix `(G + G^dagger) / 2`.
pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = Mat::from_fn(n, n, |_, _| gaussian(rng));
    linalg::hermitian_part(g.as_ref())
}

/// Hermitian unitary with random eigenbasis and random signs.
pub fn hermitian_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    linalg::hermitian_sign(hermitian(n, rng).as_ref()).expect("small Hermitian eigensolve")
}
