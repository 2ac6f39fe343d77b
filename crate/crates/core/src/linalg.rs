//! Thin helpers over `faer` for the dense complex matrices used throughout.

use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::matmul::matmul as faer_matmul;
use faer::{Accum, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Dense complex matrix (column-major).
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[inline]
pub(crate) fn par() -> faer::Par {
    faer::get_global_parallelism()
}

/// Modulus of a complex number.
#[inline]
pub fn cabs(z: c64) -> f64 {
    libm::hypot(z.re, z.im)
}

#[inline]
pub fn cis(theta: f64) -> c64 {
    c64::new(libm::cos(theta), libm::sin(theta))
}

/// Real and imaginary parts of `m` (or of `m^dagger`); the imaginary part
/// is absent when `m` is real.
fn split(m: MatRef<'_, c64>, adjoint: bool) -> (Mat<f64>, Option<Mat<f64>>) {
    let (r, c) = if adjoint { (m.ncols(), m.nrows()) } else { (m.nrows(), m.ncols()) };
    let at = |i: usize, j: usize| if adjoint { m[(j, i)].conj() } else { m[(i, j)] };
    let re = Mat::from_fn(r, c, |i, j| at(i, j).re);
    let im = (!is_real(m)).then(|| Mat::from_fn(r, c, |i, j| at(i, j).im));
    (re, im)
}

fn real_product(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    faer_matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), 1.0, par());
    out
}

/// Below this output extent the real split costs more than it saves.
const REAL_SPLIT_MIN: usize = 64;

/// `op(a) * op(b)`; when either factor is real and the product is large,
/// it runs in real arithmetic.
fn product(a: MatRef<'_, c64>, adj_a: bool, b: MatRef<'_, c64>, adj_b: bool) -> CMat {
    let rows = if adj_a { a.ncols() } else { a.nrows() };
    let cols = if adj_b { b.nrows() } else { b.ncols() };
    let split_worthwhile = rows.min(cols) >= REAL_SPLIT_MIN;
    if !split_worthwhile || (!is_real(a) && !is_real(b)) {
        let mut out = Mat::zeros(rows, cols);
        match (adj_a, adj_b) {
            (false, false) => faer_matmul(out.as_mut(), Accum::Replace, a, b, ONE, par()),
            (true, false) => faer_matmul(out.as_mut(), Accum::Replace, a.adjoint(), b, ONE, par()),
            (false, true) => faer_matmul(out.as_mut(), Accum::Replace, a, b.adjoint(), ONE, par()),
            (true, true) => faer_matmul(out.as_mut(), Accum::Replace, a.adjoint(), b.adjoint(), ONE, par()),
        }
        return out;
    }
    let (ar, ai) = split(a, adj_a);
    let (br, bi) = split(b, adj_b);
    let re = real_product(&ar, &br);
    let im = match (&ai, &bi) {
        (None, Some(bi)) => Some(real_product(&ar, bi)),
        (Some(ai), None) => Some(real_product(ai, &br)),
        _ => None,
    };
    match im {
        Some(im) => Mat::from_fn(rows, cols, |i, j| c64::new(re[(i, j)], im[(i, j)])),
        None => Mat::from_fn(rows, cols, |i, j| c64::new(re[(i, j)], 0.0)),
    }
}

/// `a * b`.
pub fn matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    product(a, false, b, false)
}

/// `a^dagger * b`.
pub fn adj_matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    product(a, true, b, false)
}

/// `a * b^dagger`.
pub fn matmul_adj(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    product(a, false, b, true)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max(cabs(d));
        }
    }
    worst
}

pub fn is_real(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(cabs(m[(i, j)]));
        }
    }
    worst
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).fold(ZERO, |a, b| a + b)
}

/// `tr[a b]` without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Kronecker product with `a` on the more significant digits.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn dagger(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn hermitian_part(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Hermitian eigendecomposition; uses the real symmetric solver when every
/// entry is real. Only the lower triangle is read.
pub fn eigh(m: MatRef<'_, c64>) -> Result<HermitianEigen> {
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEigen { values: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    if is_real(m) {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = real.as_ref().self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
        let values = (0..n).map(|i| evd.S()[i]).collect();
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok(HermitianEigen { values, vectors })
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
        let values = (0..n).map(|i| evd.S()[i].re).collect();
        Ok(HermitianEigen { values, vectors: evd.U().to_owned() })
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)].re]);
    }
    if n == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = cabs(m[(1, 0)]);
        let mid = 0.5 * (a + d);
        let rad = libm::hypot(0.5 * (a - d), b);
        return Ok(vec![mid - rad, mid + rad]);
    }
    if is_real(m) {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        real.as_ref().self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::NoConvergence)
    } else {
        m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::NoConvergence)
    }
}

/// Sum of absolute eigenvalues of a Hermitian matrix (the raw trace norm).
pub fn trace_norm_hermitian(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(eigvalsh(m)?.iter().map(|x| x.abs()).sum())
}

/// Spectral norm of a Hermitian matrix.
pub fn opnorm_hermitian(m: MatRef<'_, c64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for comp in connected_components(m) {
        let sub = Mat::from_fn(comp.len(), comp.len(), |a, b| m[(comp[a], comp[b])]);
        let ev = eigvalsh(sub.as_ref())?;
        worst = worst.max(ev.first().map_or(0.0, |lo| lo.abs().max(ev[ev.len() - 1].abs())));
    }
    Ok(worst)
}

/// Basis indices grouped by the connectivity of the nonzero pattern of the
/// lower triangle.
pub fn connected_components(m: MatRef<'_, c64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..n {
        for i in j + 1..n {
            if m[(i, j)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if label[root] == usize::MAX {
            label[root] = out.len();
            out.push(Vec::new());
        }
        out[label[root]].push(i);
    }
    out
}

/// Spectral norm of an arbitrary square matrix. Hermitian and
/// anti-Hermitian inputs go through the (cheaper) eigenvalue route.
pub fn opnorm(m: MatRef<'_, c64>) -> Result<f64> {
    let scale = max_abs(m).max(1e-300);
    if hermiticity_defect(m) <= 1e-13 * scale {
        return opnorm_hermitian(m);
    }
    let i_m = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c64::new(0.0, 1.0));
    if hermiticity_defect(i_m.as_ref()) <= 1e-13 * scale {
        return opnorm_hermitian(i_m.as_ref());
    }
    let sv = m.singular_values().map_err(|_| Error::NoConvergence)?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// `sign(m)` for a Hermitian `m`: the unitary `V sign(Λ) V^dagger`, with
/// zero eigenvalues mapped to +1.
pub fn hermitian_sign(m: MatRef<'_, c64>) -> Result<CMat> {
    let eig = eigh(m)?;
    let n = m.nrows();
    let scaled = Mat::from_fn(n, n, |i, j| {
        let s = if eig.values[j] < 0.0 { -1.0 } else { 1.0 };
        eig.vectors[(i, j)] * s
    });
    Ok(matmul_adj(scaled.as_ref(), eig.vectors.as_ref()))
}

/// Pairwise (cascade) summation; order-deterministic and accurate.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pauli_x() -> CMat {
    Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO })
}

pub fn pauli_y() -> CMat {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c64::new(0.0, -1.0),
        (1, 0) => c64::new(0.0, 1.0),
        _ => ZERO,
    })
}

/// `diag(1, -1)`: level 0 is spin up.
pub fn pauli_z() -> CMat {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => ONE,
        (1, 1) => -ONE,
        _ => ZERO,
    })
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { ZERO })
}
