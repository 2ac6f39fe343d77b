//! Density operators, Gibbs states, partial traces, distances and entropies.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef};

use crate::basis::SiteIndexer;
use crate::error::{domain, Error, Result};
use crate::lattice::{LatticeSpec, Region};
use crate::linalg::{self, c64, CMat, ZERO};
use crate::spectral::SpectralData;

/// Tolerances a valid state must meet.
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues at or below this are dropped from `-sum x ln x`.
pub const ENTROPY_CUTOFF: f64 = 1e-14;
/// Relative cutoff defining the support of the second argument of the
/// relative entropy.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) enum Repr {
    Dense(CMat),
    /// `sum_i w_i |v_i><v_i|` with unit columns `v_i`.
    Mixture { weights: Vec<f64>, vectors: Arc<CMat>, orthonormal: bool },
}

/// A mixed state on the full lattice.
///
/// Pure states and states diagonal in a known orthonormal basis (Gibbs
/// states, dephased pure states) are kept as weighted vector ensembles so
/// that no `D x D` matrix is formed unless needed.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    spec: LatticeSpec,
    repr: Repr,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(spec: LatticeSpec, m: CMat) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
        let defect = linalg::hermiticity_defect(m.as_ref());
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        let tr = linalg::trace(m.as_ref()).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(alloc::format!("trace {tr}")));
        }
        let lowest = linalg::eigvalsh(m.as_ref())?[0];
        if lowest < -POSITIVITY_TOL {
            return Err(Error::InvalidState(alloc::format!("eigenvalue {lowest}")));
        }
        Ok(Self::from_matrix_unchecked(spec, m))
    }

    pub(crate) fn from_matrix_unchecked(spec: LatticeSpec, m: CMat) -> Self {
        Self { spec, repr: Repr::Dense(m) }
    }

    pub(crate) fn mixture(spec: LatticeSpec, weights: Vec<f64>, vectors: Arc<CMat>, orthonormal: bool) -> Self {
        Self { spec, repr: Repr::Mixture { weights, vectors, orthonormal } }
    }

    /// `|psi><psi|` with `psi` normalised here.
    pub fn pure(spec: LatticeSpec, amplitudes: &[c64]) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amplitudes.len() });
        }
        let norm = libm::sqrt(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = Mat::from_fn(dim, 1, |i, _| amplitudes[i] / norm);
        Ok(Self::mixture(spec, vec![1.0], Arc::new(v), true))
    }

    /// Computational basis state with the given index.
    pub fn basis_state(spec: &LatticeSpec, index: usize) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if index >= dim {
            return Err(domain("basis index out of range"));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = linalg::ONE;
        Self::pure(*spec, &amps)
    }

    /// Basis state from per-site levels, e.g. `[0, 1, 1]`.
    pub fn from_levels(spec: &LatticeSpec, levels: &[usize]) -> Result<Self> {
        if levels.len() != spec.sites() || levels.iter().any(|&l| l >= spec.local_dim()) {
            return Err(domain("level string must give one valid level per site"));
        }
        let index = levels.iter().enumerate().map(|(s, &l)| l * spec.place_value(s)).sum();
        Self::basis_state(spec, index)
    }

    /// `|phi_0> ⊗ ... ⊗ |phi_{N-1}>` from per-site vectors.
    pub fn product(spec: &LatticeSpec, locals: &[Vec<c64>]) -> Result<Self> {
        if locals.len() != spec.sites() || locals.iter().any(|v| v.len() != spec.local_dim()) {
            return Err(domain("need one local vector of length d_loc per site"));
        }
        let mut amps = vec![linalg::ONE];
        for local in locals {
            amps = amps.iter().flat_map(|a| local.iter().map(move |b| a * b)).collect();
        }
        Self::pure(*spec, &amps)
    }

    /// `|+>^N` on qubits.
    pub fn plus_state(spec: &LatticeSpec) -> Result<Self> {
        let h = c64::new(libm::sqrt(0.5), 0.0);
        Self::product(spec, &vec![vec![h, h]; spec.sites()])
    }

    pub fn maximally_mixed(spec: &LatticeSpec) -> Self {
        let dim = spec.hilbert_dim();
        let m = Mat::from_fn(dim, dim, |i, j| if i == j { c64::new(1.0 / dim as f64, 0.0) } else { ZERO });
        Self::from_matrix_unchecked(*spec, m)
    }

    /// Ensemble `sum_i w_i |v_i><v_i|`; columns are normalised, weights
    /// must be non-negative and sum to one.
    pub fn from_ensemble(spec: LatticeSpec, weights: Vec<f64>, vectors: CMat) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if vectors.nrows() != dim || vectors.ncols() != weights.len() {
            return Err(Error::DimensionMismatch { expected: dim, found: vectors.nrows() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState("ensemble weights must be a probability vector".into()));
        }
        let mut v = vectors;
        for j in 0..v.ncols() {
            let norm = libm::sqrt((0..dim).map(|i| v[(i, j)].norm_sqr()).sum::<f64>());
            if !(norm > 0.0) {
                return Err(Error::InvalidState("zero ensemble vector".into()));
            }
            for i in 0..dim {
                v[(i, j)] /= norm;
            }
        }
        Ok(Self::mixture(spec, weights, Arc::new(v), false))
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.hilbert_dim()
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    /// The state vector when the state is stored as a single pure vector.
    pub fn pure_vector(&self) -> Option<Vec<c64>> {
        match &self.repr {
            Repr::Mixture { weights, vectors, .. } => {
                let live: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
                (live.len() == 1).then(|| (0..vectors.nrows()).map(|r| vectors[(r, live[0])]).collect())
            }
            Repr::Dense(_) => None,
        }
    }

    /// Dense `D x D` matrix.
    pub fn to_matrix(&self) -> CMat {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Mixture { weights, vectors, .. } => {
                let scaled = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * weights[j]);
                linalg::matmul_adj(scaled.as_ref(), (**vectors).as_ref())
            }
        }
    }

    /// `tr[rho op]` for a full-space operator.
    pub fn expectation(&self, op: MatRef<'_, c64>) -> Result<c64> {
        let dim = self.dim();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: op.nrows() });
        }
        Ok(match &self.repr {
            Repr::Dense(m) => linalg::trace_product(m.as_ref(), op),
            Repr::Mixture { weights, vectors, .. } => {
                let ov = linalg::matmul(op, (**vectors).as_ref());
                let mut acc = ZERO;
                for (j, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        let inner = (0..dim).fold(ZERO, |a, i| a + vectors[(i, j)].conj() * ov[(i, j)]);
                        acc += inner * w;
                    }
                }
                acc
            }
        })
    }

    /// `tr_B[rho]` with `keep`'s sites in ascending order.
    pub fn partial_trace(&self, keep: &Region) -> Result<CMat> {
        self.partial_trace_ordered(keep.sites())
    }

    /// Reduced state on `sites` with tensor factors in the listed order.
    pub fn partial_trace_ordered(&self, sites: &[usize]) -> Result<CMat> {
        let idx = SiteIndexer::new(&self.spec, sites)?;
        Ok(match &self.repr {
            Repr::Dense(m) => idx.partial_trace_dense(m.as_ref()),
            Repr::Mixture { weights, vectors, .. } => {
                let ds = idx.local_dim();
                let mut acc = Mat::zeros(ds, ds);
                let mut col = vec![ZERO; vectors.nrows()];
                for (j, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (i, c) in col.iter_mut().enumerate() {
                        *c = vectors[(i, j)];
                    }
                    idx.accumulate_pure(&mut acc, &col, w);
                }
                acc
            }
        })
    }

    /// Spectrum in descending order (zeros included up to dimension `D`
    /// only for orthonormal ensembles).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev = match &self.repr {
            Repr::Mixture { weights, orthonormal: true, .. } => weights.clone(),
            Repr::Mixture { weights, vectors, orthonormal: false } => {
                // nonzero spectrum of rho equals that of the Gram matrix
                // sqrt(W) V^dagger V sqrt(W)
                let s: Vec<f64> = weights.iter().map(|w| libm::sqrt(*w)).collect();
                let g = linalg::adj_matmul((**vectors).as_ref(), (**vectors).as_ref());
                let g = Mat::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * (s[i] * s[j]));
                linalg::eigvalsh(g.as_ref())?
            }
            Repr::Dense(m) => linalg::eigvalsh(m.as_ref())?,
        };
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => linalg::trace(m.as_ref()).re,
            Repr::Mixture { weights, .. } => weights.iter().sum(),
        }
    }

    pub fn purity(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|x| x * x).sum())
    }
}

/// Gibbs state `exp(-beta H) / Z`, sharing the eigenbasis of `H`.
#[derive(Debug, Clone)]
pub struct ThermalState {
    state: DensityOperator,
    beta: f64,
    log_partition: f64,
}

impl ThermalState {
    pub fn state(&self) -> &DensityOperator {
        &self.state
    }

    pub fn into_state(self) -> DensityOperator {
        self.state
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ln Z`; NaN at `beta = +inf`.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Boltzmann weights, one per eigenvector of `H`.
    pub fn populations(&self) -> &[f64] {
        match &self.state.repr {
            Repr::Mixture { weights, .. } => weights,
            Repr::Dense(_) => unreachable!("thermal states are ensembles"),
        }
    }
}

/// `ln sum_nu exp(-beta E_nu)` with the usual max shift.
pub fn log_partition(energies: &[f64], beta: f64) -> f64 {
    if energies.is_empty() {
        return f64::NEG_INFINITY;
    }
    let shift = energies.iter().fold(f64::INFINITY, |m, &e| m.min(e));
    let terms: Vec<f64> = energies.iter().map(|&e| libm::exp(-beta * (e - shift))).collect();
    -beta * shift + libm::log(linalg::pairwise_sum(&terms))
}

/// `rho_beta` for `beta >= 0`; `beta = +inf` gives the normalised ground
/// space projector.
pub fn thermal_state(sd: &SpectralData, beta: f64) -> Result<ThermalState> {
    if beta.is_nan() || beta < 0.0 {
        return Err(domain("beta must be a non-negative number"));
    }
    let energies = sd.energies();
    let (weights, log_z) = if beta == f64::INFINITY {
        let ground = sd.groups()[0].clone();
        let g = ground.len() as f64;
        let w = (0..energies.len()).map(|i| if ground.contains(&i) { 1.0 / g } else { 0.0 }).collect();
        (w, f64::NAN)
    } else {
        let log_z = log_partition(energies, beta);
        let w = energies.iter().map(|&e| libm::exp(-beta * e - log_z)).collect();
        (w, log_z)
    };
    let state = DensityOperator::mixture(*sd.spec(), weights, sd.vectors_arc(), true);
    Ok(ThermalState { state, beta, log_partition: log_z })
}

/// `tr_B[rho]`.
pub fn partial_trace(rho: &DensityOperator, keep: &Region) -> Result<CMat> {
    rho.partial_trace(keep)
}

/// Half the trace norm of `a - b` (orthogonal pure states are at distance
/// one).
pub fn trace_distance(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    Ok(0.5 * trace_norm_of_difference(a, b)?)
}

/// `||a - b||_1` (no factor one half).
pub fn trace_norm_of_difference(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    linalg::trace_norm_hermitian(diff.as_ref())
}

/// `||rho - tau||_S`, the trace distance of the reductions to `S`.
pub fn local_distance(rho: &DensityOperator, tau: &DensityOperator, s: &Region) -> Result<f64> {
    if rho.spec() != tau.spec() {
        return Err(domain("states live on different lattices"));
    }
    trace_distance(rho.partial_trace(s)?.as_ref(), tau.partial_trace(s)?.as_ref())
}

/// `-sum x ln x` over a spectrum.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    let terms: Vec<f64> = values.iter().filter(|&&x| x > ENTROPY_CUTOFF).map(|&x| -x * libm::log(x)).collect();
    linalg::pairwise_sum(&terms)
}

/// Von Neumann entropy in nats.
pub fn entropy(rho: &DensityOperator) -> Result<f64> {
    Ok(entropy_of_spectrum(&rho.eigenvalues()?))
}

/// Von Neumann entropy of a dense density matrix.
pub fn matrix_entropy(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(entropy_of_spectrum(&linalg::eigvalsh(m)?))
}

/// `S(tau || sigma) = tr[tau ln tau] - tr[tau ln sigma]` in nats; `+inf`
/// when `tau` has weight outside the support of `sigma`.
pub fn relative_entropy(tau: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if tau.spec() != sigma.spec() {
        return Err(domain("states live on different lattices"));
    }
    // stored ensemble weights are exact, so only a computed spectrum gets a
    // relative support cutoff
    let (s_values, s_vectors, cutoff): (Vec<f64>, Arc<CMat>, f64) = match sigma.repr() {
        Repr::Mixture { weights, vectors, orthonormal: true } => (weights.clone(), vectors.clone(), 0.0),
        _ => {
            let eig = linalg::eigh(sigma.to_matrix().as_ref())?;
            (eig.values, Arc::new(eig.vectors), SUPPORT_CUTOFF)
        }
    };
    let diag = diagonal_in_basis(tau, &s_vectors);
    relative_entropy_from_parts(entropy(tau)?, &s_values, &diag, cutoff)
}

/// Same quantity for dense matrices of any size (used for reduced states).
pub fn matrix_relative_entropy(tau: MatRef<'_, c64>, sigma: MatRef<'_, c64>) -> Result<f64> {
    if tau.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch { expected: sigma.nrows(), found: tau.nrows() });
    }
    let eig = linalg::eigh(sigma)?;
    let tu = linalg::matmul(tau, eig.vectors.as_ref());
    let diag: Vec<f64> = (0..eig.values.len())
        .map(|j| (0..tau.nrows()).fold(ZERO, |a, i| a + eig.vectors[(i, j)].conj() * tu[(i, j)]).re)
        .collect();
    relative_entropy_from_parts(matrix_entropy(tau)?, &eig.values, &diag, SUPPORT_CUTOFF)
}

fn relative_entropy_from_parts(s_tau: f64, s_values: &[f64], diag: &[f64], relative_cutoff: f64) -> Result<f64> {
    let top = s_values.iter().fold(0.0f64, |m, &x| m.max(x));
    let cutoff = relative_cutoff * top;
    let mut cross = Vec::with_capacity(s_values.len());
    let mut inside = 0.0;
    for (&s, &t) in s_values.iter().zip(diag) {
        if s > cutoff {
            cross.push(t * libm::log(s));
            inside += t;
        } else if t > 1e-10 {
            return Ok(f64::INFINITY);
        }
    }
    if 1.0 - inside > 1e-10 {
        return Ok(f64::INFINITY);
    }
    Ok(-s_tau - linalg::pairwise_sum(&cross))
}

/// `<u_j| tau |u_j>` for the columns `u_j` of `basis`.
pub(crate) fn diagonal_in_basis(tau: &DensityOperator, basis: &CMat) -> Vec<f64> {
    let dim = basis.nrows();
    match tau.repr() {
        Repr::Mixture { weights, vectors, .. } => {
            let c = linalg::adj_matmul(basis.as_ref(), (**vectors).as_ref());
            (0..basis.ncols())
                .map(|j| weights.iter().enumerate().map(|(i, w)| w * c[(j, i)].norm_sqr()).sum())
                .collect()
        }
        Repr::Dense(m) => {
            let tu = linalg::matmul(m.as_ref(), basis.as_ref());
            (0..basis.ncols())
                .map(|j| (0..dim).fold(ZERO, |a, i| a + basis[(i, j)].conj() * tu[(i, j)]).re)
                .collect()
        }
    }
}

/// `tr[H rho]` from the spectral decomposition.
pub fn energy(sd: &SpectralData, rho: &DensityOperator) -> Result<f64> {
    let p = crate::spectral::eigen_populations(sd, rho)?;
    let terms: Vec<f64> = p.iter().zip(sd.energies()).map(|(p, e)| p * e).collect();
    Ok(linalg::pairwise_sum(&terms))
}

/// `F(rho) = tr[H rho] - S(rho) / beta`.
pub fn free_energy(sd: &SpectralData, rho: &DensityOperator, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(domain("free energy needs a finite positive beta"));
    }
    Ok(energy(sd, rho)? - entropy(rho)? / beta)
}
