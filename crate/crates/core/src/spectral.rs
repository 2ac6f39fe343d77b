//! Eigendecomposition, degeneracy groups, the gap census, dephasing and
//! unitary evolution.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use faer::{Mat, MatRef};

use crate::error::{domain, Error, Result};
use crate::lattice::LatticeSpec;
use crate::linalg::{self, c64, CMat, ZERO};
use crate::operators::LocalHamiltonian;
use crate::states::{DensityOperator, Repr};

/// Largest Hilbert space dimension accepted by [`diagonalize`].
pub const DEFAULT_DIM_CAP: usize = 1 << 14;
/// Upper limit on the default averaging horizon.
pub const HORIZON_CAP: f64 = 1e7;

/// Default level-clustering threshold `1e-10 max(1, ||H||)`.
pub fn default_tol_deg(norm: f64) -> f64 {
    1e-10 * norm.max(1.0)
}

/// Default gap-clustering threshold `1e-9 max(1, ||H||)`.
pub fn default_tol_gap(norm: f64) -> f64 {
    1e-9 * norm.max(1.0)
}

/// Spectrum and eigenbasis of a Hamiltonian, eigenvalues ascending and
/// grouped into (numerically) degenerate levels.
#[derive(Debug, Clone)]
pub struct SpectralData {
    spec: LatticeSpec,
    energies: Vec<f64>,
    vectors: Arc<CMat>,
    groups: Vec<Range<usize>>,
    group_of: Vec<usize>,
    tol_deg: f64,
    norm: f64,
}

impl SpectralData {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, in the order of [`Self::energies`].
    pub fn vectors(&self) -> MatRef<'_, c64> {
        (*self.vectors).as_ref()
    }

    pub(crate) fn vectors_arc(&self) -> Arc<CMat> {
        self.vectors.clone()
    }

    /// Contiguous index ranges of the degenerate levels.
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Level index of every eigenvector.
    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn level_count(&self) -> usize {
        self.groups.len()
    }

    pub fn tol_deg(&self) -> f64 {
        self.tol_deg
    }

    /// `||H|| = max |E|`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Mean energy of each level.
    pub fn level_energies(&self) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| self.energies[g.clone()].iter().sum::<f64>() / g.len() as f64)
            .collect()
    }

    pub fn level_ranks(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    /// Same eigenbasis, re-clustered with another threshold.
    pub fn regrouped(&self, tol_deg: f64) -> Self {
        let (groups, group_of) = cluster_levels(&self.energies, tol_deg);
        Self { groups, group_of, tol_deg, ..self.clone() }
    }

    /// True when `rho` is stored as an ensemble over exactly this eigenbasis
    /// (Gibbs states built from this decomposition).
    pub fn is_diagonal_ensemble(&self, rho: &DensityOperator) -> bool {
        matches!(rho.repr(), Repr::Mixture { vectors, .. } if Arc::ptr_eq(vectors, &self.vectors))
    }
}

fn cluster_levels(energies: &[f64], tol: f64) -> (Vec<Range<usize>>, Vec<usize>) {
    let mut groups = Vec::new();
    let mut group_of = Vec::with_capacity(energies.len());
    let mut start = 0;
    for i in 0..energies.len() {
        if i > 0 && energies[i] - energies[i - 1] > tol {
            groups.push(start..i);
            start = i;
        }
        group_of.push(groups.len());
    }
    if !energies.is_empty() {
        groups.push(start..energies.len());
    }
    (groups, group_of)
}

/// Diagonalises `H`. Blocks of `H` that are disconnected in the
/// computational basis are solved separately (and with the real solver
/// when real).
pub fn diagonalize(h: &LocalHamiltonian, tol_deg: Option<f64>) -> Result<SpectralData> {
    diagonalize_matrix(h.spec(), h.dense(), tol_deg, DEFAULT_DIM_CAP)
}

/// [`diagonalize`] for an arbitrary Hermitian matrix on the lattice space.
pub fn diagonalize_matrix(spec: &LatticeSpec, m: MatRef<'_, c64>, tol_deg: Option<f64>, cap: usize) -> Result<SpectralData> {
    let dim = spec.hilbert_dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    if dim > cap {
        return Err(Error::TooLarge { dim, cap });
    }
    let defect = linalg::hermiticity_defect(m);
    if defect > 1e-12 * linalg::max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }

    let components = linalg::connected_components(m);
    let mut vectors: CMat = Mat::zeros(dim, dim);
    let mut columns: Vec<(f64, usize)> = Vec::with_capacity(dim);
    for comp in &components {
        let k = comp.len();
        let sub = Mat::from_fn(k, k, |a, b| m[(comp[a], comp[b])]);
        let eig = linalg::eigh(sub.as_ref())?;
        for (c, &e) in eig.values.iter().enumerate() {
            let col = columns.len();
            for (a, &row) in comp.iter().enumerate() {
                vectors[(row, col)] = eig.vectors[(a, c)];
            }
            columns.push((e, col));
        }
    }
    columns.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let energies: Vec<f64> = columns.iter().map(|c| c.0).collect();
    let sorted = Mat::from_fn(dim, dim, |i, j| vectors[(i, columns[j].1)]);
    drop(vectors);

    let norm = energies.first().map_or(0.0, |lo| lo.abs().max(energies[dim - 1].abs()));
    let tol_deg = tol_deg.unwrap_or_else(|| default_tol_deg(norm));
    if !(tol_deg >= 0.0) {
        return Err(domain("tol_deg must be non-negative"));
    }
    let (groups, group_of) = cluster_levels(&energies, tol_deg);
    Ok(SpectralData { spec: *spec, energies, vectors: Arc::new(sorted), groups, group_of, tol_deg, norm })
}

/// One cluster of equal signed gaps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapBin {
    pub gap: f64,
    pub multiplicity: usize,
}

/// Statistics of the signed gaps `E_i - E_j` between distinct levels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapCensus {
    /// Largest number of ordered level pairs sharing one gap.
    pub most_degenerate_multiplicity: usize,
    /// Same maximum with each pair weighted by the product of level ranks.
    pub rank_weighted_multiplicity: f64,
    /// Gaps shared by at least two ordered pairs, both signs, ascending.
    pub gap_histogram: Vec<GapBin>,
    /// Number of gaps occurring exactly once.
    pub singleton_count: usize,
    pub level_count: usize,
    /// Smallest positive gap, absent with a single level.
    pub smallest_gap: Option<f64>,
    pub tol_gap: f64,
    /// Set when `H` has a single level: no dynamics, the count is `1` by
    /// convention.
    pub vacuous: bool,
}

impl GapCensus {
    /// Total number of ordered pairs represented (histogram plus singletons).
    pub fn pair_count(&self) -> usize {
        self.gap_histogram.iter().map(|b| b.multiplicity).sum::<usize>() + self.singleton_count
    }
}

/// Clusters the signed level gaps with single linkage at `tol_gap`.
pub fn gap_census(sd: &SpectralData, tol_gap: Option<f64>) -> GapCensus {
    let tol_gap = tol_gap.unwrap_or_else(|| default_tol_gap(sd.norm));
    let levels = sd.level_energies();
    let ranks = sd.level_ranks();
    let l = levels.len();
    if l < 2 {
        return GapCensus {
            most_degenerate_multiplicity: 1,
            rank_weighted_multiplicity: ranks.first().map_or(1.0, |&r| (r * r) as f64),
            gap_histogram: Vec::new(),
            singleton_count: 0,
            level_count: l,
            smallest_gap: None,
            tol_gap,
            vacuous: true,
        };
    }
    // positive gaps only; the negative half is the mirror image
    let mut gaps: Vec<(f64, f64)> = Vec::with_capacity(l * (l - 1) / 2);
    for j in 1..l {
        for i in 0..j {
            gaps.push((levels[j] - levels[i], (ranks[i] * ranks[j]) as f64));
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut bins: Vec<GapBin> = Vec::new();
    let mut singletons = 0usize;
    let mut best = 0usize;
    let mut best_weighted = 0.0f64;
    let mut start = 0;
    for i in 1..=gaps.len() {
        if i == gaps.len() || gaps[i].0 - gaps[i - 1].0 > tol_gap {
            let count = i - start;
            let weight: f64 = gaps[start..i].iter().map(|g| g.1).sum();
            best = best.max(count);
            best_weighted = best_weighted.max(weight);
            if count == 1 {
                singletons += 2;
            } else {
                let mean = gaps[start..i].iter().map(|g| g.0).sum::<f64>() / count as f64;
                bins.push(GapBin { gap: mean, multiplicity: count });
            }
            start = i;
        }
    }
    let mut histogram: Vec<GapBin> = bins.iter().rev().map(|b| GapBin { gap: -b.gap, multiplicity: b.multiplicity }).collect();
    histogram.extend(bins);
    GapCensus {
        most_degenerate_multiplicity: best,
        rank_weighted_multiplicity: best_weighted,
        gap_histogram: histogram,
        singleton_count: singletons,
        level_count: l,
        smallest_gap: Some(gaps[0].0),
        tol_gap,
        vacuous: false,
    }
}

/// Default averaging horizon `200 * 2 pi / g_min`, capped at
/// [`HORIZON_CAP`]; `None` without nonzero gaps.
pub fn default_horizon(census: &GapCensus) -> Option<f64> {
    census
        .smallest_gap
        .filter(|&g| g > 0.0)
        .map(|g| (200.0 * 2.0 * core::f64::consts::PI / g).min(HORIZON_CAP))
}

fn check_space(sd: &SpectralData, rho: &DensityOperator) -> Result<()> {
    if sd.spec() != rho.spec() {
        return Err(domain("state and Hamiltonian live on different lattices"));
    }
    Ok(())
}

/// `<nu| rho |nu>` for every eigenvector.
pub fn eigen_populations(sd: &SpectralData, rho: &DensityOperator) -> Result<Vec<f64>> {
    check_space(sd, rho)?;
    if sd.is_diagonal_ensemble(rho) {
        if let Repr::Mixture { weights, .. } = rho.repr() {
            return Ok(weights.clone());
        }
    }
    Ok(crate::states::diagonal_in_basis(rho, &sd.vectors))
}

/// `tr[P_k rho]` for every level `k`.
pub fn populations(sd: &SpectralData, rho: &DensityOperator) -> Result<Vec<f64>> {
    let p = eigen_populations(sd, rho)?;
    Ok(sd.groups.iter().map(|g| linalg::pairwise_sum(&p[g.clone()])).collect())
}

/// `(d_eff, 1/d_eff)` with `1/d_eff = sum_k tr[P_k rho]^2`.
pub fn effective_dimension(sd: &SpectralData, rho: &DensityOperator) -> Result<(f64, f64)> {
    let p = populations(sd, rho)?;
    let squares: Vec<f64> = p.iter().map(|x| x * x).collect();
    let inverse = linalg::pairwise_sum(&squares);
    let d_eff = 1.0 / inverse;
    debug_assert!(d_eff <= sd.level_count() as f64 + 1e-6);
    Ok((d_eff, inverse))
}

/// `V^dagger rho V`.
pub fn to_eigenframe(sd: &SpectralData, rho: &DensityOperator) -> Result<CMat> {
    check_space(sd, rho)?;
    let v = sd.vectors();
    Ok(match rho.repr() {
        Repr::Dense(m) => linalg::adj_matmul(v, linalg::matmul(m.as_ref(), v).as_ref()),
        Repr::Mixture { weights, vectors, .. } => {
            let c = linalg::adj_matmul(v, (**vectors).as_ref());
            let cw = Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * weights[j]);
            linalg::matmul_adj(cw.as_ref(), c.as_ref())
        }
    })
}

/// `V x V^dagger`.
pub fn from_eigenframe(sd: &SpectralData, x: MatRef<'_, c64>) -> CMat {
    let v = sd.vectors();
    linalg::matmul_adj(linalg::matmul(v, x).as_ref(), v)
}

/// Pinching `sum_k P_k rho P_k`, the infinite-time average of `rho(t)`.
///
/// The result is returned as an orthonormal ensemble of `H` eigenvectors
/// (rotated within degenerate levels where needed).
pub fn dephase(sd: &SpectralData, rho: &DensityOperator) -> Result<DensityOperator> {
    check_space(sd, rho)?;
    if sd.is_diagonal_ensemble(rho) {
        return Ok(rho.clone());
    }
    let spec = *sd.spec();
    let all_simple = sd.groups.iter().all(|g| g.len() == 1);
    if let Some(psi) = rho.pure_vector() {
        let v = sd.vectors();
        let c: Vec<c64> = (0..sd.dim()).map(|j| (0..sd.dim()).fold(ZERO, |a, i| a + v[(i, j)].conj() * psi[i])).collect();
        if all_simple {
            let w = c.iter().map(|x| x.norm_sqr()).collect();
            return Ok(DensityOperator::mixture(spec, w, sd.vectors_arc(), true));
        }
        let dim = sd.dim();
        let mut cols: CMat = Mat::zeros(dim, sd.level_count());
        let mut weights = Vec::with_capacity(sd.level_count());
        for (k, g) in sd.groups.iter().enumerate() {
            let w: f64 = c[g.clone()].iter().map(|x| x.norm_sqr()).sum();
            weights.push(w);
            if w > 0.0 {
                let s = 1.0 / libm::sqrt(w);
                for i in 0..dim {
                    cols[(i, k)] = g.clone().fold(ZERO, |a, nu| a + v[(i, nu)] * c[nu]) * s;
                }
            } else {
                for i in 0..dim {
                    cols[(i, k)] = v[(i, g.start)];
                }
            }
        }
        return Ok(DensityOperator::mixture(spec, weights, Arc::new(cols), true));
    }

    let frame = to_eigenframe(sd, rho)?;
    let dim = sd.dim();
    let mut weights = vec![0.0; dim];
    if all_simple {
        for (i, w) in weights.iter_mut().enumerate() {
            *w = frame[(i, i)].re.max(0.0);
        }
        return Ok(DensityOperator::mixture(spec, weights, sd.vectors_arc(), true));
    }
    let v = sd.vectors();
    let mut cols: CMat = Mat::zeros(dim, dim);
    for g in &sd.groups {
        let k = g.len();
        if k == 1 {
            weights[g.start] = frame[(g.start, g.start)].re.max(0.0);
            for i in 0..dim {
                cols[(i, g.start)] = v[(i, g.start)];
            }
            continue;
        }
        let block = Mat::from_fn(k, k, |a, b| frame[(g.start + a, g.start + b)]);
        let eig = linalg::eigh(linalg::hermitian_part(block.as_ref()).as_ref())?;
        let rotated = linalg::matmul(v.subcols(g.start, k), eig.vectors.as_ref());
        for c in 0..k {
            weights[g.start + c] = eig.values[c].max(0.0);
            for i in 0..dim {
                cols[(i, g.start + c)] = rotated[(i, c)];
            }
        }
    }
    Ok(DensityOperator::mixture(spec, weights, Arc::new(cols), true))
}

/// `exp(-iHt) rho exp(iHt)`.
pub fn evolve(sd: &SpectralData, rho: &DensityOperator, t: f64) -> Result<DensityOperator> {
    check_space(sd, rho)?;
    if !t.is_finite() {
        return Err(domain("evolution time must be finite"));
    }
    if sd.is_diagonal_ensemble(rho) || t == 0.0 {
        return Ok(rho.clone());
    }
    let phases: Vec<c64> = sd.energies.iter().map(|&e| linalg::cis(-e * t)).collect();
    let v = sd.vectors();
    Ok(match rho.repr() {
        Repr::Mixture { weights, vectors, orthonormal } => {
            let c = linalg::adj_matmul(v, (**vectors).as_ref());
            let pc = Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * phases[i]);
            let moved = linalg::matmul(v, pc.as_ref());
            DensityOperator::mixture(*sd.spec(), weights.clone(), Arc::new(moved), *orthonormal)
        }
        Repr::Dense(_) => {
            let frame = to_eigenframe(sd, rho)?;
            let rotated = Mat::from_fn(frame.nrows(), frame.ncols(), |i, j| phases[i] * frame[(i, j)] * phases[j].conj());
            DensityOperator::from_matrix_unchecked(*sd.spec(), linalg::hermitian_part(from_eigenframe(sd, rotated.as_ref()).as_ref()))
        }
    })
}

/// `sum_k P_k A P_k`, the infinite-time average of `exp(iHt) A exp(-iHt)`.
pub fn heisenberg_time_average(sd: &SpectralData, a: MatRef<'_, c64>) -> Result<CMat> {
    let dim = sd.dim();
    if a.nrows() != dim || a.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: a.nrows() });
    }
    let v = sd.vectors();
    let frame = linalg::adj_matmul(v, linalg::matmul(a, v).as_ref());
    let masked = Mat::from_fn(dim, dim, |i, j| if sd.group_of[i] == sd.group_of[j] { frame[(i, j)] } else { ZERO });
    Ok(linalg::hermitian_part(from_eigenframe(sd, masked.as_ref()).as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Region;
    use crate::operators::{build_family, Family, LocalTerm, Params};
    use crate::quadrature::weyl_times;
    use crate::random;
    use crate::states::{entropy, thermal_state};
    use alloc::string::String;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (String::from(*k), *v)).collect()
    }

    fn tfim(n: usize) -> LocalHamiltonian {
        build_family(Family::Tfim, &params(&[("J", 1.0), ("h", 1.0)]), &LatticeSpec::chain(n).unwrap()).unwrap()
    }

    fn z_qubit() -> SpectralData {
        let spec = LatticeSpec::chain(1).unwrap();
        let term = LocalTerm::new(&spec, Region::new(&spec, [0]).unwrap(), linalg::pauli_z(), "z").unwrap();
        diagonalize(&LocalHamiltonian::new(spec, vec![term], 1).unwrap(), None).unwrap()
    }

    fn plus() -> DensityOperator {
        DensityOperator::plus_state(&LatticeSpec::chain(1).unwrap()).unwrap()
    }

    fn max_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
        let d = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
        linalg::max_abs(d.as_ref())
    }

    fn residual(h: MatRef<'_, c64>, sd: &SpectralData) -> f64 {
        let hv = linalg::matmul(h, sd.vectors());
        (0..sd.dim())
            .map(|j| libm::sqrt((0..sd.dim()).map(|i| (hv[(i, j)] - sd.vectors()[(i, j)] * sd.energies()[j]).norm_sqr()).sum::<f64>()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonalize_examples() {
        let sd = z_qubit();
        assert_eq!(sd.energies(), &[-1.0, 1.0]);
        assert_eq!(sd.level_count(), 2);

        let spec = LatticeSpec::chain(2).unwrap();
        let zero = LocalHamiltonian::new(spec, Vec::new(), 1).unwrap();
        let sd = diagonalize(&zero, None).unwrap();
        assert_eq!(sd.groups(), &[0..4]);
    }

    #[test]
    fn tfim_eight_sites_residual_and_refinement() {
        let h = tfim(8);
        let sd = diagonalize(&h, None).unwrap();
        assert!(residual(h.dense(), &sd) <= 1e-9 * sd.norm());
        let fine = sd.regrouped(sd.tol_deg() / 10.0);
        // every fine group sits inside a coarse group
        for g in fine.groups() {
            assert!(g.clone().all(|i| sd.group_of()[i] == sd.group_of()[g.start]));
        }
        for w in sd.groups().windows(2) {
            assert!(sd.energies()[w[1].start] - sd.energies()[w[0].end - 1] > sd.tol_deg());
        }
    }

    #[test]
    fn block_structure_matches_full_solver() {
        let h = build_family(Family::XxChain, &params(&[("J", 1.0), ("mu", 0.3)]), &LatticeSpec::chain(6).unwrap()).unwrap();
        let sd = diagonalize(&h, None).unwrap();
        let full = linalg::eigh(h.dense()).unwrap();
        for (a, b) in sd.energies().iter().zip(&full.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(residual(h.dense(), &sd) < 1e-12);
        let cap = diagonalize_matrix(h.spec(), h.dense(), None, 32);
        assert!(matches!(cap, Err(Error::TooLarge { .. })));
    }

    fn census_of(levels: &[f64]) -> GapCensus {
        let spec = LatticeSpec::chain(2).unwrap();
        let h = Mat::from_fn(4, 4, |i, j| if i == j { c64::new(levels[i], 0.0) } else { ZERO });
        gap_census(&diagonalize_matrix(&spec, h.as_ref(), None, 16).unwrap(), None)
    }

    #[test]
    fn gap_census_examples() {
        let ladder = census_of(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(ladder.most_degenerate_multiplicity, 3);
        assert_eq!(ladder.pair_count(), 12);
        let generic = census_of(&[0.0, 0.31, 1.17, 2.93]);
        assert_eq!(generic.most_degenerate_multiplicity, 1);
        let flat = census_of(&[0.5, 0.5, 0.5, 0.5]);
        assert!(flat.vacuous);
        assert_eq!(flat.most_degenerate_multiplicity, 1);
    }

    #[test]
    fn transverse_field_census_against_pair_enumeration() {
        let h = build_family(Family::TransverseField, &params(&[("b", 1.0)]), &LatticeSpec::chain(4).unwrap()).unwrap();
        let sd = diagonalize(&h, None).unwrap();
        let census = gap_census(&sd, None);
        let levels = sd.level_energies();
        assert_eq!(levels.len(), 5);
        // brute force over ordered pairs of distinct levels
        let mut counts: Vec<(i64, usize)> = Vec::new();
        for (i, a) in levels.iter().enumerate() {
            for (j, b) in levels.iter().enumerate() {
                if i != j {
                    let key = libm::round(a - b) as i64;
                    match counts.iter_mut().find(|c| c.0 == key) {
                        Some(c) => c.1 += 1,
                        None => counts.push((key, 1)),
                    }
                }
            }
        }
        let brute = counts.iter().map(|c| c.1).max().unwrap();
        assert_eq!(census.most_degenerate_multiplicity, brute);
        assert_eq!(brute, 4);
        assert_eq!(census.pair_count(), 20);
        // ranks 1,4,6,4,1: gap +2 pairs (1*4 + 4*6 + 6*4 + 4*1)
        assert_eq!(census.rank_weighted_multiplicity, 56.0);
    }

    #[test]
    fn effective_dimension_examples() {
        let h = build_family(Family::Tfim, &params(&[("J", 1.0), ("h", 0.6), ("hz", 0.2)]), &LatticeSpec::chain(3).unwrap()).unwrap();
        let sd = diagonalize(&h, None).unwrap();
        assert_eq!(sd.level_count(), 8);
        let eigenstate = thermal_state(&sd, f64::INFINITY).unwrap();
        assert!((effective_dimension(&sd, eigenstate.state()).unwrap().0 - 1.0).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(sd.spec());
        assert!((effective_dimension(&sd, &mixed).unwrap().0 - 8.0).abs() < 1e-10);
    }

    #[test]
    fn dephase_examples() {
        let q = z_qubit();
        let out = dephase(&q, &plus()).unwrap().to_matrix();
        assert!(max_diff(out.as_ref(), linalg::diag(&[0.5, 0.5]).as_ref()) < 1e-15);
        let sd = diagonalize(&tfim(3), None).unwrap();
        let t = thermal_state(&sd, 0.4).unwrap();
        let d = dephase(&sd, &DensityOperator::from_matrix_unchecked(*sd.spec(), t.state().to_matrix())).unwrap();
        assert!(max_diff(d.to_matrix().as_ref(), t.state().to_matrix().as_ref()) < 1e-13);
    }

    #[test]
    fn dephase_matches_long_time_average() {
        let sd = diagonalize(&tfim(3), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random::mixed_state(sd.spec(), &mut rng);
        let census = gap_census(&sd, None);
        let horizon = default_horizon(&census).unwrap();
        let times = weyl_times(10_000, horizon, 0.5);
        let mut mean: CMat = Mat::zeros(8, 8);
        let mut sq = vec![0.0; 64];
        for &t in &times {
            let m = evolve(&sd, &rho, t).unwrap().to_matrix();
            for j in 0..8 {
                for i in 0..8 {
                    mean[(i, j)] += m[(i, j)];
                    sq[i + 8 * j] += m[(i, j)].norm_sqr();
                }
            }
        }
        let n = times.len() as f64;
        let target = dephase(&sd, &rho).unwrap().to_matrix();
        for j in 0..8 {
            for i in 0..8 {
                let mu = mean[(i, j)] / n;
                let var = (sq[i + 8 * j] / n - mu.norm_sqr()).max(0.0);
                let stderr = libm::sqrt(var / n).max(1e-12);
                assert!((mu - target[(i, j)]).norm() <= 5.0 * stderr, "({i},{j})");
            }
        }
    }

    #[test]
    fn evolve_examples() {
        let q = z_qubit();
        let t = core::f64::consts::FRAC_PI_4;
        let out = evolve(&q, &plus(), t).unwrap().to_matrix();
        // H = Z rotates the Bloch vector (1, 0, 0) by 2t about z
        let (bx, by) = (libm::cos(2.0 * t), libm::sin(2.0 * t));
        let want = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c64::new(0.5, 0.0),
            (0, 1) => c64::new(bx, -by) * 0.5,
            _ => c64::new(bx, by) * 0.5,
        });
        assert!(max_diff(out.as_ref(), want.as_ref()) < 1e-15);
        let same = evolve(&q, &plus(), 0.0).unwrap().to_matrix();
        assert!(max_diff(same.as_ref(), plus().to_matrix().as_ref()) < 1e-15);
    }

    #[test]
    fn heisenberg_average_examples() {
        let q = z_qubit();
        let avg = heisenberg_time_average(&q, linalg::pauli_x().as_ref()).unwrap();
        assert!(linalg::max_abs(avg.as_ref()) < 1e-15);
        let z = heisenberg_time_average(&q, linalg::pauli_z().as_ref()).unwrap();
        assert!(max_diff(z.as_ref(), linalg::pauli_z().as_ref()) < 1e-15);
    }

    #[test]
    fn xx_number_operator_average_matches_sampled_heisenberg_average() {
        let spec = LatticeSpec::chain(6).unwrap();
        let h = build_family(Family::XxChain, &params(&[("J", 1.0), ("mu", 0.37), ("disorder", 0.2), ("disorder_seed", 3.0)]), &spec).unwrap();
        let sd = diagonalize(&h, None).unwrap();
        let number = linalg::diag(&[0.0, 1.0]);
        let a = crate::basis::SiteIndexer::new(&spec, &[3]).unwrap().embed(number.as_ref());
        let exact = heisenberg_time_average(&sd, a.as_ref()).unwrap();
        let horizon = default_horizon(&gap_census(&sd, None)).unwrap();
        let times = weyl_times(4000, horizon, 0.5);
        let v = sd.vectors();
        let frame = linalg::adj_matmul(v, linalg::matmul(a.as_ref(), v).as_ref());
        let mut acc: CMat = Mat::zeros(64, 64);
        for &t in &times {
            let p: Vec<c64> = sd.energies().iter().map(|&e| linalg::cis(e * t)).collect();
            let rot = Mat::from_fn(64, 64, |i, j| p[i] * frame[(i, j)] * p[j].conj());
            let back = from_eigenframe(&sd, rot.as_ref());
            for j in 0..64 {
                for i in 0..64 {
                    acc[(i, j)] += back[(i, j)] / times.len() as f64;
                }
            }
        }
        assert!(max_diff(acc.as_ref(), exact.as_ref()) < 2e-2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn dephase_properties(seed in any::<u64>()) {
            let sd = diagonalize(&tfim(3), None).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::mixed_state(sd.spec(), &mut rng);
            let once = dephase(&sd, &rho).unwrap();
            let twice = dephase(&sd, &once).unwrap();
            prop_assert!(max_diff(once.to_matrix().as_ref(), twice.to_matrix().as_ref()) < 1e-12);
            prop_assert!((once.trace() - 1.0).abs() < 1e-12);
            prop_assert!(entropy(&once).unwrap() >= entropy(&rho).unwrap() - 1e-9);
            let (before, after) = (populations(&sd, &rho).unwrap(), populations(&sd, &once).unwrap());
            for (a, b) in before.iter().zip(&after) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let m = once.to_matrix();
            let h = tfim(3);
            let comm = Mat::from_fn(8, 8, |i, j| {
                (0..8).fold(ZERO, |acc, k| acc + h.dense()[(i, k)] * m[(k, j)] - m[(i, k)] * h.dense()[(k, j)])
            });
            prop_assert!(linalg::max_abs(comm.as_ref()) < 1e-9);
        }

        #[test]
        fn pure_state_dephasing_on_degenerate_spectrum(seed in any::<u64>()) {
            let h = build_family(Family::TransverseField, &params(&[("b", 1.0)]), &LatticeSpec::chain(3).unwrap()).unwrap();
            let sd = diagonalize(&h, None).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random::pure_state(sd.spec(), &mut rng);
            let fast = dephase(&sd, &psi).unwrap().to_matrix();
            let dense = DensityOperator::from_matrix_unchecked(*sd.spec(), psi.to_matrix());
            let slow = dephase(&sd, &dense).unwrap().to_matrix();
            prop_assert!(max_diff(fast.as_ref(), slow.as_ref()) < 1e-12);
        }

        #[test]
        fn evolution_properties(seed in any::<u64>(), t1 in -20.0f64..20.0, t2 in -20.0f64..20.0) {
            let sd = diagonalize(&tfim(3), None).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::mixed_state(sd.spec(), &mut rng);
            let a = evolve(&sd, &evolve(&sd, &rho, t2).unwrap(), t1).unwrap();
            let b = evolve(&sd, &rho, t1 + t2).unwrap();
            prop_assert!(max_diff(a.to_matrix().as_ref(), b.to_matrix().as_ref()) < 1e-9);
            let (e0, e1) = (rho.eigenvalues().unwrap(), b.eigenvalues().unwrap());
            for (x, y) in e0.iter().zip(&e1) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let d0 = effective_dimension(&sd, &rho).unwrap().0;
            let d1 = effective_dimension(&sd, &b).unwrap().0;
            prop_assert!((d0 - d1).abs() < 1e-9 * d0.max(1.0));
            let psi = random::pure_state(sd.spec(), &mut rng);
            let pa = evolve(&sd, &evolve(&sd, &psi, t2).unwrap(), t1).unwrap();
            let pb = evolve(&sd, &psi, t1 + t2).unwrap();
            prop_assert!(max_diff(pa.to_matrix().as_ref(), pb.to_matrix().as_ref()) < 1e-9);
        }

        #[test]
        fn gap_census_ignores_energy_shift(c in -5.0f64..5.0) {
            let h = build_family(Family::TransverseField, &params(&[("b", 1.0)]), &LatticeSpec::chain(4).unwrap()).unwrap();
            let a = gap_census(&diagonalize(&h, None).unwrap(), None);
            let b = gap_census(&diagonalize(&h.clone().with_offset(c), None).unwrap(), None);
            prop_assert_eq!(a.most_degenerate_multiplicity, b.most_degenerate_multiplicity);
            prop_assert_eq!(a.pair_count(), b.pair_count());
        }
    }
}
