//! Measurable premises: energy variance, correlation decay, spectral CDFs
//! and their Kolmogorov distance, Monte-Carlo time-averaged local
//! distances, and the transport commutator.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::SiteIndexer;
use crate::bounds::{BoundKind, BoundReport};
use crate::digest::InputDigest;
use crate::error::{domain, Error, Result};
use crate::lattice::{distance, LatticeSpec, Region};
use crate::linalg::{self, c64, CMat, ZERO};
use crate::operators::{apply_channel, LocalHamiltonian, QuantumChannel};
use crate::quadrature::weyl_times;
use crate::random;
use crate::spectral::{self, dephase, eigen_populations, effective_dimension, GapCensus, SpectralData};
use crate::states::{trace_distance, DensityOperator, Repr};

/// Mean, variance and intensive spread of `H` in a state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub mean_energy: f64,
    pub sigma_sq: f64,
    /// `sigma / sqrt(N)`.
    pub s: f64,
    /// `beta^2 s^2`, only for thermal inputs.
    pub specific_heat: Option<f64>,
}

impl VarianceReport {
    fn new(mean: f64, sigma_sq: f64, sites: usize) -> Self {
        let s = libm::sqrt(sigma_sq.max(0.0) / sites as f64);
        Self { mean_energy: mean, sigma_sq, s, specific_heat: None }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.specific_heat = Some(beta * beta * self.s * self.s);
        self
    }
}

/// `tr[rho H]`, `tr[rho H^2] - tr[rho H]^2` from the dense Hamiltonian.
pub fn energy_variance(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<VarianceReport> {
    if rho.spec() != h.spec() {
        return Err(domain("state and Hamiltonian live on different lattices"));
    }
    let hd = h.dense();
    let (mean, second) = match rho.repr() {
        Repr::Mixture { weights, vectors, .. } => {
            let hv = linalg::matmul(hd, (**vectors).as_ref());
            let (mut m, mut s) = (0.0, 0.0);
            for (j, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut e = 0.0;
                let mut e2 = 0.0;
                for i in 0..hv.nrows() {
                    e += (vectors[(i, j)].conj() * hv[(i, j)]).re;
                    e2 += hv[(i, j)].norm_sqr();
                }
                m += w * e;
                s += w * e2;
            }
            (m, s)
        }
        Repr::Dense(m) => {
            let x = linalg::matmul(m.as_ref(), hd);
            (linalg::trace(x.as_ref()).re, linalg::trace_product(x.as_ref(), hd).re)
        }
    };
    Ok(VarianceReport::new(mean, second - mean * mean, rho.spec().sites()))
}

/// Same quantities from the eigenbasis populations.
pub fn energy_variance_spectral(sd: &SpectralData, rho: &DensityOperator) -> Result<VarianceReport> {
    let p = eigen_populations(sd, rho)?;
    let (mean, var) = weighted_moments(&p, sd.energies());
    Ok(VarianceReport::new(mean, var, sd.spec().sites()))
}

fn weighted_moments(p: &[f64], x: &[f64]) -> (f64, f64) {
    let mean = linalg::pairwise_sum(&p.iter().zip(x).map(|(p, x)| p * x).collect::<Vec<_>>());
    let var = linalg::pairwise_sum(&p.iter().zip(x).map(|(p, x)| p * (x - mean) * (x - mean)).collect::<Vec<_>>());
    (mean, var)
}

/// One region pair of a correlation scan, normalised by `|X| |Y|`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationSample {
    pub distance: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Certified correlator brackets and a log-linear decay fit
/// `lower ~ K exp(-dist / xi)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationFit {
    pub samples: Vec<CorrelationSample>,
    /// Absent when the fit is degenerate or the correlations do not decay.
    pub xi_hat: Option<f64>,
    pub k_hat: Option<f64>,
    /// `R^2` of the least-squares fit of `ln(lower)`.
    pub fit_quality: Option<f64>,
    /// Fewer than two distinct distances with a usable lower bound.
    pub degenerate: bool,
    /// Set of operators the lower bound maximises over.
    pub operator_class: String,
}

/// Lower bounds below this are treated as zero in the fit.
pub const CORRELATION_FLOOR: f64 = 1e-14;
const STARTS: usize = 8;
const SWEEP_RTOL: f64 = 1e-8;

/// Brackets `max_{P,Q} |tr[rho P Q] - tr[rho P] tr[rho Q]| / (|X||Y|)` for
/// every pair and fits the decay of the lower bracket.
///
/// The upper end is `||rho_XY - rho_X ⊗ rho_Y||_1`; the lower end comes from
/// alternating maximisation over Hermitian unitaries (`iters` sweeps from
/// each of several seeded random starts).
pub fn correlation_fit(rho: &DensityOperator, region_pairs: &[(Region, Region)], iters: usize, seed: u64) -> Result<CorrelationFit> {
    if iters == 0 {
        return Err(domain("at least one sweep is needed"));
    }
    let spec = rho.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(region_pairs.len());
    for (x, y) in region_pairs {
        if x.is_empty() || y.is_empty() || x.intersects(y) {
            return Err(domain("correlation regions must be nonempty and disjoint"));
        }
        let order: Vec<usize> = x.sites().iter().chain(y.sites()).copied().collect();
        let rho_xy = rho.partial_trace_ordered(&order)?;
        let dx = x.hilbert_dim(spec);
        let dy = y.hilbert_dim(spec);
        let delta = correlation_operator(rho_xy.as_ref(), dx, dy);
        let upper = linalg::trace_norm_hermitian(delta.as_ref())?;
        let mut lower = 0.0f64;
        for _ in 0..STARTS {
            let q = random::hermitian_unitary(dy, &mut rng);
            lower = lower.max(alternating_max(delta.as_ref(), dx, dy, q, iters)?);
        }
        let size = (x.len() * y.len()) as f64;
        samples.push(CorrelationSample { distance: distance(spec, x, y)?, lower: lower / size, upper: upper / size });
    }
    Ok(fit_samples(samples))
}

/// `rho_XY - rho_X ⊗ rho_Y` for a bipartite matrix with `X` first.
pub fn correlation_operator(rho_xy: MatRef<'_, c64>, dx: usize, dy: usize) -> CMat {
    let rx = Mat::from_fn(dx, dx, |a, b| (0..dy).fold(ZERO, |acc, c| acc + rho_xy[(a * dy + c, b * dy + c)]));
    let ry = Mat::from_fn(dy, dy, |c, e| (0..dx).fold(ZERO, |acc, a| acc + rho_xy[(a * dy + c, a * dy + e)]));
    let prod = linalg::kron(rx.as_ref(), ry.as_ref());
    Mat::from_fn(dx * dy, dx * dy, |i, j| rho_xy[(i, j)] - prod[(i, j)])
}

/// `tr_Y[delta (1 ⊗ q)]`.
fn contract_y(delta: MatRef<'_, c64>, dx: usize, dy: usize, q: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(dx, dx, |a, b| {
        let mut acc = ZERO;
        for c in 0..dy {
            for e in 0..dy {
                acc += delta[(a * dy + c, b * dy + e)] * q[(e, c)];
            }
        }
        acc
    })
}

/// `tr_X[delta (p ⊗ 1)]`.
fn contract_x(delta: MatRef<'_, c64>, dx: usize, dy: usize, p: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(dy, dy, |c, e| {
        let mut acc = ZERO;
        for a in 0..dx {
            for b in 0..dx {
                acc += delta[(a * dy + c, b * dy + e)] * p[(b, a)];
            }
        }
        acc
    })
}

fn alternating_max(delta: MatRef<'_, c64>, dx: usize, dy: usize, mut q: CMat, iters: usize) -> Result<f64> {
    let mut best = 0.0f64;
    let mut previous = f64::NEG_INFINITY;
    for _ in 0..iters {
        let a = linalg::hermitian_part(contract_y(delta, dx, dy, q.as_ref()).as_ref());
        let p = linalg::hermitian_sign(a.as_ref())?;
        let b = linalg::hermitian_part(contract_x(delta, dx, dy, p.as_ref()).as_ref());
        q = linalg::hermitian_sign(b.as_ref())?;
        let value = linalg::trace_norm_hermitian(b.as_ref())?;
        best = best.max(value);
        if (value - previous).abs() <= SWEEP_RTOL * value.abs().max(1e-300) {
            break;
        }
        previous = value;
    }
    Ok(best)
}

fn fit_samples(samples: Vec<CorrelationSample>) -> CorrelationFit {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.lower > CORRELATION_FLOOR)
        .map(|s| (s.distance as f64, libm::log(s.lower)))
        .collect();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let operator_class = String::from("hermitian_unitary");
    if distinct.len() < 2 {
        return CorrelationFit { samples, xi_hat: None, k_hat: None, fit_quality: None, degenerate: true, operator_class };
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = points.iter().map(|p| { let r = p.1 - intercept - slope * p.0; r * r }).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let decays = slope < 0.0;
    CorrelationFit {
        samples,
        xi_hat: decays.then(|| -1.0 / slope),
        k_hat: decays.then(|| libm::exp(intercept)),
        fit_quality: Some(r2),
        degenerate: false,
        operator_class,
    }
}

/// Step CDF of the energy distribution of a state against the Gaussian
/// with the same mean and variance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralCDFs {
    pub jump_points: Vec<f64>,
    /// `F` just after each jump.
    pub f_values: Vec<f64>,
    pub gauss_mean: f64,
    pub gauss_sigma: f64,
    /// `sup_x |F(x) - G(x)|`.
    pub delta: f64,
    /// Energy at which the supremum is attained.
    pub delta_at: f64,
}

impl SpectralCDFs {
    /// Gaussian CDF `G(x)`.
    pub fn gaussian_cdf(&self, x: f64) -> f64 {
        normal_cdf((x - self.gauss_mean) / self.gauss_sigma)
    }

    /// Step CDF `F(x)` (right-continuous).
    pub fn step_cdf(&self, x: f64) -> f64 {
        match self.jump_points.partition_point(|&e| e <= x) {
            0 => 0.0,
            k => self.f_values[k - 1],
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Relative threshold below which the energy variance counts as zero.
pub const VARIANCE_FLOOR: f64 = 1e-14;

/// `F(x) = sum_{E_nu <= x} <nu|rho|nu>` against `G`; the supremum is taken
/// over both one-sided limits at every jump.
pub fn spectral_cdfs(sd: &SpectralData, rho: &DensityOperator) -> Result<SpectralCDFs> {
    let p = eigen_populations(sd, rho)?;
    let (mean, var) = weighted_moments(&p, sd.energies());
    let scale = sd.norm().max(1.0);
    if !(var > VARIANCE_FLOOR * scale * scale) {
        return Err(Error::DegenerateGaussian(var));
    }
    let sigma = libm::sqrt(var);
    let levels = sd.level_energies();
    let mut jump_points = Vec::with_capacity(levels.len());
    let mut f_values = Vec::with_capacity(levels.len());
    let mut below = 0.0;
    let mut delta = 0.0f64;
    let mut delta_at = levels[0];
    for (g, &e) in sd.groups().iter().zip(&levels) {
        let mass = linalg::pairwise_sum(&p[g.clone()]);
        let above = below + mass;
        let gx = normal_cdf((e - mean) / sigma);
        let here = (below - gx).abs().max((above - gx).abs());
        if here > delta {
            delta = here;
            delta_at = e;
        }
        jump_points.push(e);
        f_values.push(above);
        below = above;
    }
    Ok(SpectralCDFs { jump_points, f_values, gauss_mean: mean, gauss_sigma: sigma, delta: delta.min(1.0), delta_at })
}

/// `1/d_eff <= 2 Delta`, which holds exactly for every state with nonzero
/// energy variance.
pub fn effective_dimension_bound_check(sd: &SpectralData, rho: &DensityOperator) -> Result<BoundReport> {
    let cdfs = spectral_cdfs(sd, rho)?;
    let (d_eff, inverse) = effective_dimension(sd, rho)?;
    let mut report = BoundReport::new("effective_dimension_vs_berry_esseen", BoundKind::Proved, inverse, 2.0 * cdfs.delta, 1e-9);
    report.extras.insert("d_eff".into(), d_eff);
    report.extras.insert("delta".into(), cdfs.delta);
    report.extras.insert("gauss_sigma".into(), cdfs.gauss_sigma);
    report.inputs_digest = InputDigest::new().str(&report.name).f64s(sd.energies()).f64(cdfs.gauss_mean).hex();
    Ok(report)
}

/// Reduced states `rho(t)_S` evaluated in batches, for one or several
/// regions sharing the same evolution.
///
/// Low-rank ensembles are propagated as vectors; everything else goes
/// through the eigenframe, where every entry of `rho(t)_S` is
/// `sum_{mu nu} e^{-i(E_mu - E_nu) t} M_{mu nu}` for a precomputed `M`.
#[derive(Debug)]
pub struct LocalTrajectory<'a> {
    sd: &'a SpectralData,
    idx: Vec<SiteIndexer>,
    route: Route,
}

#[derive(Debug)]
enum Route {
    Static(Vec<CMat>),
    Vectors { weights: Vec<f64>, coeffs: CMat },
    Frame { frame: CMat, trace: f64 },
}

/// Ensembles up to this rank are propagated vector by vector.
pub const VECTOR_ROUTE_MAX_RANK: usize = 16;
const BATCH_ELEMENTS: usize = 1 << 22;

impl<'a> LocalTrajectory<'a> {
    pub fn new(sd: &'a SpectralData, rho: &DensityOperator, region: &Region) -> Result<Self> {
        Self::for_regions(sd, rho, core::slice::from_ref(region))
    }

    pub fn for_regions(sd: &'a SpectralData, rho: &DensityOperator, regions: &[Region]) -> Result<Self> {
        if sd.spec() != rho.spec() {
            return Err(domain("state and Hamiltonian live on different lattices"));
        }
        if regions.is_empty() {
            return Err(domain("no regions given"));
        }
        let idx = regions.iter().map(|r| SiteIndexer::new(sd.spec(), r.sites())).collect::<Result<Vec<_>>>()?;
        let route = if sd.is_diagonal_ensemble(rho) {
            Route::Static(regions.iter().map(|r| rho.partial_trace(r)).collect::<Result<_>>()?)
        } else {
            match rho.repr() {
                Repr::Mixture { weights, vectors, .. } if weights.len() <= VECTOR_ROUTE_MAX_RANK => {
                    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
                    let w = keep.iter().map(|&i| weights[i]).collect();
                    let sub = Mat::from_fn(vectors.nrows(), keep.len(), |r, c| vectors[(r, keep[c])]);
                    Route::Vectors { weights: w, coeffs: linalg::adj_matmul(sd.vectors(), sub.as_ref()) }
                }
                _ => Route::Frame { frame: spectral::to_eigenframe(sd, rho)?, trace: rho.trace() },
            }
        };
        Ok(Self { sd, idx, route })
    }

    pub fn region_count(&self) -> usize {
        self.idx.len()
    }

    /// `rho(t)_S` for every requested time, first region.
    pub fn reduced_states(&self, times: &[f64]) -> Vec<CMat> {
        self.reduced_states_all(times).swap_remove(0)
    }

    /// `rho(t)_S` indexed by region, then time.
    pub fn reduced_states_all(&self, times: &[f64]) -> Vec<Vec<CMat>> {
        match &self.route {
            Route::Static(ms) => ms.iter().map(|m| times.iter().map(|_| m.clone()).collect()).collect(),
            Route::Vectors { weights, coeffs } => self.by_vectors(times, weights, coeffs),
            Route::Frame { frame, trace } => self.idx.iter().map(|idx| self.by_frame(idx, times, frame, *trace)).collect(),
        }
    }

    fn by_vectors(&self, times: &[f64], weights: &[f64], coeffs: &CMat) -> Vec<Vec<CMat>> {
        let dim = self.sd.dim();
        let r = weights.len().max(1);
        let energies = self.sd.energies();
        let batch = (BATCH_ELEMENTS / (dim * r)).clamp(1, times.len().max(1));
        let mut out: Vec<Vec<CMat>> = self.idx.iter().map(|_| Vec::with_capacity(times.len())).collect();
        let mut col = vec![ZERO; dim];
        for chunk in times.chunks(batch) {
            let x = Mat::from_fn(dim, chunk.len() * weights.len(), |mu, k| {
                coeffs[(mu, k % weights.len())] * linalg::cis(-energies[mu] * chunk[k / weights.len()])
            });
            let y = linalg::matmul(self.sd.vectors(), x.as_ref());
            for b in 0..chunk.len() {
                let mut acc: Vec<CMat> = self.idx.iter().map(|idx| Mat::zeros(idx.local_dim(), idx.local_dim())).collect();
                for (i, &w) in weights.iter().enumerate() {
                    let k = b * weights.len() + i;
                    for (row, c) in col.iter_mut().enumerate() {
                        *c = y[(row, k)];
                    }
                    for (idx, a) in self.idx.iter().zip(acc.iter_mut()) {
                        idx.accumulate_pure(a, &col, w);
                    }
                }
                for (o, a) in out.iter_mut().zip(acc) {
                    o.push(a);
                }
            }
        }
        out
    }

    fn by_frame(&self, idx: &SiteIndexer, times: &[f64], frame: &CMat, trace: f64) -> Vec<CMat> {
        let dim = self.sd.dim();
        let ds = idx.local_dim();
        let energies = self.sd.energies();
        let v = self.sd.vectors();
        let rows = |a: usize| {
            let off = idx.offsets()[a];
            let bases = idx.bases();
            Mat::from_fn(bases.len(), dim, |r, mu| v[(bases[r] + off, mu)])
        };
        let mut out: Vec<CMat> = times.iter().map(|_| Mat::zeros(ds, ds)).collect();
        let batch = (BATCH_ELEMENTS / dim).clamp(1, times.len().max(1));
        for a in 0..ds {
            let va = rows(a);
            for b in a..ds {
                if a == b && a == ds - 1 {
                    continue;
                }
                // O = V^dagger (|b><a| ⊗ 1) V, M_{mu nu} = frame_{mu nu} O_{nu mu}
                let o = linalg::adj_matmul(rows(b).as_ref(), va.as_ref());
                let m = Mat::from_fn(dim, dim, |mu, nu| frame[(mu, nu)] * o[(nu, mu)]);
                drop(o);
                for (start, chunk) in times.chunks(batch).enumerate().map(|(i, c)| (i * batch, c)) {
                    let ebar = Mat::from_fn(dim, chunk.len(), |nu, k| linalg::cis(energies[nu] * chunk[k]));
                    let y = linalg::matmul(m.as_ref(), ebar.as_ref());
                    for (k, &t) in chunk.iter().enumerate() {
                        let mut f = ZERO;
                        for mu in 0..dim {
                            f += linalg::cis(-energies[mu] * t) * y[(mu, k)];
                        }
                        let red = &mut out[start + k];
                        red[(a, b)] = f;
                        red[(b, a)] = f.conj();
                    }
                }
            }
        }
        for red in &mut out {
            let partial: f64 = (0..ds - 1).map(|a| red[(a, a)].re).sum();
            for a in 0..ds {
                red[(a, a)] = c64::new(red[(a, a)].re, 0.0);
            }
            red[(ds - 1, ds - 1)] = c64::new(trace - partial, 0.0);
        }
        out
    }
}

/// Sampling parameters for time averages.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McConfig {
    pub samples: usize,
    /// Overrides the default horizon derived from the smallest gap.
    pub horizon: Option<f64>,
    /// Starting point of the additive recurrence, in `[0, 1)`.
    pub offset: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 2000, horizon: None, offset: 0.5 }
    }
}

impl McConfig {
    /// Offset drawn from a seed.
    pub fn seeded(samples: usize, seed: u64) -> Self {
        use rand::Rng;
        let offset = ChaCha8Rng::seed_from_u64(seed).random::<f64>();
        Self { samples, horizon: None, offset }
    }

    /// Explicit horizon, else `200 * 2 pi / g_min` (capped), else `1`.
    pub fn horizon_for(&self, census: &GapCensus) -> f64 {
        self.horizon.or_else(|| spectral::default_horizon(census)).unwrap_or(1.0)
    }
}

/// Time average of a local distance with its sampling error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Same average over `[0, 2T]`.
    pub estimate_doubled: f64,
    pub stderr_doubled: f64,
    /// `|estimate - estimate_doubled| <= 3 stderr`.
    pub converged: bool,
    pub horizon: f64,
    pub samples: usize,
    /// `(t_i, distance_i)` over `[0, T]`.
    pub trace: Vec<(f64, f64)>,
}

/// Mean and standard error (`std / sqrt(n)`), pairwise-summed.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = linalg::pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = linalg::pairwise_sum(&sq) / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

/// Local trace distances of `rho(t)` to a fixed reduced target at the given
/// times.
pub fn distance_series(traj: &LocalTrajectory<'_>, target: MatRef<'_, c64>, times: &[f64]) -> Result<Vec<f64>> {
    traj.reduced_states(times).iter().map(|r| trace_distance(r.as_ref(), target)).collect()
}

/// `D_S(target) = (1/T) int_0^T ||rho(t) - target||_S dt` by quasi-random
/// sampling, repeated on `[0, 2T]` as a convergence check.
pub fn mc_average_distance(
    sd: &SpectralData,
    rho0: &DensityOperator,
    target: &DensityOperator,
    s: &Region,
    samples: usize,
    horizon: f64,
    offset: f64,
) -> Result<McEstimate> {
    Ok(mc_average_distances(sd, rho0, target, core::slice::from_ref(s), samples, horizon, offset)?.swap_remove(0))
}

/// [`mc_average_distance`] for several regions from one shared evolution.
pub fn mc_average_distances(
    sd: &SpectralData,
    rho0: &DensityOperator,
    target: &DensityOperator,
    regions: &[Region],
    samples: usize,
    horizon: f64,
    offset: f64,
) -> Result<Vec<McEstimate>> {
    if samples < 2 {
        return Err(domain("need at least two time samples"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(domain("time horizon must be positive and finite"));
    }
    let traj = LocalTrajectory::for_regions(sd, rho0, regions)?;
    let times = weyl_times(samples, horizon, offset);
    let doubled = weyl_times(samples, 2.0 * horizon, offset);
    let first = traj.reduced_states_all(&times);
    let second = traj.reduced_states_all(&doubled);
    let mut out = Vec::with_capacity(regions.len());
    for ((region, r1), r2) in regions.iter().zip(first).zip(second) {
        let tgt = target.partial_trace(region)?;
        let d1 = r1.iter().map(|r| trace_distance(r.as_ref(), tgt.as_ref())).collect::<Result<Vec<_>>>()?;
        let d2 = r2.iter().map(|r| trace_distance(r.as_ref(), tgt.as_ref())).collect::<Result<Vec<_>>>()?;
        let (estimate, stderr) = mean_stderr(&d1);
        let (estimate_doubled, stderr_doubled) = mean_stderr(&d2);
        let converged = (estimate - estimate_doubled).abs() <= (3.0 * stderr).max(1e-12);
        out.push(McEstimate {
            estimate,
            stderr,
            estimate_doubled,
            stderr_doubled,
            converged,
            horizon,
            samples,
            trace: times.iter().copied().zip(d1).collect(),
        });
    }
    Ok(out)
}

/// `|| [U_S, <A_S>] ||` with `<A_S>` the infinite-time Heisenberg average.
pub fn transport_diagnostic(sd: &SpectralData, region: &Region, u_s: MatRef<'_, c64>, a_s: MatRef<'_, c64>) -> Result<f64> {
    let ds = region.hilbert_dim(sd.spec());
    if u_s.nrows() != ds || a_s.nrows() != ds || u_s.ncols() != ds || a_s.ncols() != ds {
        return Err(Error::DimensionMismatch { expected: ds, found: u_s.nrows().max(a_s.nrows()) });
    }
    let idx = SiteIndexer::new(sd.spec(), region.sites())?;
    let avg = spectral::heisenberg_time_average(sd, idx.embed(a_s).as_ref())?;
    let left = idx.apply_left(u_s, avg.as_ref());
    // avg U = (U^dagger avg)^dagger because avg is Hermitian
    let right = linalg::dagger(idx.apply_left(linalg::dagger(u_s).as_ref(), avg.as_ref()).as_ref());
    let comm = Mat::from_fn(left.nrows(), left.ncols(), |i, j| left[(i, j)] - right[(i, j)]);
    linalg::opnorm(comm.as_ref())
}

/// `max_{i,j} || <Phi_i(rho)> - <Phi_j(rho)> ||_S` over a set of local
/// channels (no threshold is attached).
pub fn channel_spread(sd: &SpectralData, rho: &DensityOperator, channels: &[QuantumChannel], s: &Region) -> Result<f64> {
    let reduced = channels
        .iter()
        .map(|ch| dephase(sd, &apply_channel(ch, rho)?)?.partial_trace(s))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..reduced.len() {
        for j in i + 1..reduced.len() {
            worst = worst.max(trace_distance(reduced[i].as_ref(), reduced[j].as_ref())?);
        }
    }
    Ok(worst)
}

/// Disjoint single-site pairs `({i}, {i + r})` along the first axis, one
/// per distance `r = 1..=max_distance`, anchored at `anchor`.
pub fn chain_pairs(spec: &LatticeSpec, anchor: usize, max_distance: usize) -> Result<Vec<(Region, Region)>> {
    (1..=max_distance)
        .filter(|r| anchor + r < spec.side())
        .map(|r| Ok((Region::new(spec, [anchor])?, Region::new(spec, [anchor + r])?)))
        .collect()
}

/// Convention tags attached to every report.
pub fn default_conventions() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("trace_distance".into(), "half_trace_norm".into());
    m.insert("log_base".into(), "natural".into());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::operators::{build_family, Family, LocalTerm, Params};
    use crate::quadrature::integrate;
    use crate::spectral::{diagonalize, evolve, gap_census};
    use crate::states::{local_distance, thermal_state};
    use proptest::prelude::*;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (String::from(*k), *v)).collect()
    }

    fn tfim(n: usize, h: f64) -> LocalHamiltonian {
        build_family(Family::Tfim, &params(&[("J", 1.0), ("h", h)]), &LatticeSpec::chain(n).unwrap()).unwrap()
    }

    fn z_field(n: usize) -> LocalHamiltonian {
        let spec = LatticeSpec::chain(n).unwrap();
        let terms = (0..n)
            .map(|i| LocalTerm::new(&spec, Region::new(&spec, [i]).unwrap(), linalg::pauli_z(), "z").unwrap())
            .collect();
        LocalHamiltonian::new(spec, terms, 1).unwrap()
    }

    #[test]
    fn variance_examples() {
        let h = z_field(4);
        let sd = diagonalize(&h, None).unwrap();
        let ground = thermal_state(&sd, f64::INFINITY).unwrap();
        assert!(energy_variance(ground.state(), &h).unwrap().sigma_sq.abs() < 1e-12);
        let plus = DensityOperator::plus_state(h.spec()).unwrap();
        let v = energy_variance(&plus, &h).unwrap();
        assert!((v.sigma_sq - 4.0).abs() < 1e-12);
        assert!((v.s - 1.0).abs() < 1e-12);
        let spectral = energy_variance_spectral(&sd, &plus).unwrap();
        assert!((spectral.sigma_sq - 4.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_variance_is_log_partition_curvature() {
        let h = tfim(8, 1.0);
        let sd = diagonalize(&h, None).unwrap();
        let beta = 0.5;
        let t = thermal_state(&sd, beta).unwrap();
        let v = energy_variance(t.state(), &h).unwrap().with_beta(beta);
        let lz = |b: f64| crate::states::log_partition(sd.energies(), b);
        let step = 1e-3;
        let fd = (lz(beta + step) - 2.0 * lz(beta) + lz(beta - step)) / (step * step);
        assert!((v.sigma_sq - fd).abs() < 1e-5, "{} vs {fd}", v.sigma_sq);
        assert!(v.specific_heat.unwrap() > 0.0);
    }

    #[test]
    fn variance_is_invariant_under_dephasing() {
        let h = tfim(5, 0.8);
        let sd = diagonalize(&h, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random::mixed_state(h.spec(), &mut rng);
        let a = energy_variance(&rho, &h).unwrap();
        let b = energy_variance(&dephase(&sd, &rho).unwrap(), &h).unwrap();
        assert!((a.sigma_sq - b.sigma_sq).abs() < 1e-9);
        assert!((a.mean_energy - b.mean_energy).abs() < 1e-9);
    }

    #[test]
    fn product_state_has_no_correlations() {
        let spec = LatticeSpec::chain(4).unwrap();
        let rho = random::product_state(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        let fit = correlation_fit(&rho, &chain_pairs(&spec, 0, 3).unwrap(), 50, 7).unwrap();
        assert!(fit.degenerate);
        assert!(fit.samples.iter().all(|s| s.upper < 1e-14 && s.lower < 1e-14));
    }

    #[test]
    fn bell_pair_is_maximally_correlated() {
        let spec = LatticeSpec::chain(2).unwrap();
        let s = libm::sqrt(0.5);
        let bell = DensityOperator::pure(spec, &[c64::new(s, 0.0), ZERO, ZERO, c64::new(s, 0.0)]).unwrap();
        let pair = (Region::new(&spec, [0]).unwrap(), Region::new(&spec, [1]).unwrap());
        let fit = correlation_fit(&bell, &[pair], 50, 1).unwrap();
        let sample = &fit.samples[0];
        assert_eq!(sample.distance, 1);
        assert!(sample.lower >= 1.0 - 1e-9, "{}", sample.lower);
        assert!(sample.upper >= sample.lower);
        assert!((sample.upper - 1.5).abs() < 1e-12);
    }

    #[test]
    fn thermal_correlations_decay() {
        let h = tfim(8, 1.0);
        let sd = diagonalize(&h, None).unwrap();
        let t = thermal_state(&sd, 0.3).unwrap();
        let fit = correlation_fit(t.state(), &chain_pairs(h.spec(), 1, 5).unwrap(), 50, 2).unwrap();
        assert!(!fit.degenerate);
        assert!(fit.xi_hat.unwrap() > 0.0);
        assert!(fit.fit_quality.unwrap() > 0.9);
        for s in &fit.samples {
            assert!(s.lower <= s.upper + 1e-12);
        }
        for w in fit.samples.windows(2) {
            assert!(w[1].lower < w[0].lower);
        }
    }

    #[test]
    fn single_qubit_cdf_distance() {
        let spec = LatticeSpec::chain(1).unwrap();
        let sd = diagonalize(&z_field(1), None).unwrap();
        let cdfs = spectral_cdfs(&sd, &DensityOperator::maximally_mixed(&spec)).unwrap();
        // Phi(-1) from quadrature of the normal density, independent of erfc
        let density = |x: f64| libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
        let phi_minus_one = 0.5 - integrate(64, -1.0, 0.0, density);
        let oracle = (0.5 - phi_minus_one).max(phi_minus_one);
        assert!((cdfs.delta - oracle).abs() < 1e-12);
        assert!((cdfs.delta - 0.341_344_746_068_542_9).abs() < 1e-12);
        assert_eq!(cdfs.f_values, [0.5, 1.0]);
        assert_eq!(cdfs.step_cdf(0.0), 0.5);
    }

    #[test]
    fn eigenstate_has_degenerate_gaussian() {
        let sd = diagonalize(&tfim(4, 0.7), None).unwrap();
        let ground = thermal_state(&sd, f64::INFINITY).unwrap();
        assert!(matches!(spectral_cdfs(&sd, ground.state()), Err(Error::DegenerateGaussian(_))));
        assert!(effective_dimension_bound_check(&sd, ground.state()).is_err());
    }

    #[test]
    fn concentrated_state_has_large_delta() {
        let sd = diagonalize(&tfim(6, 0.9), None).unwrap();
        let mid = sd.dim() / 2;
        let v: Vec<c64> = (0..sd.dim()).map(|i| sd.vectors()[(i, mid)] * 0.999_f64.sqrt() + sd.vectors()[(i, mid + 1)] * 0.001_f64.sqrt()).collect();
        let rho = DensityOperator::pure(*sd.spec(), &v).unwrap();
        let cdfs = spectral_cdfs(&sd, &rho).unwrap();
        assert!(cdfs.delta > 0.45);
    }

    #[test]
    fn cdf_delta_ignores_energy_shift() {
        let h = tfim(5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random::product_state(h.spec(), &mut rng);
        let a = spectral_cdfs(&diagonalize(&h, None).unwrap(), &rho).unwrap();
        let b = spectral_cdfs(&diagonalize(&h.clone().with_offset(3.7), None).unwrap(), &rho).unwrap();
        assert!((a.delta - b.delta).abs() < 1e-9);
    }

    #[test]
    fn mc_distance_of_precessing_qubit() {
        let spec = LatticeSpec::chain(1).unwrap();
        let sd = diagonalize(&z_field(1), None).unwrap();
        let plus = DensityOperator::plus_state(&spec).unwrap();
        let mixed = DensityOperator::maximally_mixed(&spec);
        let site = Region::new(&spec, [0]).unwrap();
        let horizon = spectral::default_horizon(&gap_census(&sd, None)).unwrap();
        let est = mc_average_distance(&sd, &plus, &mixed, &site, 2000, horizon, 0.5).unwrap();
        // the Bloch vector stays on the equator, so the distance is 1/2 at all times
        let oracle = integrate(64, 0.0, core::f64::consts::PI, |_| 0.5) / core::f64::consts::PI;
        assert!((est.estimate - oracle).abs() < 1e-12);
        assert!(est.converged);
        // distance to |+> itself averages |sin t| over a period: 2/pi
        let est = mc_average_distance(&sd, &plus, &plus, &site, 2000, horizon, 0.5).unwrap();
        let oracle = integrate(64, 0.0, core::f64::consts::PI, libm::sin) / core::f64::consts::PI;
        assert!((est.estimate - oracle).abs() < 3.0 * est.stderr + 1e-3);
    }

    #[test]
    fn stationary_state_has_zero_distance() {
        let sd = diagonalize(&tfim(4, 0.7), None).unwrap();
        let t = thermal_state(&sd, 0.6).unwrap();
        let s = Region::new(sd.spec(), [1]).unwrap();
        let est = mc_average_distance(&sd, t.state(), t.state(), &s, 100, 10.0, 0.5).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn trajectory_routes_agree_with_direct_evolution() {
        let h = tfim(5, 0.8);
        let sd = diagonalize(&h, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let psi = random::product_state(h.spec(), &mut rng);
        let dense = DensityOperator::from_matrix_unchecked(*h.spec(), psi.to_matrix());
        let region = Region::new(h.spec(), [1, 3]).unwrap();
        let times = [0.0, 0.37, 2.5, 11.0];
        let fast = LocalTrajectory::new(&sd, &psi, &region).unwrap().reduced_states(&times);
        let slow = LocalTrajectory::new(&sd, &dense, &region).unwrap().reduced_states(&times);
        for (k, &t) in times.iter().enumerate() {
            let direct = evolve(&sd, &psi, t).unwrap().partial_trace(&region).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((fast[k][(i, j)] - direct[(i, j)]).norm() < 1e-12);
                    assert!((slow[k][(i, j)] - direct[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shared_trajectory_matches_single_regions() {
        let h = tfim(5, 0.6);
        let sd = diagonalize(&h, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random::product_state(h.spec(), &mut rng);
        let dense = DensityOperator::from_matrix_unchecked(*h.spec(), psi.to_matrix());
        let regions = [Region::new(h.spec(), [0]).unwrap(), Region::new(h.spec(), [2, 4]).unwrap()];
        let times = [0.1, 3.0, 7.7];
        for rho in [&psi, &dense] {
            let all = LocalTrajectory::for_regions(&sd, rho, &regions).unwrap().reduced_states_all(&times);
            for (r, states) in regions.iter().zip(&all) {
                let one = LocalTrajectory::new(&sd, rho, r).unwrap().reduced_states(&times);
                for (a, b) in states.iter().zip(&one) {
                    assert!((a - b).norm_l2() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn transport_examples() {
        let spec = LatticeSpec::chain(1).unwrap();
        let sd = diagonalize(&z_field(1), None).unwrap();
        let site = Region::new(&spec, [0]).unwrap();
        let x = linalg::pauli_x();
        let z = linalg::pauli_z();
        // A = Z commutes with H: returns ||[X, Z]|| = 2
        assert!((transport_diagnostic(&sd, &site, x.as_ref(), z.as_ref()).unwrap() - 2.0).abs() < 1e-12);
        assert!(transport_diagnostic(&sd, &site, linalg::identity(2).as_ref(), x.as_ref()).unwrap() < 1e-15);
    }

    #[test]
    fn channel_spread_of_identical_channels_is_zero() {
        let h = tfim(4, 0.8);
        let sd = diagonalize(&h, None).unwrap();
        let t = thermal_state(&sd, 0.5).unwrap();
        let site = Region::new(h.spec(), [0]).unwrap();
        let ch = crate::operators::build_channel(crate::operators::ChannelKind::Depolarizing, &Params::new(), h.spec(), site.clone()).unwrap();
        assert!(channel_spread(&sd, t.state(), &[ch.clone(), ch], &site).unwrap() < 1e-14);
    }

    #[test]
    fn translation_invariant_states_agree_on_every_cube() {
        let spec = LatticeSpec::chain(6).unwrap().with_boundary(Boundary::Periodic);
        let h = build_family(Family::Tfim, &params(&[("J", 1.0), ("h", 0.7)]), &spec).unwrap();
        let sd = diagonalize(&h, None).unwrap();
        let t = thermal_state(&sd, 0.4).unwrap();
        let plus = DensityOperator::plus_state(&spec).unwrap();
        let per_cube: Vec<f64> = crate::lattice::cubic_subsystems(&spec, 2)
            .unwrap()
            .iter()
            .map(|c| local_distance(&plus, t.state(), c).unwrap())
            .collect();
        assert!(per_cube.iter().all(|d| (d - per_cube[0]).abs() < 1e-10));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn berry_esseen_surrogate_holds_for_product_states(seed in any::<u64>()) {
            let sd = diagonalize(&tfim(6, 0.9), None).unwrap();
            let rho = random::product_state(sd.spec(), &mut ChaCha8Rng::seed_from_u64(seed));
            let report = effective_dimension_bound_check(&sd, &rho).unwrap();
            prop_assert!(report.holds, "{} > {}", report.lhs, report.rhs);
        }

        #[test]
        fn correlation_bracket_is_ordered_and_symmetric(seed in any::<u64>()) {
            let spec = LatticeSpec::chain(3).unwrap();
            let rho = random::mixed_state(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
            let (x, y) = (Region::new(&spec, [0]).unwrap(), Region::new(&spec, [2]).unwrap());
            let fwd = correlation_fit(&rho, &[(x.clone(), y.clone())], 50, seed).unwrap();
            let bwd = correlation_fit(&rho, &[(y, x)], 50, seed).unwrap();
            let (f, b) = (&fwd.samples[0], &bwd.samples[0]);
            prop_assert!(f.lower <= f.upper + 1e-12);
            prop_assert!((f.upper - b.upper).abs() < 1e-12);
            // qubit pairs: the rank-one optimum is reached from either side
            prop_assert!((f.lower - b.lower).abs() < 1e-6 * f.upper.max(1e-12));
        }
    }
}
