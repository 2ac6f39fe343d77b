//! Evaluated inequalities with verdicts: the equilibration bound, the
//! Berry-Esseen surrogate, the cube-average certifier and its exact check,
//! the thermalization triangle, and the relative-entropy bounds for local
//! channels and Hamiltonian perturbations.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use faer::Mat;

use crate::diagnostics::{
    default_conventions, energy_variance_spectral, mean_stderr, spectral_cdfs, CorrelationFit, LocalTrajectory,
    McConfig,
};
use crate::digest::InputDigest;
use crate::error::{domain, Result};
use crate::lattice::{cubic_subsystems, Region};
use crate::linalg;
use crate::operators::{apply_channel, LocalHamiltonian, QuantumChannel};
use crate::quadrature::{gauss_legendre, weyl_times};
use crate::spectral::{dephase, diagonalize, diagonalize_matrix, effective_dimension, GapCensus, SpectralData, DEFAULT_DIM_CAP};
use crate::states::{entropy, local_distance, log_partition, relative_entropy, thermal_state, trace_distance, DensityOperator};

/// How a verdict should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundKind {
    /// A proved inequality: `holds = false` means a bug.
    Proved,
    /// Constant-free exact stand-in for a bound with unknown constants;
    /// also proved.
    Surrogate,
    /// `holds` reports whether the premises of a conditional statement are
    /// met.
    PremiseCheck,
    /// The inequality is evaluated although its premises are not
    /// established; a failure is not a falsification.
    UnconditionalCheck,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Premise {
    pub name: String,
    pub satisfied: bool,
    pub value: f64,
}

/// Left and right side of one inequality plus its verdict.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub name: String,
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    /// `lhs <= rhs + tolerance`, except for premise checks where it is the
    /// conjunction of the premises.
    pub holds: bool,
    /// No dynamics: the inequality is trivially true.
    pub vacuous: bool,
    pub premises: Vec<Premise>,
    pub convention_notes: BTreeMap<String, String>,
    pub inputs_digest: String,
    /// Auxiliary numbers (intermediate quantities, scaling columns).
    pub extras: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(name: &str, kind: BoundKind, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            lhs,
            rhs,
            tolerance,
            holds: lhs <= rhs + tolerance,
            vacuous: false,
            premises: Vec::new(),
            convention_notes: default_conventions(),
            inputs_digest: String::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn premise(&mut self, name: &str, satisfied: bool, value: f64) {
        self.premises.push(Premise { name: name.to_string(), satisfied, value });
    }

    pub fn extra(&mut self, key: &str, value: f64) {
        self.extras.insert(key.to_string(), value);
    }

    /// A proved verdict came out false.
    pub fn proved_bound_failed(&self) -> bool {
        matches!(self.kind, BoundKind::Proved | BoundKind::Surrogate) && !self.holds
    }

    /// Some listed premise is unmet.
    pub fn premise_failed(&self) -> bool {
        self.premises.iter().any(|p| !p.satisfied) || (self.kind == BoundKind::PremiseCheck && !self.holds)
    }
}

fn digest_of(name: &str, sd: &SpectralData, numbers: &[f64]) -> String {
    InputDigest::new().str(name).f64s(sd.energies()).f64s(numbers).hex()
}

/// `D_S(<rho>) <= (1/2) sqrt(D_G d_S^2 / d_eff)` with the left side sampled
/// over time; tolerance is three standard errors.
pub fn equilibration_bound(sd: &SpectralData, census: &GapCensus, rho: &DensityOperator, s: &Region, mc: &McConfig) -> Result<BoundReport> {
    Ok(equilibration_bounds(sd, census, rho, core::slice::from_ref(s), mc)?.swap_remove(0))
}

/// [`equilibration_bound`] for several subsystems sharing one evolution.
pub fn equilibration_bounds(
    sd: &SpectralData,
    census: &GapCensus,
    rho: &DensityOperator,
    regions: &[Region],
    mc: &McConfig,
) -> Result<Vec<BoundReport>> {
    let horizon = mc.horizon_for(census);
    let dephased = dephase(sd, rho)?;
    let estimates = crate::diagnostics::mc_average_distances(sd, rho, &dephased, regions, mc.samples, horizon, mc.offset)?;
    let (d_eff, _) = effective_dimension(sd, rho)?;
    let variance = energy_variance_spectral(sd, rho)?;
    let d_g = census.most_degenerate_multiplicity as f64;
    let mut out = Vec::with_capacity(regions.len());
    for (s, est) in regions.iter().zip(estimates) {
        let d_s = s.hilbert_dim(sd.spec()) as f64;
        let rhs = 0.5 * libm::sqrt(d_g * d_s * d_s / d_eff);
        let mut report = BoundReport::new("equilibration", BoundKind::Proved, est.estimate, rhs, 3.0 * est.stderr);
        report.vacuous = census.vacuous || variance.sigma_sq <= 0.0;
        report.extra("d_eff", d_eff);
        report.extra("gap_degeneracy", d_g);
        report.extra("gap_degeneracy_rank_weighted", census.rank_weighted_multiplicity);
        report.extra("subsystem_dim", d_s);
        report.extra("stderr", est.stderr);
        report.extra("horizon", horizon);
        report.extra("estimate_doubled_horizon", est.estimate_doubled);
        report.extra("converged", if est.converged { 1.0 } else { 0.0 });
        report.convention_notes.insert("time_average".into(), "additive_recurrence_sampling".into());
        report.convention_notes.insert("gap_count".into(), "ordered_level_pairs_unweighted".into());
        let sites: Vec<f64> = s.sites().iter().map(|&x| x as f64).collect();
        report.inputs_digest = digest_of(&report.name, sd, &[&sites[..], &[mc.samples as f64, horizon, mc.offset]].concat());
        out.push(report);
    }
    Ok(out)
}

/// Verdict on `1/d_eff <= 2 Delta`, with the scaling column
/// `(1/d_eff) s^3 sqrt(N) / ln^{2d} N` for cross-size inspection.
pub fn surrogate_pipeline(sd: &SpectralData, rho: &DensityOperator, fit: Option<&CorrelationFit>) -> Result<BoundReport> {
    let cdfs = spectral_cdfs(sd, rho)?;
    let (d_eff, inverse) = effective_dimension(sd, rho)?;
    let variance = energy_variance_spectral(sd, rho)?;
    let n = sd.spec().sites() as f64;
    let dim = sd.spec().dim() as f64;
    let mut report = BoundReport::new("berry_esseen_surrogate", BoundKind::Surrogate, inverse, 2.0 * cdfs.delta, 1e-9);
    report.extra("d_eff", d_eff);
    report.extra("delta", cdfs.delta);
    report.extra("s", variance.s);
    report.extra("sigma_sq", variance.sigma_sq);
    report.extra("n_sites", n);
    let log_term = libm::pow(libm::log(n), 2.0 * dim);
    if log_term > 0.0 {
        report.extra("scaling_ratio", inverse * libm::pow(variance.s, 3.0) * libm::sqrt(n) / log_term);
    }
    if let Some(fit) = fit {
        if let (Some(xi), Some(k)) = (fit.xi_hat, fit.k_hat) {
            report.extra("xi_hat", xi);
            report.extra("k_hat", k);
        }
        report.premise("correlation_decay_fitted", fit.xi_hat.is_some(), fit.xi_hat.unwrap_or(f64::INFINITY));
    }
    report.inputs_digest = digest_of(&report.name, sd, &[cdfs.gauss_mean, cdfs.gauss_sigma]);
    Ok(report)
}

/// Logarithm used for the `log(N^{...})` term of the geometry condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LogBase {
    #[default]
    Natural,
    Binary,
}

impl LogBase {
    fn name(self) -> &'static str {
        match self {
            LogBase::Natural => "natural",
            LogBase::Binary => "binary",
        }
    }
}

/// Inputs of the cube-average certifier.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeAverageParams {
    pub d: u32,
    /// `N`, real so that frontiers beyond desk scale can be evaluated.
    pub n_sites: f64,
    pub l: u32,
    pub d_loc: u32,
    pub alpha: f64,
    pub xi: f64,
    pub k: f64,
}

impl CubeAverageParams {
    pub fn validate(&self) -> Result<()> {
        let upper = 1.0 / (self.d as f64 + 2.0);
        if !(self.alpha > 0.0 && self.alpha < upper) {
            return Err(domain(alloc::format!("alpha must lie in (0, {upper})")));
        }
        if self.d == 0 || self.l == 0 || self.d_loc < 2 {
            return Err(domain("need d >= 1, l >= 1, d_loc >= 2"));
        }
        if !(self.xi > 0.0) || !(self.k >= 0.0) || !(self.n_sites >= 1.0) {
            return Err(domain("need xi > 0, K >= 0, N >= 1"));
        }
        Ok(())
    }

    pub fn with_sites(self, n_sites: f64) -> Self {
        Self { n_sites, ..self }
    }
}

/// Both sides of the geometry condition and the derived thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryCondition {
    pub lhs: f64,
    pub rhs: f64,
    /// `K < 1`: the exponent `ln K / ln N` was floored at zero.
    pub clamped: bool,
    pub entropy_threshold: f64,
    pub conclusion: f64,
    /// `l <= (n + 1) / 2` with `n = N^{1/d}`.
    pub cube_fits: bool,
}

impl GeometryCondition {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `3 N^a + ((2 xi ln d_loc + 3) / (xi ln 2)) l^d + log(N^{E})` against
/// `N^{(1-a)/(d+1)} / (4 xi^{d/(d+1)})`, with `E = max(0, ln K / ln N) + 3`.
pub fn geometry_condition(p: &CubeAverageParams, base: LogBase) -> GeometryCondition {
    let d = p.d as f64;
    let n = p.n_sites;
    let ln_n = libm::log(n);
    let clamped = p.k < 1.0;
    let exponent_times_ln_n = if clamped { 3.0 * ln_n } else { libm::log(p.k) + 3.0 * ln_n };
    let log_term = match base {
        LogBase::Natural => exponent_times_ln_n,
        LogBase::Binary => exponent_times_ln_n / core::f64::consts::LN_2,
    };
    let lhs = 3.0 * libm::pow(n, p.alpha)
        + (2.0 * p.xi * libm::log(p.d_loc as f64) + 3.0) / (p.xi * core::f64::consts::LN_2) * libm::pow(p.l as f64, d)
        + log_term;
    let prefactor = 1.0 / (4.0 * libm::pow(p.xi, d / (d + 1.0)));
    let rhs = prefactor * libm::pow(n, (1.0 - p.alpha) / (d + 1.0));
    let entropy_threshold = prefactor * libm::pow(n, (1.0 - (2.0 + d) * p.alpha) / (d + 1.0));
    let side = libm::pow(n, 1.0 / d);
    GeometryCondition {
        lhs,
        rhs,
        clamped,
        entropy_threshold,
        conclusion: 7.0 / libm::pow(n, p.alpha / 2.0),
        cube_fits: p.l as f64 <= (side + 1.0) / 2.0 + 1e-9,
    }
}

/// Premises of the cube-average bound at the given relative entropy.
///
/// `lhs`/`rhs` are the two sides of the geometry condition; `holds` is the
/// conjunction of all premises; the conclusion `7 / N^{a/2}` is in
/// `extras["conclusion"]`.
pub fn cube_average_certify(p: &CubeAverageParams, rel_entropy: f64, base: LogBase) -> Result<BoundReport> {
    p.validate()?;
    if rel_entropy.is_nan() || rel_entropy < -1e-9 {
        return Err(domain("relative entropy must be non-negative or +inf"));
    }
    let g = geometry_condition(p, base);
    let other = geometry_condition(p, if base == LogBase::Natural { LogBase::Binary } else { LogBase::Natural });
    let mut report = BoundReport::new("cube_average_certifier", BoundKind::PremiseCheck, g.lhs, g.rhs, 0.0);
    report.premise("geometry_condition", g.holds(), g.rhs - g.lhs);
    report.premise("cube_fits_lattice", g.cube_fits, p.l as f64);
    report.premise("relative_entropy_threshold", rel_entropy <= g.entropy_threshold, rel_entropy);
    report.holds = report.premises.iter().all(|q| q.satisfied);
    report.extra("conclusion", g.conclusion);
    report.extra("entropy_threshold", g.entropy_threshold);
    report.extra("exponent_clamped", if g.clamped { 1.0 } else { 0.0 });
    report.extra("geometry_condition_other_log_base", if other.holds() { 1.0 } else { 0.0 });
    report.convention_notes.insert("log_base".into(), base.name().into());
    if other.holds() != g.holds() {
        report.convention_notes.insert("log_base_disagreement".into(), "geometry verdict differs between natural and binary log".into());
    }
    if g.clamped {
        report.convention_notes.insert("k_clamp".into(), "ln(K)/ln(N) floored at 0 because K < 1".into());
    }
    report.inputs_digest = InputDigest::new()
        .str(&report.name)
        .f64s(&[p.d as f64, p.n_sites, p.l as f64, p.d_loc as f64, p.alpha, p.xi, p.k, rel_entropy])
        .str(base.name())
        .hex();
    Ok(report)
}

/// Smallest `N = n^d` at which the geometry condition holds and the cube
/// fits, by doubling and bisection over the side `n`; `None` if it does not
/// happen below `max_sites`.
pub fn cube_average_frontier(p: &CubeAverageParams, base: LogBase, max_sites: f64) -> Result<Option<f64>> {
    p.validate()?;
    let d = p.d as i32;
    let ok = |side: f64| {
        let g = geometry_condition(&p.with_sites(libm::pow(side, d as f64)), base);
        g.holds() && g.cube_fits
    };
    let sites = |side: f64| libm::pow(side, d as f64);
    let mut hi = 1.0f64;
    while !ok(hi) {
        hi *= 2.0;
        if sites(hi) > max_sites {
            return Ok(None);
        }
    }
    if hi == 1.0 {
        return Ok(Some(1.0));
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1.0 {
        let mid = libm::floor(0.5 * (lo + hi));
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(sites(hi)))
}

/// Exact `E_{S in C_l} ||sigma - tau||_S` against `7 / N^{a/2}`.
pub fn cube_average_verify(sigma: &DensityOperator, tau: &DensityOperator, l: usize, alpha: f64, premises_held: bool) -> Result<BoundReport> {
    let spec = sigma.spec();
    if spec != tau.spec() {
        return Err(domain("states live on different lattices"));
    }
    let cubes = cubic_subsystems(spec, l)?;
    let distances = cubes.iter().map(|c| local_distance(sigma, tau, c)).collect::<Result<Vec<_>>>()?;
    let (mean, _) = mean_stderr(&distances);
    let spread = distances.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / distances.len() as f64;
    let n = spec.sites() as f64;
    let kind = if premises_held { BoundKind::Proved } else { BoundKind::UnconditionalCheck };
    let mut report = BoundReport::new("cube_average_distance", kind, mean, 7.0 / libm::pow(n, alpha / 2.0), 0.0);
    report.extra("cube_count", cubes.len() as f64);
    report.extra("cube_variance", spread);
    report.extra("cube_max", distances.iter().fold(0.0, |m: f64, &x| m.max(x)));
    report.extra("alpha", alpha);
    report.premise("certified_premises", premises_held, if premises_held { 1.0 } else { 0.0 });
    report.inputs_digest = InputDigest::new().str(&report.name).f64s(&distances).f64(alpha).hex();
    Ok(report)
}

/// Distances for one cube in the thermalization decomposition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeTerms {
    pub sites: Vec<usize>,
    /// Time average of `||rho(t) - rho_beta||_S`.
    pub to_thermal: f64,
    pub to_thermal_stderr: f64,
    /// Time average of `||rho(t) - <rho>||_S`.
    pub to_dephased: f64,
    pub to_dephased_stderr: f64,
    /// `||<rho> - rho_beta||_S`.
    pub dephased_to_thermal: f64,
    /// `(1/2) sqrt(D_G d_S^2 / d_eff)`.
    pub equilibration_rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThermalizationOutcome {
    /// `E_S D_S(rho_beta) <= E_S D_S(<rho>) + E_S ||<rho> - rho_beta||_S`,
    /// sample by sample.
    pub triangle: BoundReport,
    /// The same with `D_S(<rho>)` replaced by the equilibration bound.
    pub with_equilibration_bound: BoundReport,
    pub cubes: Vec<CubeTerms>,
}

/// Cube-averaged distance of `rho(t)` to `rho_beta`, split by the triangle
/// inequality through `<rho>`. Every time sample uses the same grid for
/// all three distances, so the split holds sample by sample.
#[allow(clippy::too_many_arguments)]
pub fn thermalization_bound(
    sd: &SpectralData,
    census: &GapCensus,
    rho: &DensityOperator,
    beta: f64,
    l: usize,
    alpha: f64,
    mc: &McConfig,
    fit: Option<&CorrelationFit>,
) -> Result<ThermalizationOutcome> {
    let thermal = thermal_state(sd, beta)?;
    let thermal_var = energy_variance_spectral(sd, thermal.state())?;
    if !(thermal_var.sigma_sq > 0.0) {
        return Err(crate::Error::DegenerateGaussian(thermal_var.sigma_sq));
    }
    let dephased = dephase(sd, rho)?;
    let (d_eff, _) = effective_dimension(sd, rho)?;
    let d_g = census.most_degenerate_multiplicity as f64;
    let horizon = mc.horizon_for(census);
    let times = weyl_times(mc.samples, horizon, mc.offset);
    let spec = sd.spec();

    let regions = cubic_subsystems(spec, l)?;
    let all_states = LocalTrajectory::for_regions(sd, rho, &regions)?.reduced_states_all(&times);
    let mut cubes = Vec::new();
    for (cube, states) in regions.iter().zip(all_states) {
        let t_s = thermal.state().partial_trace(cube)?;
        let a_s = dephased.partial_trace(cube)?;
        let mut to_thermal = Vec::with_capacity(states.len());
        let mut to_dephased = Vec::with_capacity(states.len());
        for r in &states {
            to_thermal.push(trace_distance(r.as_ref(), t_s.as_ref())?);
            to_dephased.push(trace_distance(r.as_ref(), a_s.as_ref())?);
        }
        let (m1, e1) = mean_stderr(&to_thermal);
        let (m2, e2) = mean_stderr(&to_dephased);
        let d_s = cube.hilbert_dim(spec) as f64;
        cubes.push(CubeTerms {
            sites: cube.sites().to_vec(),
            to_thermal: m1,
            to_thermal_stderr: e1,
            to_dephased: m2,
            to_dephased_stderr: e2,
            dephased_to_thermal: trace_distance(a_s.as_ref(), t_s.as_ref())?,
            equilibration_rhs: 0.5 * libm::sqrt(d_g * d_s * d_s / d_eff),
        });
    }
    let count = cubes.len() as f64;
    let avg = |f: &dyn Fn(&CubeTerms) -> f64| cubes.iter().map(f).sum::<f64>() / count;
    let lhs = avg(&|c| c.to_thermal);
    let part_dynamic = avg(&|c| c.to_dephased);
    let part_static = avg(&|c| c.dephased_to_thermal);
    let equilibration = avg(&|c| c.equilibration_rhs);
    let stderr = avg(&|c| c.to_dephased_stderr);

    let rel = relative_entropy(&dephased, thermal.state())?;
    let n = spec.sites() as f64;
    let dim = spec.dim() as f64;
    let s = thermal_var.s;
    let structural = (libm::sqrt(d_g / (s * s * s * libm::pow(n, dim / (2.0 * dim + 4.0)))) + 1.0) / libm::pow(n, alpha / 2.0);

    let mut triangle = BoundReport::new("thermalization_triangle", BoundKind::Proved, lhs, part_dynamic + part_static, 1e-9);
    triangle.extra("dynamic_part", part_dynamic);
    triangle.extra("static_part", part_static);
    triangle.extra("relative_entropy_dephased_thermal", rel);
    triangle.extra("structural_scaling", structural);
    triangle.extra("s_thermal", s);
    triangle.extra("beta", beta);
    triangle.extra("horizon", horizon);

    let certified = match fit.and_then(|f| f.xi_hat.zip(f.k_hat)) {
        Some((xi, k)) => {
            let p = CubeAverageParams { d: spec.dim() as u32, n_sites: n, l: l as u32, d_loc: spec.local_dim() as u32, alpha, xi, k };
            Some(cube_average_certify(&p, rel, LogBase::Natural)?)
        }
        None => None,
    };
    let entropy_ok = certified.as_ref().is_some_and(|c| c.premises.iter().any(|p| p.name == "relative_entropy_threshold" && p.satisfied));
    let geometry_ok = certified.as_ref().is_some_and(|c| c.holds);
    triangle.premise("relative_entropy_small", entropy_ok, rel);
    triangle.premise("thermal_correlation_decay", fit.is_some_and(|f| f.xi_hat.is_some()), fit.and_then(|f| f.xi_hat).unwrap_or(f64::INFINITY));
    triangle.premise("cube_average_premises", geometry_ok, certified.as_ref().map_or(f64::NEG_INFINITY, |c| c.rhs - c.lhs));
    let digest = InputDigest::new().str("thermalization").f64s(sd.energies()).f64s(&[beta, l as f64, alpha, mc.samples as f64, horizon, mc.offset]).hex();
    triangle.inputs_digest = digest.clone();

    let mut with_bound = BoundReport::new("thermalization_with_equilibration_bound", BoundKind::Proved, lhs, equilibration + part_static, 3.0 * stderr);
    with_bound.vacuous = census.vacuous;
    with_bound.extra("equilibration_rhs", equilibration);
    with_bound.extra("static_part", part_static);
    with_bound.inputs_digest = digest;
    Ok(ThermalizationOutcome { triangle, with_equilibration_bound: with_bound, cubes })
}

/// `S(<Phi(rho_beta)>||rho_beta) <= 2 beta ||H_A|| + 2 |A| ln d_loc`, both
/// sides exact, plus the sharper intermediate step and the energy-variance
/// shift caused by the channel.
pub fn local_channel_bound(sd: &SpectralData, h: &LocalHamiltonian, beta: f64, ch: &QuantumChannel) -> Result<BoundReport> {
    if sd.spec() != h.spec() {
        return Err(domain("spectral data and Hamiltonian differ in lattice"));
    }
    let thermal = thermal_state(sd, beta)?;
    let kicked = apply_channel(ch, thermal.state())?;
    let tau = dephase(sd, &kicked)?;
    let lhs = relative_entropy(&tau, thermal.state())?;
    let h_a = h.touching_norm(ch.support())?;
    let a = ch.support().len() as f64;
    let ln_d = libm::log(sd.spec().local_dim() as f64);
    let rhs = 2.0 * beta * h_a + 2.0 * a * ln_d;
    let mut report = BoundReport::new("local_channel_relative_entropy", BoundKind::Proved, lhs, rhs, 1e-8);
    let s_thermal = entropy(thermal.state())?;
    let s_tau = entropy(&tau)?;
    let intermediate = 2.0 * beta * h_a + s_thermal - s_tau;
    report.premise("entropy_difference_step", lhs <= intermediate + 1e-8, intermediate);
    report.premise("araki_lieb_step", s_thermal - s_tau <= 2.0 * a * ln_d + 1e-8, s_thermal - s_tau);
    let var_thermal = energy_variance_spectral(sd, thermal.state())?;
    let var_kicked = energy_variance_spectral(sd, &kicked)?;
    report.extra("local_hamiltonian_norm", h_a);
    report.extra("variance_gap", (var_thermal.sigma_sq - var_kicked.sigma_sq).abs());
    report.extra("beta", beta);
    report.extra("support_size", a);
    report.convention_notes.insert("channel".into(), ch.label().into());
    let sites: Vec<f64> = ch.support().sites().iter().map(|&x| x as f64).collect();
    report.inputs_digest = digest_of(&report.name, sd, &[&sites[..], &[beta]].concat());
    Ok(report)
}

/// `S(<rho_beta(H0)>||rho_beta(H)) <= 2 beta ||H - H0||` with `<.>` the
/// dephasing of `H`; optionally checks `ln Z(1) - ln Z(0)` against
/// `-beta int_0^1 tr[rho_beta(H_r) (H - H0)] dr` (Gauss-Legendre with
/// `duhamel_nodes` points, skipped when zero).
pub fn perturbation_bound(sd_h: &SpectralData, h: &LocalHamiltonian, h0: &LocalHamiltonian, beta: f64, duhamel_nodes: usize) -> Result<BoundReport> {
    if h.spec() != h0.spec() || sd_h.spec() != h.spec() {
        return Err(domain("Hamiltonians live on different lattices"));
    }
    let sd0 = diagonalize(h0, None)?;
    let rho = thermal_state(&sd0, beta)?;
    let target = thermal_state(sd_h, beta)?;
    let tau = dephase(sd_h, rho.state())?;
    let lhs = relative_entropy(&tau, target.state())?;
    let dim = sd_h.dim();
    let diff = Mat::from_fn(dim, dim, |i, j| h.dense()[(i, j)] - h0.dense()[(i, j)]);
    let norm = linalg::opnorm_hermitian(diff.as_ref())?;
    let mut report = BoundReport::new("perturbation_relative_entropy", BoundKind::Proved, lhs, 2.0 * beta * norm, 1e-8);
    report.extra("perturbation_norm", norm);
    report.extra("beta", beta);

    if duhamel_nodes > 0 && beta > 0.0 {
        let direct = log_partition(sd_h.energies(), beta) - log_partition(sd0.energies(), beta);
        let (x, w) = gauss_legendre(duhamel_nodes);
        let mut integral = 0.0;
        for (xk, wk) in x.iter().zip(&w) {
            let r = 0.5 * (xk + 1.0);
            let hr = Mat::from_fn(dim, dim, |i, j| h0.dense()[(i, j)] + diff[(i, j)] * r);
            let sd_r = diagonalize_matrix(h.spec(), hr.as_ref(), None, DEFAULT_DIM_CAP)?;
            let gibbs = thermal_state(&sd_r, beta)?;
            let mean = gibbs.state().expectation(diff.as_ref())?.re;
            integral += 0.5 * wk * mean;
        }
        let quadrature = -beta * integral;
        let gap = (quadrature - direct).abs();
        report.premise("duhamel_log_partition_identity", gap <= 1e-6, gap);
        report.extra("log_partition_difference", direct);
        report.extra("log_partition_quadrature", quadrature);
        report.extra("quadrature_nodes", duhamel_nodes as f64);
    }
    report.inputs_digest = InputDigest::new().str(&report.name).f64s(sd_h.energies()).f64s(sd0.energies()).f64(beta).hex();
    Ok(report)
}

/// `beta` with `tr[rho_beta H] = energy` by bisection; energies at or
/// above the infinite-temperature mean give `beta = 0` (`clamped`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaMatch {
    pub beta: f64,
    pub clamped: bool,
    pub residual: f64,
}

pub fn match_beta(sd: &SpectralData, energy: f64) -> Result<BetaMatch> {
    let e = sd.energies();
    let thermal_energy = |beta: f64| {
        let lz = log_partition(e, beta);
        let terms: Vec<f64> = e.iter().map(|&x| x * libm::exp(-beta * x - lz)).collect();
        linalg::pairwise_sum(&terms)
    };
    let tol = 1e-8 * energy.abs().max(1.0);
    let top = thermal_energy(0.0);
    if energy >= top - tol {
        return Ok(BetaMatch { beta: 0.0, clamped: energy > top + tol, residual: top - energy });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while thermal_energy(hi) > energy {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Ok(BetaMatch { beta: hi, clamped: true, residual: thermal_energy(hi) - energy });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = thermal_energy(mid) - energy;
        if f.abs() <= tol || hi - lo <= 1e-15 * hi {
            return Ok(BetaMatch { beta: mid, clamped: false, residual: f });
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok(BetaMatch { beta: mid, clamped: false, residual: thermal_energy(mid) - energy })
}

/// Same as [`crate::states::local_distance`] averaged over all cubes of
/// side `l`.
pub fn cube_average_distance(rho: &DensityOperator, tau: &DensityOperator, l: usize) -> Result<f64> {
    let cubes = cubic_subsystems(rho.spec(), l)?;
    let d = cubes.iter().map(|c| local_distance(rho, tau, c)).collect::<Result<Vec<_>>>()?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}
