//! Scenario drivers: quench, local-channel re-thermalization, Hamiltonian
//! perturbation, plain diagnostics and the certifier grid.

use std::collections::BTreeMap;
use std::time::Instant;

use qthermal_core::bounds::{
    cube_average_certify, cube_average_frontier, cube_average_verify, equilibration_bound, equilibration_bounds, local_channel_bound, match_beta,
    perturbation_bound, surrogate_pipeline, thermalization_bound, BoundKind, BoundReport, CubeAverageParams, LogBase,
    ThermalizationOutcome,
};
use qthermal_core::diagnostics::{
    chain_pairs, channel_spread, correlation_fit, energy_variance_spectral, mc_average_distances, spectral_cdfs, transport_diagnostic,
    CorrelationFit, McConfig, VarianceReport,
};
use qthermal_core::digest::InputDigest;
use qthermal_core::lattice::cubic_subsystems;
use qthermal_core::linalg;
use qthermal_core::operators::{apply_channel, build_channel, build_family, QuantumChannel};
use qthermal_core::spectral::{dephase, diagonalize, effective_dimension, gap_census};
use qthermal_core::states::thermal_state;
use qthermal_core::{c64, DensityOperator, GapCensus, LatticeSpec, LocalHamiltonian, Region, SpectralData};

use crate::config::{FamilyConfig, ScenarioConfig, ScenarioKind, StateRecipe};
use crate::error::{Error, Result};
use crate::record::{CensusSummary, FrontierRow, LabelledFit, Level, RunRecord, SizeResult, TimeAverage};

/// Runs whichever scenario the configuration names.
pub fn run(cfg: &ScenarioConfig) -> Result<RunRecord> {
    cfg.validate()?;
    match cfg.scenario {
        ScenarioKind::Quench => run_quench(cfg),
        ScenarioKind::Rethermalize => run_rethermalize(cfg),
        ScenarioKind::Perturb => run_perturb(cfg),
        ScenarioKind::Diagnostics => run_diagnostics(cfg),
        ScenarioKind::Certify => run_certify(cfg),
    }
}

fn expect(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<()> {
    if cfg.scenario != kind {
        return Err(Error::Config(format!("expected a {} configuration, got {}", kind.name(), cfg.scenario.name())));
    }
    cfg.validate()
}

fn new_record(cfg: &ScenarioConfig) -> RunRecord {
    let mut record = RunRecord::empty(cfg.scenario.name());
    let canonical = serde_json::to_string(cfg).expect("configuration serializes");
    record.config_digest = InputDigest::new().str(&canonical).hex();
    record.config = Some(cfg.clone());
    record.seed = cfg.seed();
    record
}

/// Runs `per_size` on every side of the sweep, each from scratch.
fn sweep(cfg: &ScenarioConfig, per_size: impl Fn(&ScenarioConfig, LatticeSpec, &mut Vec<String>) -> Result<SizeResult>) -> Result<RunRecord> {
    let mut record = new_record(cfg);
    for side in cfg.sizes() {
        let spec = cfg.lattice.spec(side)?;
        let start = Instant::now();
        let mut warnings = Vec::new();
        let result = per_size(cfg, spec, &mut warnings)?;
        record.wall_time.push((spec.sites(), start.elapsed().as_secs_f64()));
        record.warnings.extend(warnings.into_iter().map(|w| format!("N={}: {w}", spec.sites())));
        record.results.push(result);
    }
    Ok(record)
}

fn hamiltonian(fc: &FamilyConfig, spec: &LatticeSpec) -> Result<LocalHamiltonian> {
    Ok(build_family(fc.family, &fc.params, spec)?.with_offset(fc.offset))
}

fn mc(cfg: &ScenarioConfig) -> McConfig {
    let mut m = McConfig::seeded(cfg.analysis.samples, cfg.seed());
    m.horizon = cfg.analysis.t_override;
    m
}

fn empty_result(spec: &LatticeSpec, sd: &SpectralData, census: &GapCensus) -> SizeResult {
    let ranks = sd.level_ranks();
    SizeResult {
        side: spec.side(),
        n_sites: spec.sites(),
        hilbert_dim: spec.hilbert_dim(),
        rescale_factors: BTreeMap::new(),
        beta: None,
        beta_match: None,
        ground_multiplicity: None,
        levels: sd.level_energies().into_iter().zip(ranks).map(|(energy, rank)| Level { energy, rank }).collect(),
        gap_census: CensusSummary::from(census),
        effective_dimension: None,
        variance: None,
        cdfs: None,
        correlations: Vec::new(),
        time_averages: Vec::new(),
        cube_terms: Vec::new(),
        transport: None,
        channel_spread: None,
        bounds: Vec::new(),
    }
}

/// Lowest-index eigenvector and the size of the lowest level.
fn ground_state(sd: &SpectralData) -> Result<(DensityOperator, usize)> {
    let v = sd.vectors();
    let psi: Vec<c64> = (0..sd.dim()).map(|i| v[(i, 0)]).collect();
    Ok((DensityOperator::pure(*sd.spec(), &psi)?, sd.groups()[0].len()))
}

fn product_state(spec: &LatticeSpec, bits: &str) -> Result<DensityOperator> {
    let digits: Vec<usize> = bits.chars().map(|c| c.to_digit(10).unwrap_or(0) as usize).collect();
    let index = (0..spec.sites()).map(|s| digits[s % digits.len()] * spec.place_value(s)).sum();
    Ok(DensityOperator::basis_state(spec, index)?)
}

/// Cubes of side `l` followed by the explicit regions, with labels.
fn subsystems(cfg: &ScenarioConfig, spec: &LatticeSpec) -> Result<Vec<(String, Region)>> {
    let mut out: Vec<(String, Region)> = cubic_subsystems(spec, cfg.subsystem.l)?
        .into_iter()
        .map(|c| (format!("cube_{}", join(c.sites())), c))
        .collect();
    for r in &cfg.subsystem.regions {
        let region = Region::new(spec, r.iter().copied())?;
        out.push((format!("region_{}", join(region.sites())), region));
    }
    Ok(out)
}

fn join(sites: &[usize]) -> String {
    sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
}

fn fit(cfg: &ScenarioConfig, rho: &DensityOperator, label: &str) -> Result<LabelledFit> {
    let spec = rho.spec();
    let max = cfg.analysis.correlation_max_distance.unwrap_or(spec.side().saturating_sub(1));
    let pairs = chain_pairs(spec, 0, max)?;
    let fit = correlation_fit(rho, &pairs, cfg.analysis.correlation_iters, cfg.seed())?;
    Ok(LabelledFit { label: label.to_string(), fit })
}

/// Variance, effective dimension, CDFs and the surrogate report for `rho`.
fn spectral_block(
    sd: &SpectralData,
    rho: &DensityOperator,
    fit: Option<&CorrelationFit>,
    result: &mut SizeResult,
    warnings: &mut Vec<String>,
) -> Result<VarianceReport> {
    let variance = energy_variance_spectral(sd, rho)?;
    result.effective_dimension = Some(effective_dimension(sd, rho)?.0);
    match spectral_cdfs(sd, rho) {
        Ok(c) => {
            result.cdfs = Some(c);
            result.bounds.push(surrogate_pipeline(sd, rho, fit)?);
        }
        Err(qthermal_core::Error::DegenerateGaussian(v)) => warnings.push(format!("energy variance {v:.3e} too small for the spectral CDFs")),
        Err(e) => return Err(e.into()),
    }
    result.variance = Some(variance.clone());
    Ok(variance)
}

fn equilibration_reports(cfg: &ScenarioConfig, sd: &SpectralData, census: &GapCensus, rho: &DensityOperator, result: &mut SizeResult) -> Result<()> {
    let (labels, regions): (Vec<String>, Vec<Region>) = subsystems(cfg, sd.spec())?.into_iter().unzip();
    for (label, mut report) in labels.into_iter().zip(equilibration_bounds(sd, census, rho, &regions, &mc(cfg))?) {
        report.convention_notes.insert("subsystem".into(), label);
        result.bounds.push(report);
    }
    Ok(())
}

/// Thermalization split plus the exact cube-average check against the
/// same thermal state.
#[allow(clippy::too_many_arguments)]
fn thermalization_block(
    cfg: &ScenarioConfig,
    sd: &SpectralData,
    census: &GapCensus,
    rho: &DensityOperator,
    beta: f64,
    thermal_fit: &CorrelationFit,
    result: &mut SizeResult,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let l = cfg.subsystem.l;
    let alpha = cfg.analysis.alpha;
    match thermalization_bound(sd, census, rho, beta, l, alpha, &mc(cfg), Some(thermal_fit)) {
        Ok(ThermalizationOutcome { triangle, with_equilibration_bound, cubes }) => {
            let premises_held = triangle.premises.iter().all(|p| p.satisfied);
            result.bounds.push(triangle);
            result.bounds.push(with_equilibration_bound);
            result.cube_terms = cubes;
            let thermal = thermal_state(sd, beta)?;
            let dephased = dephase(sd, rho)?;
            result.bounds.push(cube_average_verify(&dephased, thermal.state(), l, alpha, premises_held)?);
        }
        Err(qthermal_core::Error::DegenerateGaussian(v)) => warnings.push(format!("thermal energy variance {v:.3e} vanishes; thermalization report skipped")),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

/// Ground state of the initial Hamiltonian evolved under the final one.
pub fn run_quench(cfg: &ScenarioConfig) -> Result<RunRecord> {
    expect(cfg, ScenarioKind::Quench)?;
    sweep(cfg, |cfg, spec, warnings| {
        let h0 = hamiltonian(cfg.hamiltonians.initial.as_ref().expect("validated"), &spec)?;
        let h = hamiltonian(cfg.hamiltonians.final_.as_ref().expect("validated"), &spec)?;
        let sd0 = diagonalize(&h0, None)?;
        let (psi, multiplicity) = ground_state(&sd0)?;
        drop(sd0);
        if multiplicity > 1 {
            warnings.push(format!("initial ground space has dimension {multiplicity}; using the lowest-index eigenvector"));
        }
        let sd = diagonalize(&h, None)?;
        let census = gap_census(&sd, None);
        let mut result = empty_result(&spec, &sd, &census);
        result.rescale_factors.insert("initial".into(), h0.rescale_factor());
        result.rescale_factors.insert("final".into(), h.rescale_factor());
        result.ground_multiplicity = Some(multiplicity);

        let initial_fit = fit(cfg, &psi, "initial_state")?;
        let variance = spectral_block(&sd, &psi, Some(&initial_fit.fit), &mut result, warnings)?;
        result.correlations.push(initial_fit);
        equilibration_reports(cfg, &sd, &census, &psi, &mut result)?;

        let matched = match_beta(&sd, variance.mean_energy)?;
        if matched.clamped {
            warnings.push(format!("energy matching clamped at beta = {}", matched.beta));
        }
        result.beta = Some(matched.beta);
        result.beta_match = Some(matched);
        let thermal = thermal_state(&sd, matched.beta)?;
        let thermal_fit = fit(cfg, thermal.state(), "thermal_state")?;
        thermalization_block(cfg, &sd, &census, &psi, matched.beta, &thermal_fit.fit, &mut result, warnings)?;
        result.correlations.push(thermal_fit);
        Ok(result)
    })
}

fn thermal_beta(cfg: &ScenarioConfig) -> f64 {
    match cfg.state {
        StateRecipe::Thermal { beta } => beta,
        _ => unreachable!("validated thermal initial state"),
    }
}

fn channel(cfg: &ScenarioConfig, spec: &LatticeSpec) -> Result<QuantumChannel> {
    let recipe = cfg.channel.as_ref().expect("validated");
    let support = Region::new(spec, recipe.sites.iter().copied())?;
    Ok(build_channel(recipe.kind, &recipe.params, spec, support)?)
}

fn is_cube(spec: &LatticeSpec, region: &Region) -> Result<bool> {
    for l in 1..=spec.side() {
        if cubic_subsystems(spec, l)?.iter().any(|c| c == region) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// A local channel applied to a thermal state, then evolved under the
/// same Hamiltonian.
pub fn run_rethermalize(cfg: &ScenarioConfig) -> Result<RunRecord> {
    expect(cfg, ScenarioKind::Rethermalize)?;
    sweep(cfg, |cfg, spec, warnings| {
        let beta = thermal_beta(cfg);
        let h = hamiltonian(cfg.hamiltonians.final_.as_ref().expect("validated"), &spec)?;
        let sd = diagonalize(&h, None)?;
        let census = gap_census(&sd, None);
        let mut result = empty_result(&spec, &sd, &census);
        result.rescale_factors.insert("final".into(), h.rescale_factor());
        result.beta = Some(beta);
        let ch = channel(cfg, &spec)?;
        if !is_cube(&spec, ch.support())? {
            warnings.push(format!("channel support {:?} is not a cube", ch.support().sites()));
        }
        let thermal = thermal_state(&sd, beta)?;
        let kicked = apply_channel(&ch, thermal.state())?;
        result.bounds.push(local_channel_bound(&sd, &h, beta, &ch)?);

        let thermal_fit = fit(cfg, thermal.state(), "thermal_state")?;
        let kicked_fit = fit(cfg, &kicked, "kicked_state")?;
        spectral_block(&sd, &kicked, Some(&kicked_fit.fit), &mut result, warnings)?;
        thermalization_block(cfg, &sd, &census, &kicked, beta, &thermal_fit.fit, &mut result, warnings)?;
        result.correlations.push(thermal_fit);
        result.correlations.push(kicked_fit);

        let mut regions: Vec<(String, Region)> = subsystems(cfg, &spec)?.into_iter().filter(|(label, _)| !label.starts_with("cube_")).collect();
        regions.push((format!("channel_support_{}", join(ch.support().sites())), ch.support().clone()));
        let dephased = dephase(&sd, &kicked)?;
        let m = mc(cfg);
        let horizon = m.horizon_for(&census);
        let (labels, regions): (Vec<String>, Vec<Region>) = regions.into_iter().unzip();
        let estimates = mc_average_distances(&sd, &kicked, thermal.state(), &regions, m.samples, horizon, m.offset)?;
        for ((label, region), est) in labels.into_iter().zip(regions).zip(estimates) {
            if label.starts_with("channel_support") {
                let eq = equilibration_bound(&sd, &census, &kicked, &region, &m)?;
                let static_part = qthermal_core::states::local_distance(&dephased, thermal.state(), &region)?;
                let mut report = BoundReport::new(
                    "channel_support_thermalization",
                    BoundKind::Proved,
                    est.estimate,
                    eq.rhs + static_part,
                    eq.tolerance,
                );
                report.extra("equilibration_rhs", eq.rhs);
                report.extra("static_part", static_part);
                report.extra("dynamic_part", eq.lhs);
                report.inputs_digest = eq.inputs_digest.clone();
                result.bounds.push(eq);
                result.bounds.push(report);
            }
            result.time_averages.push(TimeAverage { label, sites: region.sites().to_vec(), target: "thermal".into(), result: est });
        }
        Ok(result)
    })
}

/// Thermal state of the initial Hamiltonian evolved under the final one.
pub fn run_perturb(cfg: &ScenarioConfig) -> Result<RunRecord> {
    expect(cfg, ScenarioKind::Perturb)?;
    sweep(cfg, |cfg, spec, warnings| {
        let beta = thermal_beta(cfg);
        let h0 = hamiltonian(cfg.hamiltonians.initial.as_ref().expect("validated"), &spec)?;
        let h = hamiltonian(cfg.hamiltonians.final_.as_ref().expect("validated"), &spec)?;
        let sd = diagonalize(&h, None)?;
        let census = gap_census(&sd, None);
        let mut result = empty_result(&spec, &sd, &census);
        result.rescale_factors.insert("initial".into(), h0.rescale_factor());
        result.rescale_factors.insert("final".into(), h.rescale_factor());
        result.beta = Some(beta);
        result.bounds.push(perturbation_bound(&sd, &h, &h0, beta, cfg.analysis.duhamel_nodes)?);

        let rho = thermal_state(&diagonalize(&h0, None)?, beta)?.into_state();
        let thermal = thermal_state(&sd, beta)?;
        let thermal_fit = fit(cfg, thermal.state(), "thermal_state")?;
        spectral_block(&sd, &rho, None, &mut result, warnings)?;
        thermalization_block(cfg, &sd, &census, &rho, beta, &thermal_fit.fit, &mut result, warnings)?;
        result.correlations.push(thermal_fit);
        Ok(result)
    })
}

/// Spectral and dynamical diagnostics of one state under the final
/// Hamiltonian, optionally with the transport quantities.
pub fn run_diagnostics(cfg: &ScenarioConfig) -> Result<RunRecord> {
    expect(cfg, ScenarioKind::Diagnostics)?;
    sweep(cfg, |cfg, spec, warnings| {
        let h = hamiltonian(cfg.hamiltonians.final_.as_ref().expect("validated"), &spec)?;
        let sd = diagonalize(&h, None)?;
        let census = gap_census(&sd, None);
        let mut result = empty_result(&spec, &sd, &census);
        result.rescale_factors.insert("final".into(), h.rescale_factor());
        let rho = match &cfg.state {
            StateRecipe::Ground => match &cfg.hamiltonians.initial {
                Some(fc) => {
                    let h0 = hamiltonian(fc, &spec)?;
                    result.rescale_factors.insert("initial".into(), h0.rescale_factor());
                    let (psi, m) = ground_state(&diagonalize(&h0, None)?)?;
                    result.ground_multiplicity = Some(m);
                    psi
                }
                None => {
                    let (psi, m) = ground_state(&sd)?;
                    result.ground_multiplicity = Some(m);
                    psi
                }
            },
            StateRecipe::Thermal { beta } => {
                result.beta = Some(*beta);
                thermal_state(&sd, *beta)?.into_state()
            }
            StateRecipe::Product { bits } => product_state(&spec, bits)?,
            StateRecipe::Plus => DensityOperator::plus_state(&spec)?,
        };
        let state_fit = fit(cfg, &rho, "state")?;
        spectral_block(&sd, &rho, Some(&state_fit.fit), &mut result, warnings)?;
        result.correlations.push(state_fit);
        equilibration_reports(cfg, &sd, &census, &rho, &mut result)?;

        if let Some(site) = cfg.analysis.transport_site {
            let region = Region::new(&spec, [site])?;
            let number = linalg::diag(&[0.0, 1.0]);
            result.transport = Some(transport_diagnostic(&sd, &region, linalg::pauli_z().as_ref(), number.as_ref())?);
            if cfg.channel.is_some() {
                let ch = channel(cfg, &spec)?;
                if ch.support().len() == 1 {
                    let moved = (0..spec.sites())
                        .map(|s| ch.moved_to(&spec, Region::new(&spec, [s])?))
                        .collect::<qthermal_core::Result<Vec<_>>>()?;
                    result.channel_spread = Some(channel_spread(&sd, &rho, &moved, &region)?);
                } else {
                    warnings.push("channel spread needs a single-site channel".into());
                }
            }
        }
        Ok(result)
    })
}

/// Frontier of the geometry condition over the configured grid.
pub fn run_certify(cfg: &ScenarioConfig) -> Result<RunRecord> {
    expect(cfg, ScenarioKind::Certify)?;
    let grid = cfg.certify.as_ref().expect("validated");
    let mut record = new_record(cfg);
    let start = Instant::now();
    for &d in &grid.d {
        for &alpha in &grid.alpha {
            for &l in &grid.l {
                for &xi in &grid.xi {
                    for &k in &grid.k {
                        let p = CubeAverageParams { d, n_sites: 1.0, l, d_loc: grid.d_loc, alpha, xi, k };
                        if let Err(e) = p.validate() {
                            record.warnings.push(format!("skipped d={d} alpha={alpha} l={l} xi={xi} K={k}: {e}"));
                            continue;
                        }
                        for base in [LogBase::Natural, LogBase::Binary] {
                            let minimal = cube_average_frontier(&p, base, grid.max_sites)?;
                            let conclusion = match minimal {
                                Some(n) => Some(cube_average_certify(&p.with_sites(n), 0.0, base)?.extras["conclusion"]),
                                None => None,
                            };
                            record.certify.push(FrontierRow {
                                d,
                                alpha,
                                l,
                                xi,
                                k,
                                d_loc: grid.d_loc,
                                log_base: match base {
                                    LogBase::Natural => "natural".into(),
                                    LogBase::Binary => "binary".into(),
                                },
                                minimal_sites: minimal,
                                conclusion,
                                k_clamped: k < 1.0,
                            });
                        }
                    }
                }
            }
        }
    }
    record.wall_time.push((0, start.elapsed().as_secs_f64()));
    Ok(record)
}
