//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qthermal::config::ScenarioConfig;
use qthermal::scenarios;
use qthermal_core::bounds::{
    cube_average_frontier, equilibration_bounds, local_channel_bound, perturbation_bound, surrogate_pipeline, BoundReport,
    CubeAverageParams, LogBase,
};
use qthermal_core::diagnostics::{transport_diagnostic, McConfig};
use qthermal_core::lattice::cubic_subsystems;
use qthermal_core::linalg;
use qthermal_core::operators::{build_channel, build_family, coarse_expectation_gap, ChannelKind, CoarseObservable, Family, LocalTerm, Params};
use qthermal_core::random;
use qthermal_core::spectral::{dephase, diagonalize, effective_dimension, evolve, gap_census};
use qthermal_core::states::thermal_state;
use qthermal_core::{c64, CMat, DensityOperator, LatticeSpec, LocalHamiltonian, Region, SpectralData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

const SURROGATE_TOL: f64 = 1e-9;
const SURROGATE_BUDGET: Duration = Duration::from_secs(600);
const EQUILIBRATION_SAMPLES: usize = 2000;
const EQUILIBRATION_STDERRS: f64 = 3.0;
const EQUILIBRATION_BUDGET: Duration = Duration::from_secs(1200);
const CHANNEL_TOL: f64 = 1e-8;
const PERTURBATION_TOL: f64 = 1e-8;
const DUHAMEL_TOL: f64 = 1e-6;
const DUHAMEL_NODES: usize = 12;
const LEVEL_FIT_R2: f64 = 0.99;
const TRANSPORT_SLOPE: (f64, f64) = (-1.3, -0.7);
const DEPHASE_SAMPLES: usize = 10_000;
const DEPHASE_STDERRS: f64 = 5.0;
const PARTIAL_TRACE_TOL: f64 = 1e-12;
const COARSE_TOL: f64 = 1e-9;
const FRONTIER_BRACKET: (f64, f64) = (1e6, 1e7);

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn chain(n: usize) -> LatticeSpec {
    LatticeSpec::chain(n).expect("chain")
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn tfim(spec: &LatticeSpec, g: f64, hz: f64) -> Result<LocalHamiltonian, String> {
    build_family(Family::Tfim, &params(&[("J", 1.0), ("g", g), ("hz", hz)]), spec).map_err(err)
}

fn ground(sd: &SpectralData) -> Result<DensityOperator, String> {
    let v = sd.vectors();
    let psi: Vec<c64> = (0..sd.dim()).map(|i| v[(i, 0)]).collect();
    DensityOperator::pure(*sd.spec(), &psi).map_err(err)
}

/// Alternating `0101...` computational basis state.
fn neel(spec: &LatticeSpec) -> Result<DensityOperator, String> {
    let n = spec.sites();
    let index = (0..n).filter(|i| i % 2 == 1).map(|i| 1usize << (n - 1 - i)).sum();
    DensityOperator::basis_state(spec, index).map_err(err)
}

fn holds_within(r: &BoundReport, tol: f64) -> bool {
    r.lhs <= r.rhs + tol
}

fn surrogate() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut products, mut thermals, mut violations) = (0usize, 0usize, 0usize);
    let mut min_slack = f64::INFINITY;
    for family in ["tfim", "xx"] {
        for n in [6, 8, 10, 12] {
            let spec = chain(n);
            let h = match family {
                "tfim" => tfim(&spec, 1.05, 0.15)?,
                _ => build_family(Family::XxChain, &params(&[("J", 1.0), ("mu", 0.3)]), &spec).map_err(err)?,
            };
            let sd = diagonalize(&h, None).map_err(err)?;
            let mut tally = |rho: &DensityOperator| -> Result<(), String> {
                let r = surrogate_pipeline(&sd, rho, None).map_err(err)?;
                min_slack = min_slack.min(r.rhs - r.lhs);
                if !holds_within(&r, SURROGATE_TOL) {
                    violations += 1;
                }
                Ok(())
            };
            for _ in 0..25 {
                tally(&random::product_state(&spec, &mut rng))?;
                products += 1;
            }
            for beta in [0.1, 0.5, 1.5] {
                tally(thermal_state(&sd, beta).map_err(err)?.state())?;
                thermals += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = products >= 200 && thermals >= 20 && violations == 0 && elapsed <= SURROGATE_BUDGET;
    Ok((
        pass,
        format!("{products} product + {thermals} thermal states, {violations} violations, min slack {min_slack:.3e}, {:.1}s", elapsed.as_secs_f64()),
    ))
}

fn equilibration() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut scenarios = Vec::<(String, SpectralData, DensityOperator)>::new();
    for n in [6, 8, 10] {
        let spec = chain(n);
        let sd = diagonalize(&tfim(&spec, 1.0, 0.0)?, None).map_err(err)?;
        for g0 in [2.0, 0.5] {
            let psi = ground(&diagonalize(&tfim(&spec, g0, 0.0)?, None).map_err(err)?)?;
            scenarios.push((format!("tfim g {g0} -> 1, N={n}"), sd.clone(), psi));
        }
        let sd = diagonalize(&tfim(&spec, 0.8, 0.0)?, None).map_err(err)?;
        let psi = ground(&diagonalize(&tfim(&spec, 3.0, 0.0)?, None).map_err(err)?)?;
        scenarios.push((format!("tfim g 3 -> 0.8, N={n}"), sd, psi));
        let heis = build_family(Family::Heisenberg, &params(&[("J", 1.0), ("delta", 0.5)]), &spec).map_err(err)?;
        scenarios.push((format!("heisenberg from Neel, N={n}"), diagonalize(&heis, None).map_err(err)?, neel(&spec)?));
        let sd = diagonalize(&tfim(&spec, 1.05, 0.2)?, None).map_err(err)?;
        scenarios.push((format!("tfim+hz from random product, N={n}"), sd, random::product_state(&spec, &mut rng)));
    }
    for n in [6, 8, 10, 12] {
        let spec = chain(n);
        let xx = build_family(Family::XxChain, &params(&[("J", 1.0)]), &spec).map_err(err)?;
        scenarios.push((format!("xx from Neel, N={n}"), diagonalize(&xx, None).map_err(err)?, neel(&spec)?));
    }
    {
        let spec = chain(8);
        let h = build_family(Family::ClassicalIsingField, &params(&[("J", 1.0), ("h", 0.7)]), &spec).map_err(err)?;
        scenarios.push(("transverse field ground state -> ising, N=8".into(), diagonalize(&h, None).map_err(err)?, DensityOperator::plus_state(&spec).map_err(err)?));
    }

    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut count = 0usize;
    let mut consume = |label: String, sd: &SpectralData, rho: &DensityOperator, seed: u64| -> Result<(), String> {
        let spec = sd.spec();
        let mut regions = cubic_subsystems(spec, 1).map_err(err)?;
        regions.extend(cubic_subsystems(spec, 2).map_err(err)?);
        let census = gap_census(sd, None);
        let reports = equilibration_bounds(sd, &census, rho, &regions, &McConfig::seeded(EQUILIBRATION_SAMPLES, seed)).map_err(err)?;
        for (region, r) in regions.iter().zip(&reports) {
            checked += 1;
            let stderr = r.extras.get("stderr").copied().unwrap_or(f64::NAN);
            if !(r.lhs <= r.rhs + EQUILIBRATION_STDERRS * stderr) {
                failures.push(format!("{label} S={:?}: {:.4e} > {:.4e}", region.sites(), r.lhs, r.rhs));
            }
        }
        count += 1;
        Ok(())
    };
    for (i, (label, sd, rho)) in scenarios.iter().enumerate() {
        consume(label.clone(), sd, rho, i as u64)?;
    }
    drop(scenarios);
    {
        let spec = chain(12);
        let sd = diagonalize(&tfim(&spec, 1.05, 0.2)?, None).map_err(err)?;
        consume("tfim+hz from plus state, N=12".into(), &sd, &DensityOperator::plus_state(&spec).map_err(err)?, 90)?;
        consume("tfim+hz from random product, N=12".into(), &sd, &random::product_state(&spec, &mut rng), 91)?;
    }
    let elapsed = start.elapsed();
    let pass = count >= 20 && failures.is_empty() && elapsed <= EQUILIBRATION_BUDGET;
    let mut detail = format!("{count} quenches, {checked} subsystems, {} violations, {:.1}s", failures.len(), elapsed.as_secs_f64());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    Ok((pass, detail))
}

fn local_channels() -> Outcome {
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    for n in [6, 8, 10] {
        let spec = chain(n);
        let h = tfim(&spec, 1.05, 0.2)?;
        let sd = diagonalize(&h, None).map_err(err)?;
        let site = |i: usize| Region::new(&spec, [i]).map_err(err);
        let channels = [
            build_channel(ChannelKind::Depolarizing, &params(&[("p", 0.75)]), &spec, site(0)?),
            build_channel(ChannelKind::AmplitudeDamping, &params(&[("gamma", 0.6)]), &spec, site(n / 2)?),
            build_channel(ChannelKind::UnitaryKick, &params(&[("axis", 0.0)]), &spec, site(1)?),
            build_channel(ChannelKind::MeasureForget, &Params::new(), &spec, site(n - 1)?),
            build_channel(ChannelKind::UnitaryKick, &params(&[("axis", 1.0), ("theta", 0.7)]), &spec, Region::new(&spec, [2, 3]).map_err(err)?),
        ];
        for ch in channels {
            let ch = ch.map_err(err)?;
            for beta in [0.25, 1.0, 2.5] {
                let r = local_channel_bound(&sd, &h, beta, &ch).map_err(err)?;
                checked += 1;
                min_slack = min_slack.min(r.rhs - r.lhs);
                if !holds_within(&r, CHANNEL_TOL) {
                    violations += 1;
                }
            }
        }
    }
    Ok((checked == 45 && violations == 0, format!("{checked} cases, {violations} violations, min slack {min_slack:.3e}")))
}

/// `h` plus one extra local term.
fn with_term(h: &LocalHamiltonian, sites: &[usize], m: CMat, label: &str) -> Result<LocalHamiltonian, String> {
    let spec = *h.spec();
    let mut terms = h.terms().to_vec();
    terms.push(LocalTerm::new(&spec, Region::new(&spec, sites.iter().copied()).map_err(err)?, m, label).map_err(err)?);
    LocalHamiltonian::new(spec, terms, h.k()).map_err(err)
}

fn scaled(m: CMat, f: f64) -> CMat {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * f)
}

fn perturbations() -> Outcome {
    let (x, y, z) = (linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z());
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst_duhamel = 0.0f64;
    for n in [6, 8, 10] {
        let spec = chain(n);
        let h = tfim(&spec, 1.05, 0.2)?;
        let sd = diagonalize(&h, None).map_err(err)?;
        let mid = n / 2;
        let h0s = [
            tfim(&spec, 1.3, 0.2)?,
            tfim(&spec, 0.9, 0.2)?,
            tfim(&spec, 1.05, 0.0)?,
            tfim(&spec, 1.05, 0.5)?,
            build_family(Family::Tfim, &params(&[("J", 1.2), ("g", 1.05), ("hz", 0.2)]), &spec).map_err(err)?,
            with_term(&h, &[0], scaled(z.clone(), 0.8), "edge_z")?,
            with_term(&h, &[mid], scaled(x.clone(), -0.5), "bulk_x")?,
            with_term(&h, &[mid], scaled(y.clone(), 0.3), "bulk_y")?,
            with_term(&h, &[mid - 1, mid], scaled(linalg::kron(z.as_ref(), z.as_ref()), 0.6), "bond_zz")?,
            with_term(&h, &[0, 1], scaled(linalg::kron(x.as_ref(), x.as_ref()), -0.4), "bond_xx")?,
        ];
        for (i, h0) in h0s.iter().enumerate() {
            let beta = [0.5, 1.0, 2.0][i % 3];
            let r = perturbation_bound(&sd, &h, h0, beta, DUHAMEL_NODES).map_err(err)?;
            checked += 1;
            let duhamel = r.premises.iter().find(|p| p.name == "duhamel_log_partition_identity").map_or(f64::INFINITY, |p| p.value);
            worst_duhamel = worst_duhamel.max(duhamel);
            if !holds_within(&r, PERTURBATION_TOL) || !(duhamel <= DUHAMEL_TOL) {
                violations += 1;
            }
        }
    }
    Ok((checked == 30 && violations == 0, format!("{checked} cases, {violations} violations, worst quadrature gap {worst_duhamel:.2e}")))
}

fn footnote_quench() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for n in [6usize, 8, 10, 12] {
        let spec = chain(n);
        let h0 = build_family(Family::TransverseField, &params(&[("b", 1.0)]), &spec).map_err(err)?;
        let plus = DensityOperator::plus_state(&spec).map_err(err)?;
        // <H0> = -N b equals the triangle-inequality floor, so |+...+> is a ground state
        let e0 = plus.expectation(h0.dense()).map_err(err)?.re;
        ok &= (e0 + n as f64).abs() < 1e-9;
        let h = build_family(Family::ClassicalIsingField, &params(&[("J", 1.0), ("h", 0.7)]), &spec).map_err(err)?;
        let sd = diagonalize(&h, None).map_err(err)?;
        let (d_eff, _) = effective_dimension(&sd, &plus).map_err(err)?;
        ok &= d_eff <= sd.level_count() as f64;
        rows.push((n as f64, sd.level_count() as f64, d_eff));
    }
    let c = rows.iter().map(|r| r.1 * r.0 * r.0).sum::<f64>() / rows.iter().map(|r| r.0.powi(4)).sum::<f64>();
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let ss_res: f64 = rows.iter().map(|r| (r.1 - c * r.0 * r.0).powi(2)).sum();
    let ss_tot: f64 = rows.iter().map(|r| (r.1 - mean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let table: Vec<String> = rows.iter().map(|r| format!("N={} L={} d_eff={:.2}", r.0, r.1, r.2)).collect();
    Ok((ok && r2 >= LEVEL_FIT_R2, format!("{}; c={c:.4}, R^2={r2:.5}", table.join(", "))))
}

fn transport() -> Outcome {
    let number = linalg::diag(&[0.0, 1.0]);
    let z = linalg::pauli_z();
    let mut pts = Vec::new();
    for n in [6usize, 8, 10, 12] {
        let spec = chain(n);
        let h = build_family(Family::XxChain, &params(&[("J", 1.0)]), &spec).map_err(err)?;
        let sd = diagonalize(&h, None).map_err(err)?;
        let site = Region::new(&spec, [n / 2]).map_err(err)?;
        let eps = transport_diagnostic(&sd, &site, z.as_ref(), number.as_ref()).map_err(err)?;
        pts.push(((n as f64).ln(), eps.ln(), eps));
    }
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let values: Vec<String> = pts.iter().map(|p| format!("{:.4}", p.2)).collect();
    let pass = (TRANSPORT_SLOPE.0..=TRANSPORT_SLOPE.1).contains(&slope);
    Ok((pass, format!("values [{}], slope {slope:.3}", values.join(", "))))
}

/// Kept-subsystem density matrix by explicit index contraction; site 0 is
/// the most significant bit.
fn naive_partial_trace(m: &CMat, n: usize, keep: &[usize]) -> CMat {
    let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let compose = |kept: usize, rest: usize| {
        let mut full = 0usize;
        for (pos, &s) in keep.iter().enumerate() {
            full |= ((kept >> (keep.len() - 1 - pos)) & 1) << (n - 1 - s);
        }
        for (pos, &s) in traced.iter().enumerate() {
            full |= ((rest >> (traced.len() - 1 - pos)) & 1) << (n - 1 - s);
        }
        full
    };
    let dk = 1 << keep.len();
    faer::Mat::from_fn(dk, dk, |a, b| {
        (0..1usize << traced.len()).fold(c64::new(0.0, 0.0), |acc, r| acc + m[(compose(a, r), compose(b, r))])
    })
}

fn oracles() -> Outcome {
    let spec = chain(4);
    let h = tfim(&spec, 1.05, 0.2)?;
    let sd = diagonalize(&h, None).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let psi = random::pure_state(&spec, &mut rng);
    let levels = sd.level_energies();
    let min_spacing = levels.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let horizon = 1e4 / min_spacing;
    let dim = sd.dim();
    let mut sum = vec![c64::new(0.0, 0.0); dim * dim];
    let mut sum_sq = vec![(0.0f64, 0.0f64); dim * dim];
    for _ in 0..DEPHASE_SAMPLES {
        let t = rng.random::<f64>() * horizon;
        let m = evolve(&sd, &psi, t).map_err(err)?.to_matrix();
        for j in 0..dim {
            for i in 0..dim {
                let v = m[(i, j)];
                sum[i + j * dim] += v;
                sum_sq[i + j * dim].0 += v.re * v.re;
                sum_sq[i + j * dim].1 += v.im * v.im;
            }
        }
    }
    let exact = dephase(&sd, &psi).map_err(err)?.to_matrix();
    let k = DEPHASE_SAMPLES as f64;
    let mut worst_ratio = 0.0f64;
    let mut dephase_ok = true;
    for j in 0..dim {
        for i in 0..dim {
            let mean = sum[i + j * dim] / k;
            let var_re = (sum_sq[i + j * dim].0 / k - mean.re * mean.re).max(0.0) * k / (k - 1.0);
            let var_im = (sum_sq[i + j * dim].1 / k - mean.im * mean.im).max(0.0) * k / (k - 1.0);
            let stderr = ((var_re + var_im) / k).sqrt();
            let diff = linalg::cabs(mean - exact[(i, j)]);
            dephase_ok &= diff <= DEPHASE_STDERRS * stderr + 1e-12;
            if stderr > 0.0 {
                worst_ratio = worst_ratio.max(diff / stderr);
            }
        }
    }

    let spec3 = chain(3);
    let subsets: Vec<Vec<usize>> = (1usize..8).map(|mask| (0..3).filter(|s| mask >> (2 - s) & 1 == 1).collect()).collect();
    let mut worst_pt = 0.0f64;
    for i in 0..50 {
        let rho = if i % 2 == 0 { random::mixed_state(&spec3, &mut rng) } else { random::pure_state(&spec3, &mut rng) };
        let dense = rho.to_matrix();
        for keep in &subsets {
            let fast = rho.partial_trace(&Region::new(&spec3, keep.iter().copied()).map_err(err)?).map_err(err)?;
            let slow = naive_partial_trace(&dense, 3, keep);
            for b in 0..slow.ncols() {
                for a in 0..slow.nrows() {
                    worst_pt = worst_pt.max(linalg::cabs(fast[(a, b)] - slow[(a, b)]));
                }
            }
        }
    }
    let pass = dephase_ok && worst_pt <= PARTIAL_TRACE_TOL;
    Ok((pass, format!("dephase worst |diff|/stderr {worst_ratio:.2}; partial trace worst deviation {worst_pt:.2e} over 50 states x 7 subsets")))
}

fn coarse_graining() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    for i in 0..100 {
        let spec = chain(3 + i % 4);
        let m = CoarseObservable::magnetization(&spec).map_err(err)?;
        let draw = |rng: &mut ChaCha8Rng, k: usize| match k % 3 {
            0 => random::mixed_state(&spec, rng),
            1 => random::pure_state(&spec, rng),
            _ => random::product_state(&spec, rng),
        };
        let rho = draw(&mut rng, i);
        let tau = draw(&mut rng, i / 3);
        let (gap, bound) = coarse_expectation_gap(&m, &rho, &tau).map_err(err)?;
        min_slack = min_slack.min(bound - gap);
        if gap > bound + COARSE_TOL {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("100 pairs, {violations} violations, min slack {min_slack:.3e}")))
}

fn rethermalize_config(channel: &str, sizes: &[usize], seed: u64) -> String {
    format!(
        r#"{{
  "scenario": "rethermalize",
  "lattice": {{"dim": 1, "side": 6}},
  "hamiltonians": {{"final": {{"family": "tfim", "params": {{"J": 1.0, "g": 1.05, "hz": 0.2}}}}}},
  "state": {{"kind": "thermal", "beta": 0.7}},
  "channel": {channel},
  "subsystem": {{"l": 1}},
  "analysis": {{"samples": 400, "seed": {seed}, "size_sweep": {sizes:?}}}
}}"#
    )
}

fn certifier(bin: &Path, scratch: &Path) -> Outcome {
    let p = CubeAverageParams { d: 1, n_sites: 1.0, l: 1, d_loc: 2, alpha: 0.2, xi: 1.0, k: 1.0 };
    let frontier = cube_average_frontier(&p, LogBase::Natural, 1e300).map_err(err)?;
    let bracket_ok = frontier.is_some_and(|n| n > FRONTIER_BRACKET.0 && n < FRONTIER_BRACKET.1);

    let channels = [
        r#"{"kind": "depolarizing", "params": {"p": 0.8}, "sites": [0]}"#,
        r#"{"kind": "unitary_kick", "params": {"axis": 0}, "sites": [2]}"#,
        r#"{"kind": "measure_forget", "sites": [1, 2]}"#,
    ];
    let mut runs = 0usize;
    let mut missing = Vec::new();
    for (i, ch) in channels.iter().enumerate() {
        let cfg = ScenarioConfig::from_json(&rethermalize_config(ch, &[4, 6], i as u64)).map_err(err)?;
        let record = scenarios::run(&cfg).map_err(err)?;
        runs += 1;
        for r in &record.results {
            if r.bound("cube_average_distance").is_none() {
                missing.push(format!("library run {i}, N={}", r.n_sites));
            }
        }
    }
    let path = scratch.join("rethermalize.json");
    fs::write(&path, rethermalize_config(channels[0], &[4, 6], 9)).map_err(err)?;
    let out = scratch.join("rethermalize_out");
    let status = Command::new(bin).args(["rethermalize", "--config"]).arg(&path).arg("--out").arg(&out).output().map_err(err)?;
    runs += 1;
    let csv = fs::read_to_string(out.join("bounds.csv")).map_err(err)?;
    for n in [4, 6] {
        if !csv.lines().any(|l| l.starts_with(&format!("{n},cube_average_distance,"))) {
            missing.push(format!("CLI run, N={n}"));
        }
    }
    let cli_ok = matches!(status.status.code(), Some(0 | 2 | 3));
    let pass = bracket_ok && missing.is_empty() && cli_ok;
    Ok((
        pass,
        format!(
            "minimal N {}; exact cube average emitted in {runs} rethermalize runs, missing {:?}",
            frontier.map_or("none".into(), |n| format!("{n:.0}")),
            missing
        ),
    ))
}

fn determinism(bin: &Path, scratch: &Path) -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden_quench_n8.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = scratch.join(format!("golden_{k}"));
        let status = Command::new(bin).args(["quench", "--config"]).arg(&config).arg("--out").arg(&out).output().map_err(err)?;
        if !matches!(status.status.code(), Some(0 | 2 | 3)) {
            return Ok((false, format!("golden run exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr))));
        }
        outputs.push(fs::read(out.join("run.json")).map_err(err)?);
    }
    let identical = outputs[0] == outputs[1];
    Ok((identical && !outputs[0].is_empty(), format!("run.json {} bytes, identical: {identical}", outputs[0].len())))
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_qthermal"));
    let scratch = tempfile::tempdir().expect("scratch directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("effective dimension vs Berry-Esseen distance", Box::new(surrogate)),
        ("equilibration bound on quenches", Box::new(equilibration)),
        ("local channel relative entropy bound", Box::new(local_channels)),
        ("perturbation relative entropy bound and log-partition quadrature", Box::new(perturbations)),
        ("transverse-field to Ising quench level count", Box::new(footnote_quench)),
        ("transport diagnostic scaling on the XX chain", Box::new(transport)),
        ("dephasing and partial trace oracles", Box::new(oracles)),
        ("coarse-grained observable inequality", Box::new(coarse_graining)),
        ("cube-average certifier frontier and exact average", Box::new(|| certifier(bin, scratch.path()))),
        ("golden run determinism", Box::new(|| determinism(bin, scratch.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
