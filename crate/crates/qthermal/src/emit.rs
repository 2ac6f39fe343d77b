//! Writes a [`RunRecord`] to disk: `run.json`, one CSV per tabular series
//! and static SVG plots. Files other than `timing.json` depend only on the
//! record, so repeated runs produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::svg::{Plot, Scale, Series};

/// CSV table under construction.
struct Table {
    name: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Self { name, header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
        if self.rows.is_empty() {
            return Ok(());
        }
        let path = dir.join(self.name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(&path).map_err(|e| Error::format(&path, e))?;
        w.write_record(self.header).map_err(|e| Error::format(&path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::format(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_file(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Serialized `run.json` contents.
pub fn run_json(record: &RunRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("run record serializes");
    s.push('\n');
    s
}

/// Writes every artefact for `record` into `out_dir` (created if needed)
/// and returns the written paths.
pub fn emit_reports(record: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    write_file(out_dir.join("run.json"), run_json(record).as_bytes(), &mut written)?;
    let timing: BTreeMap<String, f64> = record.wall_time.iter().map(|(n, t)| (format!("N={n}"), *t)).collect();
    let mut timing_json = serde_json::to_string_pretty(&timing).expect("timing serializes");
    timing_json.push('\n');
    write_file(out_dir.join("timing.json"), timing_json.as_bytes(), &mut written)?;

    let mut spectrum = Table::new("spectrum.csv", &["n_sites", "level", "energy", "rank"]);
    let mut correlations = Table::new("correlations.csv", &["n_sites", "state", "distance", "lower", "upper"]);
    let mut traces = Table::new("mc_traces.csv", &["n_sites", "subsystem", "target", "t", "distance"]);
    let mut bounds = Table::new(
        "bounds.csv",
        &["n_sites", "name", "kind", "subsystem", "lhs", "rhs", "tolerance", "holds", "vacuous", "premises_satisfied"],
    );
    let mut cubes = Table::new(
        "cube_terms.csv",
        &["n_sites", "sites", "to_thermal", "to_thermal_stderr", "to_dephased", "to_dephased_stderr", "dephased_to_thermal", "equilibration_rhs"],
    );
    let mut sweep = Table::new(
        "size_sweep.csv",
        &[
            "n_sites",
            "hilbert_dim",
            "level_count",
            "gap_degeneracy",
            "effective_dimension",
            "sigma_sq",
            "s",
            "delta",
            "beta",
            "transport",
            "channel_spread",
        ],
    );
    let mut frontier = Table::new(
        "certify_frontier.csv",
        &["d", "alpha", "l", "xi", "k", "d_loc", "log_base", "minimal_sites", "conclusion", "k_clamped"],
    );

    for r in &record.results {
        let n = r.n_sites.to_string();
        for (i, level) in r.levels.iter().enumerate() {
            spectrum.push(vec![n.clone(), i.to_string(), num(level.energy), level.rank.to_string()]);
        }
        for f in &r.correlations {
            for s in &f.fit.samples {
                correlations.push(vec![n.clone(), f.label.clone(), s.distance.to_string(), num(s.lower), num(s.upper)]);
            }
        }
        for ta in &r.time_averages {
            for &(t, d) in &ta.result.trace {
                traces.push(vec![n.clone(), ta.label.clone(), ta.target.clone(), num(t), num(d)]);
            }
        }
        for b in &r.bounds {
            bounds.push(vec![
                n.clone(),
                b.name.clone(),
                format!("{:?}", b.kind),
                b.convention_notes.get("subsystem").cloned().unwrap_or_default(),
                num(b.lhs),
                num(b.rhs),
                num(b.tolerance),
                b.holds.to_string(),
                b.vacuous.to_string(),
                b.premises.iter().all(|p| p.satisfied).to_string(),
            ]);
        }
        for c in &r.cube_terms {
            let sites = c.sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
            cubes.push(vec![
                n.clone(),
                sites,
                num(c.to_thermal),
                num(c.to_thermal_stderr),
                num(c.to_dephased),
                num(c.to_dephased_stderr),
                num(c.dephased_to_thermal),
                num(c.equilibration_rhs),
            ]);
        }
        sweep.push(vec![
            n.clone(),
            r.hilbert_dim.to_string(),
            r.gap_census.level_count.to_string(),
            r.gap_census.most_degenerate_multiplicity.to_string(),
            opt(r.effective_dimension),
            opt(r.variance.as_ref().map(|v| v.sigma_sq)),
            opt(r.variance.as_ref().map(|v| v.s)),
            opt(r.cdfs.as_ref().map(|c| c.delta)),
            opt(r.beta),
            opt(r.transport),
            opt(r.channel_spread),
        ]);
    }
    for row in &record.certify {
        frontier.push(vec![
            row.d.to_string(),
            num(row.alpha),
            row.l.to_string(),
            num(row.xi),
            num(row.k),
            row.d_loc.to_string(),
            row.log_base.clone(),
            opt(row.minimal_sites),
            opt(row.conclusion),
            row.k_clamped.to_string(),
        ]);
    }
    for t in [&spectrum, &correlations, &traces, &bounds, &cubes, &sweep, &frontier] {
        t.write(out_dir, &mut written)?;
    }

    if let Some(svg) = cdf_overlay(record) {
        write_file(out_dir.join("cdf_overlay.svg"), svg.as_bytes(), &mut written)?;
    }
    if let Some(svg) = correlation_plot(record) {
        write_file(out_dir.join("correlation_decay.svg"), svg.as_bytes(), &mut written)?;
    }
    if let Some(svg) = bounds_plot(record) {
        write_file(out_dir.join("bounds_vs_n.svg"), svg.as_bytes(), &mut written)?;
    }
    Ok(written)
}

/// Step CDF of the largest size with CDFs against its Gaussian.
pub fn cdf_overlay(record: &RunRecord) -> Option<String> {
    let (n, c) = record.results.iter().rev().find_map(|r| r.cdfs.as_ref().map(|c| (r.n_sites, c)))?;
    let lo = c.jump_points.first().copied()?.min(c.gauss_mean - 4.0 * c.gauss_sigma);
    let hi = c.jump_points.last().copied()?.max(c.gauss_mean + 4.0 * c.gauss_sigma);
    let mut step = vec![(lo, 0.0)];
    step.extend(c.jump_points.iter().copied().zip(c.f_values.iter().copied()));
    step.push((hi, 1.0));
    let smooth: Vec<(f64, f64)> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).map(|x| (x, c.gaussian_cdf(x))).collect();
    let mut plot = Plot::new(&format!("energy distribution, N = {n}, sup gap {:.4}", c.delta), "energy", "cumulative probability");
    plot.series.push(Series { steps: true, ..Series::line("state", "step", step) });
    plot.series.push(Series::line("matched Gaussian", "smooth", smooth));
    Some(plot.render())
}

/// Lower correlation brackets against distance, log scale.
pub fn correlation_plot(record: &RunRecord) -> Option<String> {
    let mut plot = Plot::new("connected correlations (lower bracket)", "distance", "correlation");
    plot.y_scale = Scale::Log;
    for r in &record.results {
        for f in &r.correlations {
            let pts: Vec<(f64, f64)> = f.fit.samples.iter().map(|s| (s.distance as f64, s.lower)).collect();
            if !pts.is_empty() {
                plot.series.push(Series { markers: true, ..Series::line(format!("N = {}, {}", r.n_sites, f.label), "correlation", pts) });
            }
        }
    }
    (!plot.series.is_empty()).then(|| plot.render())
}

/// Mean lhs and rhs of each named bound across sizes.
pub fn bounds_plot(record: &RunRecord) -> Option<String> {
    let mut by_name: BTreeMap<&str, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
    for (r, b) in record.bounds() {
        let e = by_name.entry(b.name.as_str()).or_default().entry(r.n_sites).or_insert((0.0, 0.0, 0));
        e.0 += b.lhs;
        e.1 += b.rhs;
        e.2 += 1;
    }
    if by_name.is_empty() {
        return None;
    }
    let mut plot = Plot::new("bound sides against lattice size (mean over subsystems)", "N", "value");
    plot.y_scale = Scale::Log;
    for (name, points) in by_name {
        let lhs = points.iter().map(|(&n, &(l, _, c))| (n as f64, l / c as f64)).collect();
        let rhs = points.iter().map(|(&n, &(_, r, c))| (n as f64, r / c as f64)).collect();
        plot.series.push(Series { markers: true, ..Series::line(format!("{name} lhs"), "lhs", lhs) });
        plot.series.push(Series { markers: true, ..Series::line(format!("{name} rhs"), "rhs", rhs) });
    }
    Some(plot.render())
}
