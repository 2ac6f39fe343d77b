//! The machine-readable result of one scenario run.

use std::collections::BTreeMap;

use qthermal_core::bounds::{BetaMatch, BoundReport, CubeTerms};
use qthermal_core::diagnostics::{CorrelationFit, McEstimate, SpectralCDFs, VarianceReport};
use qthermal_core::GapCensus;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub scenario: String,
    pub config_digest: String,
    pub config: Option<ScenarioConfig>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub results: Vec<SizeResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certify: Vec<FrontierRow>,
    pub warnings: Vec<String>,
    /// Wall time per size in seconds; written to `timing.json`, never to
    /// `run.json`.
    #[serde(skip)]
    pub wall_time: Vec<(usize, f64)>,
}

impl RunRecord {
    pub fn empty(scenario: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_string(),
            config_digest: String::new(),
            config: None,
            seed: 0,
            versions: versions(),
            results: Vec::new(),
            certify: Vec::new(),
            warnings: Vec::new(),
            wall_time: Vec::new(),
        }
    }

    pub fn bounds(&self) -> impl Iterator<Item = (&SizeResult, &BoundReport)> {
        self.results.iter().flat_map(|r| r.bounds.iter().map(move |b| (r, b)))
    }

    pub fn status(&self) -> RunStatus {
        if self.bounds().any(|(_, b)| b.proved_bound_failed()) {
            RunStatus::ProvedBoundFailed
        } else if self.bounds().any(|(_, b)| b.premise_failed()) {
            RunStatus::PremiseFailed
        } else {
            RunStatus::AllHeld
        }
    }
}

/// Overall verdict of a run, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    AllHeld,
    ProvedBoundFailed,
    PremiseFailed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::AllHeld => 0,
            RunStatus::ProvedBoundFailed => 2,
            RunStatus::PremiseFailed => 3,
        }
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("qthermal".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("qthermal-core".to_string(), qthermal_core::VERSION.to_string()),
        ("schema".to_string(), SCHEMA_VERSION.to_string()),
    ])
}

/// Gap statistics without the histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusSummary {
    pub most_degenerate_multiplicity: usize,
    pub rank_weighted_multiplicity: f64,
    pub repeated_gaps: usize,
    pub singleton_count: usize,
    pub pair_count: usize,
    pub level_count: usize,
    pub smallest_gap: Option<f64>,
    pub tol_gap: f64,
    pub vacuous: bool,
}

impl From<&GapCensus> for CensusSummary {
    fn from(c: &GapCensus) -> Self {
        Self {
            most_degenerate_multiplicity: c.most_degenerate_multiplicity,
            rank_weighted_multiplicity: c.rank_weighted_multiplicity,
            repeated_gaps: c.gap_histogram.len(),
            singleton_count: c.singleton_count,
            pair_count: c.pair_count(),
            level_count: c.level_count,
            smallest_gap: c.smallest_gap,
            tol_gap: c.tol_gap,
            vacuous: c.vacuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledFit {
    pub label: String,
    pub fit: CorrelationFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub label: String,
    pub sites: Vec<usize>,
    pub target: String,
    pub result: McEstimate,
}

/// Everything computed at one lattice size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub side: usize,
    pub n_sites: usize,
    pub hilbert_dim: usize,
    /// Factor each Hamiltonian's terms were divided by.
    pub rescale_factors: BTreeMap<String, f64>,
    pub beta: Option<f64>,
    pub beta_match: Option<BetaMatch>,
    /// Size of the initial Hamiltonian's lowest level when the initial state
    /// is a ground state; above one the lowest-index eigenvector was used.
    pub ground_multiplicity: Option<usize>,
    pub levels: Vec<Level>,
    pub gap_census: CensusSummary,
    pub effective_dimension: Option<f64>,
    pub variance: Option<VarianceReport>,
    pub cdfs: Option<SpectralCDFs>,
    pub correlations: Vec<LabelledFit>,
    pub time_averages: Vec<TimeAverage>,
    pub cube_terms: Vec<CubeTerms>,
    pub transport: Option<f64>,
    pub channel_spread: Option<f64>,
    pub bounds: Vec<BoundReport>,
}

impl SizeResult {
    pub fn bound(&self, name: &str) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

/// Smallest lattice meeting the geometry condition for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub d: u32,
    pub alpha: f64,
    pub l: u32,
    pub xi: f64,
    pub k: f64,
    pub d_loc: u32,
    pub log_base: String,
    /// `None` when the condition is not met below the search cap.
    pub minimal_sites: Option<f64>,
    /// `7 / N^{alpha/2}` at the frontier.
    pub conclusion: Option<f64>,
    pub k_clamped: bool,
}
