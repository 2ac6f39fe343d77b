//! JSON scenario configuration and its validating loader.

use std::collections::BTreeMap;
use std::path::Path;

use qthermal_core::bounds::LogBase;
use qthermal_core::operators::{ChannelKind, Family};
use qthermal_core::{Boundary, LatticeSpec, Metric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Quench,
    Rethermalize,
    Perturb,
    Diagnostics,
    Certify,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Quench => "quench",
            ScenarioKind::Rethermalize => "rethermalize",
            ScenarioKind::Perturb => "perturb",
            ScenarioKind::Diagnostics => "diagnostics",
            ScenarioKind::Certify => "certify",
        }
    }
}

/// Lattice shape; the side is replaced by each entry of the size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub dim: usize,
    pub side: usize,
    pub local_dim: usize,
    pub metric: Metric,
    pub boundary: Boundary,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { dim: 1, side: 8, local_dim: 2, metric: Metric::Manhattan, boundary: Boundary::Open }
    }
}

impl LatticeConfig {
    pub fn spec(&self, side: usize) -> Result<LatticeSpec> {
        Ok(LatticeSpec::new(self.dim, side, self.local_dim, self.metric, self.boundary)?)
    }
}

/// A named Hamiltonian family with its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Constant added to the Hamiltonian.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FamilyConfig>,
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    pub final_: Option<FamilyConfig>,
}

/// Initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateRecipe {
    /// Lowest eigenvector of the initial Hamiltonian (or of the final one
    /// when there is no initial Hamiltonian).
    Ground,
    Thermal { beta: f64 },
    /// Computational basis state; the bit pattern is tiled over the sites.
    Product { bits: String },
    /// `|+>` on every site.
    Plus,
}

impl Default for StateRecipe {
    fn default() -> Self {
        StateRecipe::Ground
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecipe {
    pub kind: ChannelKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "default_sites")]
    pub sites: Vec<usize>,
}

fn default_sites() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsystemConfig {
    /// Cube side for cube averages.
    pub l: usize,
    /// Explicit regions (site lists) examined in addition to the cubes.
    pub regions: Vec<Vec<usize>>,
}

impl Default for SubsystemConfig {
    fn default() -> Self {
        Self { l: 1, regions: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_override: Option<f64>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Lattice sides to run; empty means the lattice side alone.
    pub size_sweep: Vec<usize>,
    pub correlation_iters: usize,
    /// Largest separation in the correlation scan (default: half the side).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_max_distance: Option<usize>,
    /// Quadrature nodes for the log-partition identity; 0 skips it.
    pub duhamel_nodes: usize,
    /// Site for the transport diagnostic (diagnostics scenario).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport_site: Option<usize>,
    pub log_base: LogBase,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            t_override: None,
            alpha: 0.2,
            seed: None,
            size_sweep: Vec::new(),
            correlation_iters: 50,
            correlation_max_distance: None,
            duhamel_nodes: 64,
            transport_site: None,
            log_base: LogBase::Natural,
        }
    }
}

/// Parameter grid for the certify scenario; every combination is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyGrid {
    pub d: Vec<u32>,
    pub alpha: Vec<f64>,
    pub l: Vec<u32>,
    pub xi: Vec<f64>,
    pub k: Vec<f64>,
    #[serde(default = "default_d_loc")]
    pub d_loc: u32,
    #[serde(default = "default_max_sites")]
    pub max_sites: f64,
}

fn default_d_loc() -> u32 {
    2
}

fn default_max_sites() -> f64 {
    1e300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub hamiltonians: HamiltonianConfig,
    #[serde(default)]
    pub state: StateRecipe,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelRecipe>,
    #[serde(default)]
    pub subsystem: SubsystemConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyGrid>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Sides to run, in the given order.
    pub fn sizes(&self) -> Vec<usize> {
        if self.analysis.size_sweep.is_empty() {
            vec![self.lattice.side]
        } else {
            self.analysis.size_sweep.clone()
        }
    }

    pub fn seed(&self) -> u64 {
        self.analysis.seed.unwrap_or(0)
    }

    fn need(&self, what: &str, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{} scenario needs {what}", self.scenario.name())))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hamiltonians;
        match self.scenario {
            ScenarioKind::Certify => {
                let g = self.certify.as_ref().ok_or_else(|| Error::Config("certify scenario needs a `certify` grid".into()))?;
                if g.d.is_empty() || g.alpha.is_empty() || g.l.is_empty() || g.xi.is_empty() || g.k.is_empty() {
                    return Err(Error::Config("certify grid has an empty axis".into()));
                }
                return Ok(());
            }
            ScenarioKind::Quench => {
                self.need("hamiltonians.initial and hamiltonians.final", h.initial.is_some() && h.final_.is_some())?;
                self.need("a ground initial state", self.state == StateRecipe::Ground)?;
            }
            ScenarioKind::Rethermalize => {
                self.need("hamiltonians.final", h.final_.is_some())?;
                self.need("a channel", self.channel.is_some())?;
                self.need("a thermal initial state", matches!(self.state, StateRecipe::Thermal { .. }))?;
            }
            ScenarioKind::Perturb => {
                self.need("hamiltonians.initial and hamiltonians.final", h.initial.is_some() && h.final_.is_some())?;
                self.need("a thermal initial state", matches!(self.state, StateRecipe::Thermal { .. }))?;
            }
            ScenarioKind::Diagnostics => self.need("hamiltonians.final", h.final_.is_some())?,
        }
        if self.analysis.seed.is_none() {
            return Err(Error::Config("analysis.seed is mandatory for time-averaged analyses".into()));
        }
        if self.analysis.samples < 2 {
            return Err(Error::Config("analysis.samples must be at least 2".into()));
        }
        if self.analysis.correlation_iters == 0 {
            return Err(Error::Config("analysis.correlation_iters must be positive".into()));
        }
        if let StateRecipe::Thermal { beta } = self.state {
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::Config("thermal beta must be finite and non-negative".into()));
            }
        }
        if let StateRecipe::Product { bits } = &self.state {
            if bits.is_empty() || bits.chars().any(|c| c.to_digit(10).is_none_or(|d| d as usize >= self.lattice.local_dim)) {
                return Err(Error::Config("product bits must be non-empty digits below local_dim".into()));
            }
        }
        if self.subsystem.l == 0 {
            return Err(Error::Config("subsystem.l must be positive".into()));
        }
        for side in self.sizes() {
            let spec = self.lattice.spec(side)?;
            let check = |sites: &[usize], what: &str| {
                if sites.is_empty() || sites.iter().any(|&s| s >= spec.sites()) {
                    Err(Error::Config(format!("{what} {sites:?} does not fit a lattice of side {side}")))
                } else {
                    Ok(())
                }
            };
            for r in &self.subsystem.regions {
                check(r, "region")?;
            }
            if let Some(ch) = &self.channel {
                check(&ch.sites, "channel support")?;
            }
            if self.subsystem.l > side {
                return Err(Error::Config(format!("cube side {} exceeds lattice side {side}", self.subsystem.l)));
            }
        }
        Ok(())
    }
}
