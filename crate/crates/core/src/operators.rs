//! Local terms, k-local Hamiltonians, Kraus channels and coarse-grained
//! observables, all realised as dense matrices on the lattice Hilbert space.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::SiteIndexer;
use crate::error::{domain, Error, Result};
use crate::lattice::{check_disjoint, Boundary, LatticeSpec, Region};
use crate::linalg::{self, c64, CMat, ONE, ZERO};
use crate::states::DensityOperator;

/// Hermiticity tolerance (max entry) for stored operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Slack on the `||h_i|| <= 1` normalisation.
pub const NORM_TOL: f64 = 1e-10;
/// Slack on Kraus completeness.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A bounded Hermitian operator acting on a handful of sites.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    support: Region,
    matrix: CMat,
    label: String,
}

impl LocalTerm {
    /// Rejects non-Hermitian matrices and operator norms above one.
    pub fn new(spec: &LatticeSpec, support: Region, matrix: CMat, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let dim = support.hilbert_dim(spec);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        let defect = linalg::hermiticity_defect(matrix.as_ref());
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let norm = linalg::opnorm_hermitian(matrix.as_ref())?;
        if norm > 1.0 + NORM_TOL {
            return Err(Error::NormExceeded { label, norm });
        }
        Ok(Self { support, matrix, label })
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn norm(&self) -> f64 {
        linalg::opnorm_hermitian(self.matrix.as_ref()).unwrap_or(f64::INFINITY)
    }

    /// True when every support site lies within `k` of some support site.
    pub fn is_k_local(&self, spec: &LatticeSpec, k: usize) -> bool {
        let sites = self.support.sites();
        sites.is_empty()
            || sites
                .iter()
                .any(|&anchor| sites.iter().all(|&s| spec.site_distance(anchor, s) <= k))
    }
}

/// Full-space matrix of a local term: identity outside its support.
pub fn embed(term: &LocalTerm, spec: &LatticeSpec) -> Result<CMat> {
    Ok(SiteIndexer::new(spec, term.support.sites())?.embed(term.matrix()))
}

/// Built-in Hamiltonian families (all spin-1/2, nearest neighbour).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    /// `-b sum_i X_i`
    TransverseField,
    /// `-J sum Z_i Z_j - h sum Z_i`
    ClassicalIsingField,
    /// `-J sum Z_i Z_j - h sum X_i - hz sum Z_i`
    Tfim,
    /// `-(J/2) sum (X_i X_j + Y_i Y_j) - (mu/2) sum Z_i`
    XxChain,
    /// `J sum (X_i X_j + Y_i Y_j + delta Z_i Z_j) - hz sum Z_i`
    Heisenberg,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::TransverseField,
        Family::ClassicalIsingField,
        Family::Tfim,
        Family::XxChain,
        Family::Heisenberg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TransverseField => "transverse_field",
            Family::ClassicalIsingField => "classical_ising_field",
            Family::Tfim => "tfim",
            Family::XxChain => "xx_chain",
            Family::Heisenberg => "heisenberg",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Unknown { kind: "Hamiltonian family", name: name.to_string() })
    }

    /// Accepted parameter names: (required, optional).
    fn parameters(self) -> (&'static [&'static str], &'static [&'static str]) {
        const DISORDER: [&str; 2] = ["disorder", "disorder_seed"];
        match self {
            Family::TransverseField => (&["b"], &DISORDER),
            Family::ClassicalIsingField => (&["J", "h"], &DISORDER),
            Family::Tfim => (&["J"], &["h", "g", "hz", "disorder", "disorder_seed"]),
            Family::XxChain => (&["J"], &["mu", "disorder", "disorder_seed"]),
            Family::Heisenberg => (&["J"], &["delta", "hz", "disorder", "disorder_seed"]),
        }
    }
}

/// Parameter map used for family construction.
pub type Params = BTreeMap<String, f64>;

/// A k-local Hamiltonian `sum_i h_i` with its assembled dense matrix.
#[derive(Debug, Clone)]
pub struct LocalHamiltonian {
    spec: LatticeSpec,
    terms: Vec<LocalTerm>,
    k: usize,
    offset: f64,
    dense: CMat,
    translation_invariant: bool,
    rescale: f64,
    label: String,
}

impl LocalHamiltonian {
    pub fn new(spec: LatticeSpec, terms: Vec<LocalTerm>, k: usize) -> Result<Self> {
        for t in &terms {
            if !t.is_k_local(&spec, k) {
                return Err(domain(format!("term `{}` is not {k}-local", t.label)));
            }
            if t.support.sites().iter().any(|&s| s >= spec.sites()) {
                return Err(domain(format!("term `{}` leaves the lattice", t.label)));
            }
        }
        let dim = spec.hilbert_dim();
        let mut dense = Mat::zeros(dim, dim);
        for t in &terms {
            SiteIndexer::new(&spec, t.support.sites())?.add_embedded(&mut dense, t.matrix(), 1.0);
        }
        Ok(Self {
            spec,
            terms,
            k,
            offset: 0.0,
            dense,
            translation_invariant: false,
            rescale: 1.0,
            label: String::from("custom"),
        })
    }

    /// Adds `c * 1` (a global energy shift, not counted as a term).
    pub fn with_offset(mut self, c: f64) -> Self {
        for i in 0..self.dense.nrows() {
            self.dense[(i, i)] += c64::new(c, 0.0);
        }
        self.offset += c;
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dense(&self) -> MatRef<'_, c64> {
        self.dense.as_ref()
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// Factor every physical coupling was divided by to reach `||h_i|| <= 1`.
    pub fn rescale_factor(&self) -> f64 {
        self.rescale
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Terms whose support meets `region` (the `H_A` of a local disturbance).
    pub fn terms_touching(&self, region: &Region) -> Vec<&LocalTerm> {
        self.terms.iter().filter(|t| t.support.intersects(region)).collect()
    }

    /// Exact `||H_A||`, evaluated on the union of the supports of the terms
    /// touching `region`.
    pub fn touching_norm(&self, region: &Region) -> Result<f64> {
        let touching = self.terms_touching(region);
        if touching.is_empty() {
            return Ok(0.0);
        }
        let union = touching.iter().fold(Region::empty(), |acc, t| acc.union(&t.support));
        let dim = union.hilbert_dim(&self.spec);
        let mut local = Mat::zeros(dim, dim);
        for t in touching {
            let placement: Vec<usize> = t
                .support
                .sites()
                .iter()
                .map(|s| union.sites().binary_search(s).expect("support inside union"))
                .collect();
            let sub = LatticeSpec::new(1, union.len(), self.spec.local_dim(), self.spec.metric(), Boundary::Open)?;
            SiteIndexer::new(&sub, &placement)?.add_embedded(&mut local, t.matrix(), 1.0);
        }
        linalg::opnorm_hermitian(local.as_ref())
    }
}

/// Builds a named family. Couplings are physical; when some term exceeds
/// unit norm every term is divided by the largest term norm and that factor
/// is kept in [`LocalHamiltonian::rescale_factor`].
pub fn build_family(family: Family, params: &Params, spec: &LatticeSpec) -> Result<LocalHamiltonian> {
    if spec.local_dim() != 2 {
        return Err(domain("built-in families are defined for spin-1/2 lattices"));
    }
    let (required, optional) = family.parameters();
    for key in params.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(Error::Unknown { kind: "parameter", name: format!("{}.{key}", family.name()) });
        }
    }
    let get = |k: &str| params.get(k).copied().ok_or_else(|| Error::MissingParameter(format!("{}.{k}", family.name())));
    let opt = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    for (k, v) in params {
        if !v.is_finite() {
            return Err(domain(format!("parameter {k} is not finite")));
        }
    }

    let n = spec.sites();
    let disorder = opt("disorder", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opt("disorder_seed", 0.0) as u64);
    let site_noise: Vec<f64> = (0..n).map(|_| disorder * (2.0 * rng.random::<f64>() - 1.0)).collect();

    let (x, y, z) = (linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z());
    let xx = linalg::kron(x.as_ref(), x.as_ref());
    let yy = linalg::kron(y.as_ref(), y.as_ref());
    let zz = linalg::kron(z.as_ref(), z.as_ref());
    let scaled = |m: &CMat, s: f64| Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s);
    let add = |a: &CMat, b: &CMat| Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)]);

    // (support, matrix, label) before normalisation
    let mut raw: Vec<(Vec<usize>, CMat, String)> = Vec::new();
    let bonds = nearest_neighbour_bonds(spec);
    match family {
        Family::TransverseField => {
            let b = get("b")?;
            for i in 0..n {
                raw.push((vec![i], scaled(&x, -(b + site_noise[i])), format!("x{i}")));
            }
        }
        Family::ClassicalIsingField => {
            let (j, h) = (get("J")?, get("h")?);
            for &(a, c) in &bonds {
                raw.push((vec![a, c], scaled(&zz, -j), format!("zz{a}_{c}")));
            }
            for i in 0..n {
                raw.push((vec![i], scaled(&z, -(h + site_noise[i])), format!("z{i}")));
            }
        }
        Family::Tfim => {
            let j = get("J")?;
            let h = match (params.get("h"), params.get("g")) {
                (Some(_), Some(_)) => return Err(domain("tfim takes either `h` or its alias `g`, not both")),
                (Some(&h), None) | (None, Some(&h)) => h,
                (None, None) => return Err(Error::MissingParameter("tfim.h".into())),
            };
            let hz = opt("hz", 0.0);
            for &(a, c) in &bonds {
                raw.push((vec![a, c], scaled(&zz, -j), format!("zz{a}_{c}")));
            }
            for i in 0..n {
                raw.push((vec![i], scaled(&x, -h), format!("x{i}")));
                let field = hz + site_noise[i];
                if field != 0.0 {
                    raw.push((vec![i], scaled(&z, -field), format!("z{i}")));
                }
            }
        }
        Family::XxChain => {
            let j = get("J")?;
            let mu = opt("mu", 0.0);
            let hop = scaled(&add(&xx, &yy), -0.5 * j);
            for &(a, c) in &bonds {
                raw.push((vec![a, c], hop.clone(), format!("hop{a}_{c}")));
            }
            for i in 0..n {
                let field = mu + site_noise[i];
                if field != 0.0 {
                    raw.push((vec![i], scaled(&z, -0.5 * field), format!("mu{i}")));
                }
            }
        }
        Family::Heisenberg => {
            let j = get("J")?;
            let delta = opt("delta", 1.0);
            let hz = opt("hz", 0.0);
            let bond = scaled(&add(&add(&xx, &yy), &scaled(&zz, delta)), j);
            for &(a, c) in &bonds {
                raw.push((vec![a, c], bond.clone(), format!("xxz{a}_{c}")));
            }
            for i in 0..n {
                let field = hz + site_noise[i];
                if field != 0.0 {
                    raw.push((vec![i], scaled(&z, -field), format!("z{i}")));
                }
            }
        }
    }

    let mut rescale = 1.0f64;
    for (_, m, _) in &raw {
        rescale = rescale.max(linalg::opnorm_hermitian(m.as_ref())?);
    }
    let terms = raw
        .into_iter()
        .map(|(sites, m, label)| {
            let support = Region::new(spec, sites)?;
            LocalTerm::new(spec, support, scaled(&m, 1.0 / rescale), label)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut h = LocalHamiltonian::new(*spec, terms, 1)?;
    h.rescale = rescale;
    h.translation_invariant = spec.boundary() == Boundary::Periodic && disorder == 0.0;
    h.label = String::from(family.name());
    Ok(h)
}

/// Bonds `(i, j)`, `i < j` or wrapped, along every lattice axis.
pub fn nearest_neighbour_bonds(spec: &LatticeSpec) -> Vec<(usize, usize)> {
    let n = spec.side();
    let mut out = Vec::new();
    for site in 0..spec.sites() {
        let coords = spec.coords(site);
        for axis in 0..spec.dim() {
            let mut next = coords.clone();
            if coords[axis] + 1 < n {
                next[axis] += 1;
            } else if spec.boundary() == Boundary::Periodic && n > 2 {
                next[axis] = 0;
            } else {
                continue;
            }
            out.push((site, spec.site_at(&next)));
        }
    }
    out
}

/// Local channel `rho -> sum_i K_i rho K_i^dagger` with
/// `sum_i K_i^dagger K_i = 1`.
///
/// The stored factors are the ones multiplying the state from the left; the
/// completeness check is applied to exactly those factors.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    support: Region,
    kraus: Vec<CMat>,
    label: String,
}

impl QuantumChannel {
    pub fn new(spec: &LatticeSpec, support: Region, kraus: Vec<CMat>, label: impl Into<String>) -> Result<Self> {
        let dim = support.hilbert_dim(spec);
        if kraus.is_empty() {
            return Err(domain("a channel needs at least one Kraus operator"));
        }
        if let Some(k) = kraus.iter().find(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: k.nrows() });
        }
        let ch = Self { support, kraus, label: label.into() };
        let defect = ch.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::Incomplete(defect));
        }
        Ok(ch)
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `max |sum K^dagger K - 1|` entrywise.
    pub fn completeness_defect(&self) -> f64 {
        let dim = self.kraus[0].nrows();
        let mut acc = linalg::identity(dim);
        for k in &self.kraus {
            let kk = linalg::adj_matmul(k.as_ref(), k.as_ref());
            for j in 0..dim {
                for i in 0..dim {
                    acc[(i, j)] -= kk[(i, j)];
                }
            }
        }
        linalg::max_abs(acc.as_ref())
    }

    /// Same channel placed on another region of equal size.
    pub fn moved_to(&self, spec: &LatticeSpec, support: Region) -> Result<Self> {
        Self::new(spec, support, self.kraus.clone(), self.label.clone())
    }
}

/// Named single-site channels; on a multi-site support the channel acts as
/// the tensor product of independent copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChannelKind {
    Identity,
    /// `rho -> (1-p) rho + p tr(rho) 1/2`; parameter `p` (default 1).
    Depolarizing,
    /// Decay to level 0 with probability `gamma`.
    AmplitudeDamping,
    /// Conjugation by a Pauli (`axis` 0/1/2 = X/Y/Z) or Hadamard (3); or the
    /// rotation `exp(-i theta/2 sigma_axis)` when `theta` is given.
    UnitaryKick,
    /// Computational-basis measurement with the outcome discarded.
    MeasureForget,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Identity => "identity",
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::UnitaryKick => "unitary_kick",
            ChannelKind::MeasureForget => "measure_forget",
        }
    }

    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Identity,
        ChannelKind::Depolarizing,
        ChannelKind::AmplitudeDamping,
        ChannelKind::UnitaryKick,
        ChannelKind::MeasureForget,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Unknown { kind: "channel", name: name.to_string() })
    }

    /// Single-qubit Kraus set.
    pub fn single_site_kraus(self, params: &Params) -> Result<Vec<CMat>> {
        let (x, y, z) = (linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z());
        let s = |m: &CMat, f: f64| Mat::from_fn(2, 2, |i, j| m[(i, j)] * f);
        let entry = |a: c64, b: c64, c: c64, d: c64| Mat::from_fn(2, 2, |i, j| [[a, b], [c, d]][i][j]);
        let known: &[&str] = match self {
            ChannelKind::Identity | ChannelKind::MeasureForget => &[],
            ChannelKind::Depolarizing => &["p"],
            ChannelKind::AmplitudeDamping => &["gamma"],
            ChannelKind::UnitaryKick => &["axis", "theta"],
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Unknown { kind: "channel parameter", name: k.clone() });
        }
        Ok(match self {
            ChannelKind::Identity => vec![linalg::identity(2)],
            ChannelKind::Depolarizing => {
                let p = params.get("p").copied().unwrap_or(1.0);
                if !(0.0..=4.0 / 3.0).contains(&p) {
                    return Err(domain("depolarizing p must lie in [0, 4/3]"));
                }
                vec![
                    s(&linalg::identity(2), libm::sqrt(1.0 - 0.75 * p)),
                    s(&x, libm::sqrt(p / 4.0)),
                    s(&y, libm::sqrt(p / 4.0)),
                    s(&z, libm::sqrt(p / 4.0)),
                ]
            }
            ChannelKind::AmplitudeDamping => {
                let g = params.get("gamma").copied().ok_or_else(|| Error::MissingParameter("amplitude_damping.gamma".into()))?;
                if !(0.0..=1.0).contains(&g) {
                    return Err(domain("amplitude damping gamma must lie in [0, 1]"));
                }
                let r = |v: f64| c64::new(v, 0.0);
                vec![
                    entry(ONE, ZERO, ZERO, r(libm::sqrt(1.0 - g))),
                    entry(ZERO, r(libm::sqrt(g)), ZERO, ZERO),
                ]
            }
            ChannelKind::UnitaryKick => {
                let axis = params.get("axis").copied().unwrap_or(0.0) as usize;
                let pauli = match axis {
                    0 => x,
                    1 => y,
                    2 => z,
                    3 => {
                        let h = libm::sqrt(0.5);
                        return Ok(vec![entry(c64::new(h, 0.0), c64::new(h, 0.0), c64::new(h, 0.0), c64::new(-h, 0.0))]);
                    }
                    _ => return Err(domain("unitary kick axis must be 0..=3")),
                };
                match params.get("theta") {
                    None => vec![pauli],
                    Some(&theta) => {
                        let (c, sn) = (libm::cos(theta / 2.0), libm::sin(theta / 2.0));
                        vec![Mat::from_fn(2, 2, |i, j| {
                            let id = if i == j { c64::new(c, 0.0) } else { ZERO };
                            id - c64::new(0.0, sn) * pauli[(i, j)]
                        })]
                    }
                }
            }
            ChannelKind::MeasureForget => vec![
                entry(ONE, ZERO, ZERO, ZERO),
                entry(ZERO, ZERO, ZERO, ONE),
            ],
        })
    }
}

/// Library channel on `support` (tensor product of per-site copies).
pub fn build_channel(kind: ChannelKind, params: &Params, spec: &LatticeSpec, support: Region) -> Result<QuantumChannel> {
    if spec.local_dim() != 2 {
        return Err(domain("library channels are defined for spin-1/2 lattices"));
    }
    if support.is_empty() {
        return Err(domain("channel support must be nonempty"));
    }
    let single = kind.single_site_kraus(params)?;
    let mut kraus: Vec<CMat> = vec![linalg::identity(1)];
    for _ in 0..support.len() {
        kraus = kraus
            .iter()
            .flat_map(|a| single.iter().map(move |b| linalg::kron(a.as_ref(), b.as_ref())))
            .collect();
    }
    QuantumChannel::new(spec, support, kraus, kind.name())
}

/// `Phi(rho)`; completeness is re-verified before application.
pub fn apply_channel(ch: &QuantumChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    let defect = ch.completeness_defect();
    if defect > COMPLETENESS_TOL {
        return Err(Error::Incomplete(defect));
    }
    let spec = rho.spec();
    if ch.support.sites().iter().any(|&s| s >= spec.sites()) {
        return Err(domain("channel support leaves the lattice"));
    }
    let idx = SiteIndexer::new(spec, ch.support.sites())?;
    let dense = rho.to_matrix();
    let d = dense.nrows();
    let mut out = Mat::zeros(d, d);
    for k in &ch.kraus {
        let term = idx.conjugate(k.as_ref(), dense.as_ref());
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] += term[(i, j)];
            }
        }
    }
    Ok(DensityOperator::from_matrix_unchecked(*spec, linalg::hermitian_part(out.as_ref())))
}

/// `M = (1/m) sum_i M_{S_i}` over pairwise-disjoint blocks with
/// `||M_{S_i}|| <= C`.
#[derive(Debug, Clone)]
pub struct CoarseObservable {
    blocks: Vec<(Region, CMat)>,
    norm_cap: f64,
}

impl CoarseObservable {
    pub fn new(spec: &LatticeSpec, blocks: Vec<(Region, CMat)>, norm_cap: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(domain("coarse observable needs at least one block"));
        }
        if !(norm_cap > 0.0) {
            return Err(domain("norm cap must be positive"));
        }
        check_disjoint(blocks.iter().map(|(r, _)| r))?;
        for (region, m) in &blocks {
            let dim = region.hilbert_dim(spec);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
            }
            let defect = linalg::hermiticity_defect(m.as_ref());
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian(defect));
            }
            if linalg::opnorm_hermitian(m.as_ref())? > norm_cap + NORM_TOL {
                return Err(domain("block exceeds the norm cap"));
            }
        }
        Ok(Self { blocks, norm_cap })
    }

    /// Magnetisation per spin `(1/N) sum_i Z_i`, `C = 1`.
    pub fn magnetization(spec: &LatticeSpec) -> Result<Self> {
        let blocks = (0..spec.sites())
            .map(|i| Ok((Region::new(spec, [i])?, linalg::pauli_z())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, blocks, 1.0)
    }

    pub fn blocks(&self) -> &[(Region, CMat)] {
        &self.blocks
    }

    pub fn norm_cap(&self) -> f64 {
        self.norm_cap
    }

    pub fn expectation(&self, rho: &DensityOperator) -> Result<f64> {
        let mut acc = 0.0;
        for (region, m) in &self.blocks {
            let reduced = rho.partial_trace(region)?;
            acc += linalg::trace_product(reduced.as_ref(), m.as_ref()).re;
        }
        Ok(acc / self.blocks.len() as f64)
    }
}

/// `(|tr[rho M] - tr[tau M]|, C * mean_i ||rho_{S_i} - tau_{S_i}||_1)`.
///
/// The second entry uses the raw trace norm, i.e. twice the half-normalised
/// trace distance, which is what `|tr[X M_S]| <= ||M_S|| ||X||_1` needs.
pub fn coarse_expectation_gap(m: &CoarseObservable, rho: &DensityOperator, tau: &DensityOperator) -> Result<(f64, f64)> {
    if rho.spec() != tau.spec() {
        return Err(domain("states live on different lattices"));
    }
    let mut gap = 0.0;
    let mut norms = Vec::with_capacity(m.blocks.len());
    for (region, op) in &m.blocks {
        let a = rho.partial_trace(region)?;
        let b = tau.partial_trace(region)?;
        let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
        gap += linalg::trace_product(diff.as_ref(), op.as_ref()).re;
        norms.push(linalg::trace_norm_hermitian(diff.as_ref())?);
    }
    let count = m.blocks.len() as f64;
    Ok(((gap / count).abs(), m.norm_cap * linalg::pairwise_sum(&norms) / count))
}
