//! Finite hypercubic lattices, regions and cubic subsystems.
//!
//! Sites are linearised row-major: the site with coordinates
//! `(x_0, .., x_{d-1})` has index `sum_a x_a n^(d-1-a)`. A computational basis
//! state is the radix-`d_loc` number whose digit for site `i` carries place
//! value `d_loc^(N-1-i)`, so site 0 is the most significant digit.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

/// Lattice metric used by [`distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    #[default]
    Manhattan,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Maximum number of qubit-equivalents (`N log2 d_loc`) a lattice may carry.
pub const MAX_BITS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticeSpec {
    dim: usize,
    side: usize,
    local_dim: usize,
    metric: Metric,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(dim: usize, side: usize, local_dim: usize, metric: Metric, boundary: Boundary) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(domain("lattice dimension and side must be positive"));
        }
        if local_dim < 2 {
            return Err(domain("local dimension must be at least 2"));
        }
        let sites = side
            .checked_pow(dim as u32)
            .ok_or_else(|| domain("site count overflows"))?;
        if sites as f64 * libm::log2(local_dim as f64) > MAX_BITS {
            return Err(domain(format!(
                "Hilbert space {local_dim}^{sites} exceeds the basis-index width"
            )));
        }
        Ok(Self { dim, side, local_dim, metric, boundary })
    }

    /// Open spin-1/2 chain with the Manhattan metric.
    pub fn chain(sites: usize) -> Result<Self> {
        Self::new(1, sites, 2, Metric::Manhattan, Boundary::Open)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of sites `N = n^d`.
    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Hilbert-space dimension `d_loc^N`.
    pub fn hilbert_dim(&self) -> usize {
        self.local_dim.pow(self.sites() as u32)
    }

    /// Place value of the basis digit belonging to `site`.
    pub fn place_value(&self, site: usize) -> usize {
        self.local_dim.pow((self.sites() - 1 - site) as u32)
    }

    /// Local level of `site` in basis state `index`.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.place_value(site)) % self.local_dim
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = alloc::vec![0; self.dim];
        let mut rest = site;
        for a in (0..self.dim).rev() {
            c[a] = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn site_at(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &x| acc * self.side + x)
    }

    /// Site distance under the configured metric. Periodic lattices use the
    /// minimum-image separation along each axis.
    pub fn site_distance(&self, i: usize, j: usize) -> usize {
        let (ci, cj) = (self.coords(i), self.coords(j));
        let per_axis = ci.iter().zip(&cj).map(|(&a, &b)| {
            let d = a.abs_diff(b);
            match self.boundary {
                Boundary::Open => d,
                Boundary::Periodic => d.min(self.side - d),
            }
        });
        match self.metric {
            Metric::Manhattan => per_axis.sum(),
            Metric::Chebyshev => per_axis.max().unwrap_or(0),
        }
    }

    pub fn all_sites(&self) -> Region {
        Region { sites: (0..self.sites()).collect() }
    }
}

/// Sorted, duplicate-free set of sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    /// Validates the sites against `spec`; input order is irrelevant.
    pub fn new(spec: &LatticeSpec, sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut sites: Vec<usize> = sites.into_iter().collect();
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(domain(format!("duplicate site {}", w[0])));
        }
        if let Some(&bad) = sites.iter().find(|&&s| s >= spec.sites()) {
            return Err(domain(format!("site {bad} outside lattice of {} sites", spec.sites())));
        }
        Ok(Self { sites })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.sites.iter().any(|&s| other.contains(s))
    }

    /// Hilbert-space dimension `d_S = d_loc^|S|`.
    pub fn hilbert_dim(&self, spec: &LatticeSpec) -> usize {
        spec.local_dim().pow(self.len() as u32)
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut sites: Vec<usize> = self.sites.iter().chain(&other.sites).copied().collect();
        sites.sort_unstable();
        sites.dedup();
        Region { sites }
    }

    /// Largest pairwise site distance (0 for fewer than two sites).
    pub fn diameter(&self, spec: &LatticeSpec) -> usize {
        let mut best = 0;
        for (k, &i) in self.sites.iter().enumerate() {
            for &j in &self.sites[k + 1..] {
                best = best.max(spec.site_distance(i, j));
            }
        }
        best
    }
}

/// `min_{i in X, j in Y} dist(i, j)`.
pub fn distance(spec: &LatticeSpec, x: &Region, y: &Region) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(domain("distance between regions requires both to be nonempty"));
    }
    Ok(x.sites
        .iter()
        .flat_map(|&i| y.sites.iter().map(move |&j| (i, j)))
        .map(|(i, j)| spec.site_distance(i, j))
        .min()
        .unwrap_or(0))
}

/// All axis-aligned hypercubes of side `l`. Cubes never wrap around the
/// boundary, so there are `(n - l + 1)^d` of them, ordered by their anchor
/// (lowest-coordinate corner) in row-major order.
pub fn cubic_subsystems(spec: &LatticeSpec, l: usize) -> Result<Vec<Region>> {
    if l == 0 || l > spec.side() {
        return Err(domain(format!("cube side {l} outside 1..={}", spec.side())));
    }
    let d = spec.dim();
    let anchors_per_axis = spec.side() - l + 1;
    let cube_count = anchors_per_axis.pow(d as u32);
    let cell_count = l.pow(d as u32);
    let mut out = Vec::with_capacity(cube_count);
    for a in 0..cube_count {
        let anchor = mixed_radix(a, anchors_per_axis, d);
        let mut sites = Vec::with_capacity(cell_count);
        for c in 0..cell_count {
            let offset = mixed_radix(c, l, d);
            let coords: Vec<usize> = anchor.iter().zip(&offset).map(|(x, o)| x + o).collect();
            sites.push(spec.site_at(&coords));
        }
        out.push(Region::new(spec, sites)?);
    }
    Ok(out)
}

fn mixed_radix(mut value: usize, radix: usize, digits: usize) -> Vec<usize> {
    let mut out = alloc::vec![0; digits];
    for slot in out.iter_mut().rev() {
        *slot = value % radix;
        value /= radix;
    }
    out
}

/// The bath `B` of a subsystem `S`: every site not in `S`.
pub fn complement(spec: &LatticeSpec, s: &Region) -> Region {
    Region { sites: (0..spec.sites()).filter(|&i| !s.contains(i)).collect() }
}

/// Checks that `regions` are pairwise disjoint.
pub fn check_disjoint<'a>(regions: impl IntoIterator<Item = &'a Region>) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for r in regions {
        for &s in r.sites() {
            if seen.contains(&s) {
                return Err(Error::Overlap(s));
            }
            seen.push(s);
        }
    }
    Ok(())
}
