//! Digit-group indexing of the computational basis.
//!
//! For an ordered list of sites `S`, every basis index splits uniquely as
//! `base + offset(a)`: `a` enumerates the local levels on `S` (first listed
//! site most significant) and `base` ranges over indices whose digits on `S`
//! are all zero. Embedding, partial traces and local operator application
//! are all loops over this split.

use alloc::vec::Vec;

use faer::{Mat, MatRef};

use crate::error::{domain, Result};
use crate::lattice::LatticeSpec;
use crate::linalg::{c64, dagger, CMat, ZERO};

#[derive(Debug, Clone)]
pub struct SiteIndexer {
    offsets: Vec<usize>,
    bases: Vec<usize>,
}

impl SiteIndexer {
    /// `sites` is taken in the given order; duplicates are rejected.
    pub fn new(spec: &LatticeSpec, sites: &[usize]) -> Result<Self> {
        let n = spec.sites();
        let mut seen = alloc::vec![false; n];
        for &s in sites {
            if s >= n || seen[s] {
                return Err(domain("site list must be unique and inside the lattice"));
            }
            seen[s] = true;
        }
        let q = spec.local_dim();
        let local = q.pow(sites.len() as u32);
        let offsets = (0..local)
            .map(|a| {
                let mut rest = a;
                let mut off = 0;
                for &s in sites.iter().rev() {
                    off += (rest % q) * spec.place_value(s);
                    rest /= q;
                }
                off
            })
            .collect();
        let others: Vec<usize> = (0..n).filter(|&s| !seen[s]).collect();
        let bath = q.pow(others.len() as u32);
        let bases = (0..bath)
            .map(|r| {
                let mut rest = r;
                let mut base = 0;
                for &s in others.iter().rev() {
                    base += (rest % q) * spec.place_value(s);
                    rest /= q;
                }
                base
            })
            .collect();
        Ok(Self { offsets, bases })
    }

    /// Subsystem dimension.
    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// Complement dimension.
    pub fn bath_dim(&self) -> usize {
        self.bases.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn bases(&self) -> &[usize] {
        &self.bases
    }

    fn full_dim(&self) -> usize {
        self.offsets.len() * self.bases.len()
    }

    /// `scale * (m ⊗ 1)` accumulated into `dst`.
    pub fn add_embedded(&self, dst: &mut CMat, m: MatRef<'_, c64>, scale: f64) {
        let ds = self.local_dim();
        for &base in &self.bases {
            for b in 0..ds {
                let col = base + self.offsets[b];
                for a in 0..ds {
                    let v = m[(a, b)];
                    if v != ZERO {
                        dst[(base + self.offsets[a], col)] += v * scale;
                    }
                }
            }
        }
    }

    /// `m ⊗ 1` on the full space.
    pub fn embed(&self, m: MatRef<'_, c64>) -> CMat {
        let d = self.full_dim();
        let mut out = Mat::zeros(d, d);
        self.add_embedded(&mut out, m, 1.0);
        out
    }

    /// `(m ⊗ 1) v`.
    pub fn apply_vec(&self, m: MatRef<'_, c64>, v: &[c64]) -> Vec<c64> {
        let ds = self.local_dim();
        let mut out = alloc::vec![ZERO; v.len()];
        let mut gathered = alloc::vec![ZERO; ds];
        for &base in &self.bases {
            for (a, g) in gathered.iter_mut().enumerate() {
                *g = v[base + self.offsets[a]];
            }
            for a in 0..ds {
                let mut acc = ZERO;
                for (b, g) in gathered.iter().enumerate() {
                    acc += m[(a, b)] * g;
                }
                out[base + self.offsets[a]] = acc;
            }
        }
        out
    }

    /// `(m ⊗ 1) x` applied column by column.
    pub fn apply_left(&self, m: MatRef<'_, c64>, x: MatRef<'_, c64>) -> CMat {
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        let mut col = alloc::vec![ZERO; x.nrows()];
        for j in 0..x.ncols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = x[(i, j)];
            }
            let y = self.apply_vec(m, &col);
            for (i, v) in y.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// `(m ⊗ 1) x (m ⊗ 1)^dagger`.
    pub fn conjugate(&self, m: MatRef<'_, c64>, x: MatRef<'_, c64>) -> CMat {
        let left = self.apply_left(m, x);
        let both = self.apply_left(m, dagger(left.as_ref()).as_ref());
        dagger(both.as_ref())
    }

    /// Reduced matrix `tr_B[rho]` of a dense operator.
    pub fn partial_trace_dense(&self, rho: MatRef<'_, c64>) -> CMat {
        let ds = self.local_dim();
        Mat::from_fn(ds, ds, |a, b| {
            let (oa, ob) = (self.offsets[a], self.offsets[b]);
            self.bases.iter().fold(ZERO, |acc, &base| acc + rho[(base + oa, base + ob)])
        })
    }

    /// Adds `weight * tr_B |v><v|` into `acc`.
    pub fn accumulate_pure(&self, acc: &mut CMat, v: &[c64], weight: f64) {
        let ds = self.local_dim();
        for &base in &self.bases {
            for b in 0..ds {
                let vb = v[base + self.offsets[b]].conj() * weight;
                if vb == ZERO {
                    continue;
                }
                for a in 0..ds {
                    acc[(a, b)] += v[base + self.offsets[a]] * vb;
                }
            }
        }
    }
}
