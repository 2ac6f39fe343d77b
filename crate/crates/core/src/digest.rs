//! Stable content digests for report provenance.

use alloc::string::String;

use sha2::{Digest as _, Sha256};

/// SHA-256 over a sequence of tagged values.
#[derive(Debug, Clone, Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn str(mut self, s: &str) -> Self {
        self.hasher.update((s.len() as u64).to_le_bytes());
        self.hasher.update(s.as_bytes());
        self
    }

    pub fn f64(mut self, x: f64) -> Self {
        self.hasher.update(x.to_bits().to_le_bytes());
        self
    }

    pub fn u64(mut self, x: u64) -> Self {
        self.hasher.update(x.to_le_bytes());
        self
    }

    pub fn f64s(self, xs: &[f64]) -> Self {
        xs.iter().fold(self.u64(xs.len() as u64), |d, &x| d.f64(x))
    }

    pub fn hex(self) -> String {
        use core::fmt::Write;
        let bytes = self.hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in bytes.iter() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}
