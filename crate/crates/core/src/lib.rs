//! Dense exact-diagonalization kernels for studying equilibration and
//! thermalization of closed spin lattices.
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled; the feature only switches the linear-algebra backend to its
//! architecture-specific kernels. File formats, configuration and the CLI
//! live in the `qthermal` companion crate.
//!
//! Module map:
//!
//! * [`lattice`]: hypercubic geometry, regions and cubic subsystems.
//! * [`operators`]: local terms, Hamiltonian families, channels, coarse observables.
//! * [`spectral`]: eigendecomposition, level groups, gap census, dephasing, evolution.
//! * [`states`]: density operators, thermal states, partial traces, distances, entropies.
//! * [`diagnostics`]: variance, correlation decay, spectral CDFs, time averages, transport.
//! * [`bounds`]: evaluated inequalities with verdicts ([`bounds::BoundReport`]).
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod basis;
pub mod bounds;
pub mod diagnostics;
pub mod digest;
mod error;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod random;
pub mod spectral;
pub mod states;

/// Crate version, echoed in run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use lattice::{Boundary, LatticeSpec, Metric, Region};
pub use linalg::{c64, CMat};
pub use operators::{CoarseObservable, Family, LocalHamiltonian, LocalTerm, QuantumChannel};
pub use spectral::{GapCensus, SpectralData};
pub use states::{DensityOperator, ThermalState};
