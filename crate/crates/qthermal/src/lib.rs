//! File formats, scenario runner and command-line front end for
//! `qthermal-core`.
//!
//! A run is described by a JSON [`config::ScenarioConfig`], executed by
//! [`scenarios::run`] into a [`record::RunRecord`], and written to disk by
//! [`emit::emit_reports`].

pub mod config;
pub mod emit;
mod error;
pub mod record;
pub mod scenarios;
pub mod svg;

pub use error::{Error, Result};

/// Environment variable holding the worker-thread count for dense linear
/// algebra (default 1, which keeps results bit-reproducible).
pub const THREADS_ENV: &str = "QTHERMAL_THREADS";

/// Applies the thread count from [`THREADS_ENV`]; returns the count used.
pub fn configure_threads() -> Result<usize> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    faer::set_global_parallelism(if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) });
    Ok(threads)
}
