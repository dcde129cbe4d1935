//! Budget-constrained WiFi access-point selection.
//!
//! The pipeline scores every AP of a fingerprint database for importance and
//! pairwise redundancy, turns "pick exactly `k` informative, non-redundant APs"
//! into a QUBO, samples it with simulated annealing or simulated quantum
//! annealing, and measures how well a kNN localizer does with the chosen APs.

pub mod analysis;
pub mod anneal;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod localize;
pub mod qubo;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "APSEL_THREADS";

/// A thread pool sized by `APSEL_THREADS` (rayon's default when unset or invalid).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    thread_pool_with(threads)
}

/// A thread pool with `threads` workers; 0 lets rayon decide.
pub fn thread_pool_with(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Solver(format!("cannot start worker threads: {e}")))
}
