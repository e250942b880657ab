//! Worker pools. `SNFIT_THREADS` caps the worker count (default: all cores).
//!
//! Work items are keyed by index and collected in index order, so results do not
//! depend on the number of workers.

use rayon::prelude::*;
use snfit_core::simulate::{Prepared, RepOutcome};

use crate::CliError;

pub const THREADS_ENV: &str = "SNFIT_THREADS";

/// Worker count from `SNFIT_THREADS`, falling back to the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn pool() -> Result<rayon::ThreadPool, CliError> {
    pool_with(thread_count())
}

pub fn pool_with(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

/// `f(0), …, f(len−1)` on the pool, in index order.
pub fn map_indexed<T, F>(pool: &rayon::ThreadPool, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    pool.install(|| (0..len).into_par_iter().map(f).collect())
}

/// Runs every replication of a prepared study.
pub fn run_study(pool: &rayon::ThreadPool, prepared: &Prepared) -> Vec<RepOutcome> {
    map_indexed(pool, prepared.reps(), |r| prepared.run_rep(r))
}
