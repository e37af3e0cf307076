//! Execution backend: data-parallel map with a sequential fallback.
//!
//! All embarrassingly parallel work in the crate (Monte Carlo paths,
//! particle ensembles, parameter sweeps) funnels through [`map_indexed`].
//! With the default `parallel` feature the map runs on the rayon pool;
//! without it the same closure runs in a plain sequential loop.  Results
//! are always returned in index order, so outputs are bit-identical
//! across backends and worker counts provided the closure itself is
//! deterministic per index (the simulation code guarantees this with
//! per-index RNG substreams).

use crate::error::Result;

/// Applies `f` to every index in `0..n` and collects results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Applies `f` to every index in `0..n` and collects results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference implementation, available regardless of features.
///
/// Benchmarks compare this against [`map_indexed`]; tests use it to
/// certify that the parallel backend returns bit-identical results.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Requests a global worker-thread count.  Returns `true` when the
/// request was applied, `false` when the backend has no thread pool
/// (sequential build) or the pool was already initialized.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> Result<bool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_ok())
}

/// Requests a global worker-thread count.  Returns `true` when the
/// request was applied, `false` when the backend has no thread pool
/// (sequential build) or the pool was already initialized.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) -> Result<bool> {
    Ok(false)
}
