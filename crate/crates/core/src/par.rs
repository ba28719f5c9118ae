//! Execution policy for the data-parallel scans behind verification and
//! Monte Carlo drivers. With the `parallel` feature (on by default),
//! `Exec::Auto` routes work through rayon; `Exec::Sequential`, or a build
//! without the feature, runs the same scan as a plain loop. Both paths give
//! identical results: reductions are order-insensitive and maps preserve
//! index order.

/// How a scan should run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Parallel when the `parallel` feature is compiled in.
    #[default]
    Auto,
    /// Always a single-threaded loop.
    Sequential,
}

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every index in `0..count` and collects results in index
/// order.
pub fn scan_map<T, F>(count: u64, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Auto => (0..count).into_par_iter().map(f).collect(),
        _ => (0..count).map(f).collect(),
    }
}

/// Maximum of `f` over `0..count` together with the smallest index attaining
/// it; `None` when the range is empty. The tie-break keeps the result
/// independent of scheduling.
pub fn scan_argmax<T, F>(count: u64, exec: Exec, f: F) -> Option<(u64, T)>
where
    T: Ord + Send + Copy,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Auto => (0..count)
            .into_par_iter()
            .map(|i| (i, f(i)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))),
        _ => (0..count)
            .map(|i| (i, f(i)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))),
    }
}
