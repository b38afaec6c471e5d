//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the `Parallel` mode runs on the rayon
//! pool; without it every mode falls back to a plain sequential loop. Results
//! never depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is actually available in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(mode: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..len`, preserving order.
pub fn map_range<U, F>(mode: Execution, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..len).map(f).collect()
}

/// Sorts a float slice (NaNs last).
pub fn sort_floats(mode: Execution, v: &mut [f64]) {
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        v.par_sort_unstable_by(|a, b| a.total_cmp(b));
        return;
    }
    let _ = mode;
    v.sort_unstable_by(|a, b| a.total_cmp(b));
}
