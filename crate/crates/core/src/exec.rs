//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work items are spread over the rayon
//! pool; without it, or under [`Execution::Sequential`], they run in order on
//! the calling thread. Results are always returned in index order so both
//! paths produce identical output.

/// Where independent work items run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

impl Execution {
    /// Parallel when the feature is on and there is enough work to split.
    pub fn default_for(items: u64) -> Self {
        if cfg!(feature = "parallel") && items >= 64 {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// `Parallel` for `threads > 1`, else `Sequential`.
    pub fn from_threads(threads: usize) -> Self {
        if threads > 1 {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Sizes the global pool. Has no effect once the pool exists or without the
/// `parallel` feature.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// `(0..n).map(f)` collected in index order.
pub fn map<T, F>(exec: Execution, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// `(0..n).any(f)`.
pub fn any<F>(exec: Execution, n: u64, f: F) -> bool
where
    F: Fn(u64) -> bool + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().any(f)
        }
        _ => (0..n).any(f),
    }
}
