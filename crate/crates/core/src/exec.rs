//! Execution strategy for the data-parallel inner loops (candidate
//! encoding, per-pair gradients, rollouts, best-match scans).
//!
//! With the `parallel` feature the work is spread over a rayon pool;
//! without it every strategy runs sequentially. Results are always
//! returned in index order, so outputs are identical either way.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone, Default)]
pub enum Exec {
    #[default]
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel(Option<Arc<rayon::ThreadPool>>),
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exec::Sequential => write!(f, "Sequential"),
            #[cfg(feature = "parallel")]
            Exec::Parallel(pool) => match pool {
                Some(p) => write!(f, "Parallel({} threads)", p.current_num_threads()),
                None => write!(f, "Parallel(global)"),
            },
        }
    }
}

impl Exec {
    /// Builds a strategy bounded to `workers` threads. `workers == 1` is
    /// sequential, `workers == 0` uses the global pool.
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            return Exec::Sequential;
        }
        Self::parallel_impl(workers)
    }

    /// Parallel over the global pool when available.
    pub fn parallel() -> Self {
        Self::parallel_impl(0)
    }

    #[cfg(feature = "parallel")]
    fn parallel_impl(workers: usize) -> Self {
        if workers == 0 {
            return Exec::Parallel(None);
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => Exec::Parallel(Some(Arc::new(pool))),
            Err(e) => {
                log::warn!("could not build a {workers}-thread pool ({e}); running sequentially");
                Exec::Sequential
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn parallel_impl(_workers: usize) -> Self {
        Exec::Sequential
    }

    pub fn is_parallel(&self) -> bool {
        !matches!(self, Exec::Sequential)
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel(pool) => {
                use rayon::prelude::*;
                let run = || (0..n).into_par_iter().map(&f).collect();
                match pool {
                    Some(p) => p.install(run),
                    None => run(),
                }
            }
        }
    }

    /// Like [`Exec::map`] but short-circuits on the first error in index order.
    pub fn try_map<T, E, F>(&self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
