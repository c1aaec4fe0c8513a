use rayon::prelude::*;

use crate::error::{Error, Result};

/// Fixed-size worker pool for independent per-cell evaluations.
///
/// Results are collected by index, so output order never depends on the
/// schedule.
pub struct Workers {
    count: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        let pool = if count > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {count} workers: {e}")))?,
            )
        } else {
            None
        };
        Ok(Workers { count, pool })
    }

    pub fn single() -> Self {
        Workers {
            count: 1,
            pool: None,
        }
    }

    /// One worker per available CPU.
    pub fn available() -> Self {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        Workers::new(n).unwrap_or_else(|_| Workers::single())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("count", &self.count).finish()
    }
}
