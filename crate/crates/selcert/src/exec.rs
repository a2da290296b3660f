use rayon::prelude::*;
use selcert_core::Executor;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "SELCERT_THREADS";

/// Rayon-backed executor; collects in index order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            b = b.num_threads(t);
        }
        let pool = b
            .build()
            .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Honors `SELCERT_THREADS` when set.
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&t| t > 0)
                    .ok_or_else(|| {
                        Error::Usage(format!(
                            "{THREADS_ENV} must be a positive integer, got `{v}`"
                        ))
                    })?,
            ),
            Err(_) => None,
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(f).collect())
    }
}
