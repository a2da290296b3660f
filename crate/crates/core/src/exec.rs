//! Index-ordered work distribution.
//!
//! Simulation trials and bootstrap resamples are independent given their
//! index. Algorithms in this crate hand the per-index closure to an
//! [`Executor`]; results always come back ordered by index, so the
//! choice of executor never changes the output.

use alloc::vec::Vec;

pub trait Executor {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every index on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
