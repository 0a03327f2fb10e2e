//! Execution width abstraction.
//!
//! Per-query and per-item work is embarrassingly parallel. The core crate has
//! no threads of its own; callers pass an [`Executor`] that maps an index
//! range to results. Implementations must return results in index order so
//! that outputs do not depend on the number of workers.

use alloc::vec::Vec;

/// Maps `0..n` through a function, returning results in index order.
pub trait Executor: Sync {
    /// Evaluates `f(i)` for every `i` in `0..n`; `out[i] == f(i)`.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
