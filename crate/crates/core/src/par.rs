//! Execution strategy for the data-parallel loops.
//!
//! Every hot loop in the crate (per-source Dijkstra, kernel assembly, the
//! normalizations, the Householder updates) is written once over an index
//! range and dispatched here. With the `parallel` feature the work is
//! spread over the rayon pool; without it, or with [`Execution::Sequential`],
//! the same closure runs in a plain loop. Results never depend on the choice.

use ndarray::{Array2, ArrayViewMut1, Axis};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential execution when the crate is built without
    /// the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Calls `f(i, row_i)` for every row of `m`.
pub fn for_each_row<F>(exec: Execution, m: &mut Array2<f64>, f: F)
where
    F: Fn(usize, ArrayViewMut1<'_, f64>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        m.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    for (i, row) in m.axis_iter_mut(Axis(0)).enumerate() {
        f(i, row);
    }
}

/// Calls `f(i, chunk_i)` for consecutive chunks of `len` elements.
pub fn for_each_chunk<F>(exec: Execution, data: &mut [f64], len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    for (i, c) in data.chunks_mut(len).enumerate() {
        f(i, c);
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
