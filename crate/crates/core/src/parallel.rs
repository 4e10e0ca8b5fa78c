//! Data-parallel map with a sequential fallback.
//!
//! Results are collected in input order, so reductions downstream are
//! bit-identical regardless of thread count or whether the `parallel`
//! feature is enabled at all.

#[cfg(feature = "parallel")]
pub(crate) fn par_map_idx<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map_idx<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..count).map(f).collect()
}
