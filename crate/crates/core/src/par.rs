//! Index-parallel map used by the batch kernels.
//!
//! With the `parallel` feature (default) the work is spread over the rayon
//! pool; without it the same closures run in order on the calling thread.
//! Results are always returned in index order, so outputs are identical in
//! both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Fallible variant of [`map`]; returns the first error by index.
pub fn try_map<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map(len, f).into_iter().collect()
}

/// Maximum of `f` over `0..len`, `0.0` for an empty range.
pub fn max_f64<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map(len, f).into_iter().fold(0.0, f64::max)
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
