pub mod bootstrap;
pub mod config;
pub mod covariance;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod predict;
pub mod special;
pub mod warp;

pub use error::{Error, Result};

/// `(0..n).map(f)`, spread over the rayon pool when it has more than one
/// thread. With one thread the calls stay on the caller, so nested parallel
/// loops inside `f` are submitted from outside the pool, which measured
/// about twice as fast as running them on the lone worker.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if rayon::current_num_threads() > 1 {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}
