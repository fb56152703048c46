//! Order-preserving indexed map, parallel when the `rayon` feature is on.
//!
//! Results are always collected in index order and any floating-point
//! reduction over them happens serially afterwards, so output is bit-identical
//! with and without the feature.

use alloc::vec::Vec;

#[cfg(feature = "rayon")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "rayon"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
