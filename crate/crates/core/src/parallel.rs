//! Index-ordered parallel maps. Results never depend on the worker count:
//! work is split into fixed chunks and every reduction happens in index
//! order on the calling thread.

use alloc::vec::Vec;
use core::ops::Range;

/// Evaluates `f` at `0..n`, returning the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Splits `0..n` into consecutive chunks of `chunk` indices and evaluates `f`
/// on each, returning per-chunk results in order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_indexed(count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
}
