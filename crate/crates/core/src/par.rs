//! Thin switch between the rayon data-parallel backend and a sequential
//! fallback (feature `parallel`).
//!
//! Every helper splits work into independent chunks whose results do not
//! depend on scheduling, so outputs are bitwise identical with and without
//! the feature and for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(chunk_index, chunk)` over consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Collects `f(i)` for `i in 0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Deterministic sum of `f(i)` over `0..n`: partial sums over fixed blocks are
/// combined sequentially, so the rounding pattern never depends on threads.
pub fn sum_range<F>(n: usize, f: F) -> num_complex::Complex64
where
    F: Fn(usize) -> num_complex::Complex64 + Sync + Send,
{
    const BLOCK: usize = 4096;
    let blocks = n.div_ceil(BLOCK);
    let partial = map_range(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(&f).sum::<num_complex::Complex64>()
    });
    partial.into_iter().sum()
}

/// Whether the parallel backend is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
