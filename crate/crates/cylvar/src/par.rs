//! Deterministic data-parallel primitives. Work is split into fixed-size
//! chunks whose partial results are combined in chunk order, so every helper
//! returns bit-identical values with and without the `parallel` feature (and
//! regardless of thread count). Benches flip the runtime override to compare
//! the two execution modes in a single binary.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

/// Fixed chunk length for all reductions; part of the determinism contract.
pub const CHUNK: usize = 2048;

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force sequential execution at runtime even when the `parallel` feature is
/// compiled in. Intended for benchmarks and determinism tests.
pub fn set_sequential_override(on: bool) {
    SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn sequential_override() -> bool {
    SEQUENTIAL.load(Ordering::Relaxed)
}

/// True when this call will actually fan out to worker threads.
pub fn parallel_active() -> bool {
    cfg!(feature = "parallel") && !sequential_override()
}

fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(n.div_ceil(CHUNK).max(1));
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        out.push(start..end);
        start = end;
    }
    out
}

/// Apply `f` to each fixed-size chunk of `0..n`, returning per-chunk results
/// in chunk order.
pub fn map_chunks<A, F>(n: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<usize>) -> A + Sync + Send,
{
    let ranges = chunk_ranges(n);
    #[cfg(feature = "parallel")]
    if !sequential_override() {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    ranges.into_iter().map(f).collect()
}

/// Apply `f` to each index of `0..n`, one task per index, results in index
/// order. For coarse-grained work such as independent solves.
pub fn map_items<A, F>(n: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(usize) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !sequential_override() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Sum `f(i)` over `0..n` with a fixed reduction order: within each chunk
/// left to right, then across chunks left to right.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(n, |r| {
        let mut acc = 0.0;
        for i in r {
            acc += f(i);
        }
        acc
    })
    .into_iter()
    .fold(0.0, |a, b| a + b)
}

/// Maximum of `f(i)` over `0..n` (`-inf` for `n == 0`).
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(n, |r| {
        let mut acc = f64::NEG_INFINITY;
        for i in r {
            acc = acc.max(f(i));
        }
        acc
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Fill `out[i] = f(i)` for every index, chunked across threads.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !sequential_override() {
        use rayon::prelude::*;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + k);
            }
        });
        return;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}
