//! Deterministic chunked execution.
//!
//! Work is split into fixed-size chunks, each chunk gets its own random
//! stream derived from `(seed, chunk index)`, and partial results are merged
//! in chunk order. The merged value is therefore a fixed function of the seed
//! and chunk size: running with [`Execution::Parallel`] or
//! [`Execution::Sequential`] yields bit-identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Items per chunk for Monte-Carlo style loops.
pub const CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; otherwise falls
    /// back to sequential execution.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Random stream for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Chunk boundaries covering `0..n`.
pub fn chunks(n: usize, size: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(size))
        .map(|c| (c * size, ((c + 1) * size).min(n)))
        .collect()
}

/// Maps every chunk `(index, start, end)` of `0..n` and returns the results
/// in chunk order.
pub fn map_chunks<T, F>(exec: Execution, n: usize, size: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, usize) -> T + Sync + Send,
{
    let bounds = chunks(n, size);
    if exec.is_parallel() {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return bounds
                .into_par_iter()
                .enumerate()
                .map(|(i, (s, e))| f(i, s, e))
                .collect();
        }
    }
    bounds
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| f(i, s, e))
        .collect()
}

/// Maps each item of a slice; result order equals input order.
pub fn map_items<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    if exec.is_parallel() {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Runs `f` inside a rayon pool with `threads` workers when requested.
pub fn with_threads<R: Send, F: FnOnce() -> R + Send>(threads: Option<usize>, f: F) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunk_bounds_cover_range() {
        assert_eq!(chunks(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert!(chunks(0, 4).is_empty());
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let run = |exec| {
            map_chunks(exec, 50_000, 1000, |i, s, e| {
                let mut rng = chunk_rng(11, i as u64);
                (s..e).map(|_| rng.random::<f64>()).sum::<f64>()
            })
            .into_iter()
            .sum::<f64>()
        };
        assert_eq!(run(Execution::Sequential).to_bits(), run(Execution::Parallel).to_bits());
    }

    #[test]
    fn distinct_chunks_get_distinct_streams() {
        let a: u64 = chunk_rng(1, 0).random();
        let b: u64 = chunk_rng(1, 1).random();
        assert_ne!(a, b);
    }
}
