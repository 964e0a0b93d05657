//! Chunked execution of Monte Carlo work.
//!
//! Every sampler splits its workload into chunks of a fixed size. Chunk `i`
//! draws from substream `i` of the caller's [`RandomStream`](crate::RandomStream)
//! and results are concatenated in chunk order, so the output is a function of
//! the seed alone. [`Execution::Parallel`] maps chunks on the rayon pool when
//! the `parallel` feature is enabled and degrades to the sequential path
//! otherwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when chunks will actually run concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Number of chunks of size `chunk` needed to cover `total` items.
pub(crate) fn chunk_count(total: usize, chunk: usize) -> usize {
    total.div_ceil(chunk)
}

/// Length of chunk `index` when `total` items are split into chunks of `chunk`.
pub(crate) fn chunk_len(total: usize, chunk: usize, index: usize) -> usize {
    chunk.min(total - index * chunk)
}

/// Applies `f` to every chunk index and returns the results in index order.
pub(crate) fn map_chunks<T, F>(exec: Execution, n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return (0..n_chunks).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n_chunks).map(f).collect()
}

/// Runs `f` with at most `workers` threads. `None` keeps the global pool.
///
/// Without the `parallel` feature this simply calls `f`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => return pool.install(f),
            Err(_) => return f(),
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_total() {
        let total = 10_001;
        let n = chunk_count(total, 1000);
        assert_eq!(n, 11);
        let sum: usize = (0..n).map(|i| chunk_len(total, 1000, i)).sum();
        assert_eq!(sum, total);
        assert_eq!(chunk_len(total, 1000, 10), 1);
    }

    #[test]
    fn map_chunks_preserves_order() {
        let seq = map_chunks(Execution::Sequential, 100, |i| i * i);
        let par = map_chunks(Execution::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let one = with_workers(Some(1), || map_chunks(Execution::Parallel, 50, |i| i + 1));
        let four = with_workers(Some(4), || map_chunks(Execution::Parallel, 50, |i| i + 1));
        assert_eq!(one, four);
    }
}
