//! Execution strategy for the data-parallel loops in the crate.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the rayon global pool. Without it, every call falls back to a plain
//! sequential loop, so callers never need their own `cfg` branches.

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when this strategy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps fixed-size chunks of `items` and folds the partial results
    /// left-to-right with `merge`. Chunk order is preserved in both modes, so
    /// `merge(left, right)` always sees the earlier chunk on the left.
    pub fn map_chunks_reduce<T, U, F, M>(
        self,
        items: &[T],
        chunk_size: usize,
        map: F,
        merge: M,
    ) -> Option<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &[T]) -> U + Sync + Send,
        M: Fn(U, U) -> U + Sync + Send,
    {
        let chunk_size = chunk_size.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_chunks(chunk_size)
                .enumerate()
                .map(|(i, c)| map(i * chunk_size, c))
                .reduce_with(merge);
        }
        items
            .chunks(chunk_size)
            .enumerate()
            .map(|(i, c)| map(i * chunk_size, c))
            .reduce(merge)
    }

    /// Runs `f` inside a dedicated pool of `workers` threads (0 = default
    /// pool). Sequential execution ignores the worker count.
    pub fn install<R: Send>(self, workers: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && workers > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(f);
            }
        }
        let _ = workers;
        f()
    }
}
