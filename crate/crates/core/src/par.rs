//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool; without it every call runs sequentially. Results are
//! always assembled in index order, so output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel, in index order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Folds `0..n` into per-chunk accumulators and merges them with `merge`.
/// `merge` must be associative and commutative for results to be
/// schedule-independent.
pub fn fold_range<A, Init, Fold, Merge>(
    exec: Execution,
    n: u64,
    chunk: u64,
    init: Init,
    fold: Fold,
    merge: Merge,
) -> A
where
    A: Send,
    Init: Fn() -> A + Sync + Send,
    Fold: Fn(&mut A, u64) + Sync + Send,
    Merge: Fn(A, A) -> A + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let run_chunk = |c: u64| {
        let mut acc = init();
        for i in c * chunk..((c + 1) * chunk).min(n) {
            fold(&mut acc, i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n_chunks)
            .into_par_iter()
            .map(run_chunk)
            .reduce(&init, &merge);
    }
    let _ = exec;
    (0..n_chunks).map(run_chunk).fold(init(), merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let a = map_range(Execution::Sequential, 100, |i| i * i);
        let b = map_range(Execution::Parallel, 100, |i| i * i);
        assert_eq!(a, b);
        let s = fold_range(Execution::Sequential, 1000, 7, || 0u64, |a, i| *a += i, |a, b| a + b);
        let p = fold_range(Execution::Parallel, 1000, 7, || 0u64, |a, i| *a += i, |a, b| a + b);
        assert_eq!(s, 499_500);
        assert_eq!(p, s);
    }
}
