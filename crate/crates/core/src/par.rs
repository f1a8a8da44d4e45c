//! Data-parallel helpers.
//!
//! Every parallel site in the crate maps independent indices into an ordered
//! buffer and reduces sequentially afterwards, so outputs do not depend on
//! the thread count or on rayon's work stealing.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f` into a `Vec`, in parallel when enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Always-sequential variant of [`map_indexed`]; the benchmark baseline.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Run `f` inside a single-threaded rayon pool (or directly when the
/// `parallel` feature is off). Used by benches to measure the sequential
/// code path of parallel functions without rebuilding the crate.
pub fn run_single_threaded<R, F>(f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("failed to build single-thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_matches_sequential() {
        let f = |i: usize| (i as f64).sqrt() * 3.0 - 1.0;
        assert_eq!(map_indexed(1000, f), map_indexed_seq(1000, f));
    }

    #[test]
    fn single_threaded_runs() {
        let v = run_single_threaded(|| map_indexed(64, |i| i * i));
        assert_eq!(v[8], 64);
    }
}
