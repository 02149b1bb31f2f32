//! Trial-level data parallelism.
//!
//! With the `parallel` feature (default) trials are spread over the current
//! rayon pool; without it, or inside [`sequential`], they run in a plain
//! loop. Results always come back in trial-index order, so callers that
//! reduce by counting get identical answers either way.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with trial maps on this thread forced to the sequential path.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

fn forced_sequential() -> bool {
    FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Sequential map over `0..trials`.
pub fn map_trials_seq<T, F>(trials: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..trials).map(f).collect()
}

/// Map over `0..trials`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if forced_sequential() {
        return map_trials_seq(trials, f);
    }
    (0..trials).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let _ = forced_sequential();
    map_trials_seq(trials, f)
}

/// Runs `f` on a dedicated pool with `workers` threads (0 = rayon default).
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}
