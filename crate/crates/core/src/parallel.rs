//! Thread-count control. `NSTEER_THREADS=0` (or 1) runs everything on the
//! calling thread; any larger value builds a dedicated rayon pool. Results are
//! always gathered in index order, so the thread count never changes a value.

use std::sync::OnceLock;

use rayon::prelude::*;

pub const THREADS_ENV: &str = "NSTEER_THREADS";

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

fn build_pool(threads: Option<usize>) -> Option<rayon::ThreadPool> {
    match threads {
        Some(0) | Some(1) => None,
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
        None => rayon::ThreadPoolBuilder::new().build().ok(),
    }
}

/// Fixes the worker count for the rest of the process. Returns `false` when
/// the pool was already initialised.
pub fn init_threads(threads: Option<usize>) -> bool {
    let threads = threads.or_else(threads_from_env);
    POOL.set(build_pool(threads)).is_ok()
}

fn pool() -> Option<&'static rayon::ThreadPool> {
    POOL.get_or_init(|| build_pool(threads_from_env())).as_ref()
}

/// Applies `f` to `0..n` and returns the results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match pool() {
        Some(p) if n > 1 => p.install(|| (0..n).into_par_iter().map(&f).collect()),
        _ => (0..n).map(f).collect(),
    }
}
