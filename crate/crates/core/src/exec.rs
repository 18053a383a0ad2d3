//! Independent-job execution with a sequential path and an optional rayon
//! pool.

/// Applies `f` to every item and returns the results in input order.
///
/// With `jobs <= 1`, or when the `parallel` feature is disabled, items run
/// one after another on the calling thread. Output order and content do
/// not depend on `jobs` as long as `f` is deterministic per item.
pub fn map_jobs<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 && items.len() > 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => {
                return pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect());
            }
            Err(_) => {
                // fall through to the sequential path
            }
        }
    }
    let _ = jobs;
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Number of hardware threads, at least one.
pub fn available_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Expands a root seed into a per-job seed (SplitMix64 over the parts).
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    let mut state = root;
    let mut out = splitmix(&mut state);
    for &p in parts {
        state ^= p.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        out ^= splitmix(&mut state);
        out = out.rotate_left(17);
    }
    out
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
