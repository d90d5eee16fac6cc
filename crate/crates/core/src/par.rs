//! Data-parallel helpers.
//!
//! Every parallel loop in the workspace goes through [`map_indexed`] so that
//! results are collected by index and never depend on scheduling. With the
//! `parallel` feature disabled, [`Schedule::Parallel`] runs sequentially.

/// How an indexed map is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Sequential,
    #[default]
    Parallel,
}

impl Schedule {
    /// True when this schedule actually fans out over threads in this build.
    pub fn is_threaded(self) -> bool {
        cfg!(feature = "parallel") && self == Schedule::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, schedule: Schedule, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if schedule == Schedule::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = schedule;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] over the items of a slice.
pub fn map_slice<I, T, F>(items: &[I], schedule: Schedule, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indexed(items.len(), schedule, |i| f(&items[i]))
}

/// Sets the global worker count. Has no effect without the `parallel`
/// feature; fails if the global pool was already initialized.
pub fn set_jobs(jobs: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok(())
    }
}

/// Derives an independent 64-bit seed for task `index` of a job seeded with
/// `seed` (SplitMix64 finalizer over both words).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}
