//! Row-parallel execution helpers.
//!
//! With the `parallel` feature enabled, large row loops are spread over the
//! rayon pool. Each output row is still produced by one serial reduction, so
//! parallel and serial runs give bit-identical results.

/// How a kernel distributes its rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Always run on the calling thread.
    Serial,
    /// Use the rayon pool when the feature is on and the work is large enough.
    #[default]
    Auto,
}

/// Below this many scalar multiply-adds a kernel stays serial.
pub const MIN_PARALLEL_WORK: usize = 1 << 15;

/// Calls `f(row_index, row)` for every `cols`-wide row of `out`.
pub fn for_each_row<F>(exec: Exec, out: &mut [f64], cols: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if cols == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec == Exec::Auto && work >= MIN_PARALLEL_WORK && rayon::current_num_threads() > 1 {
        use rayon::prelude::*;
        out.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = (exec, work);
    out.chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Order-preserving map over independent jobs (sweep cells, seeds).
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Auto && items.len() > 1 && rayon::current_num_threads() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Caps the global pool at `threads`. Only the first call has any effect;
/// later calls (or builds without the feature) are ignored.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Number of worker threads currently available.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
