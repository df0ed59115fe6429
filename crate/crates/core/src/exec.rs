//! Per-particle loops, parallel when the `parallel` feature is on.

use crate::config::Execution;

/// Runs `f(scratch, n, particle_out, log_weight)` for every particle.
///
/// Each call touches only its own slots, so the result is independent of the
/// execution mode and of the number of worker threads.
pub(crate) fn for_each_particle<S, I, F>(
    exec: Execution,
    out: &mut [f64],
    dim: usize,
    log_weights: &mut [f64],
    init: I,
    f: F,
) where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [f64], &mut f64) + Sync + Send,
{
    debug_assert_eq!(out.len(), dim * log_weights.len());
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            out.par_chunks_mut(dim)
                .zip(log_weights.par_iter_mut())
                .enumerate()
                .with_min_len(64)
                .for_each_init(init, |s, (n, (o, w))| f(s, n, o, w));
        }
        _ => {
            let mut s = init();
            for (n, (o, w)) in out.chunks_mut(dim).zip(log_weights.iter_mut()).enumerate() {
                f(&mut s, n, o, w);
            }
        }
    }
}

/// Maps `0..count` in order, in parallel when allowed.
pub fn map_indexed<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}
