//! Data-parallel primitives with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers run on rayon; without it
//! they degrade to plain loops with identical results. Reductions use fixed
//! chunk boundaries followed by an ordered combine, so results are bit-stable
//! regardless of thread count or scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic two-stage reductions.
const CHUNK: usize = 8192;

/// Ordered map over `0..n`; the output index matches the input index.
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Elementwise `out[i] = f(i, out[i])` over fixed chunks.
pub fn par_apply<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = f(base + i, *v);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i, *v);
        }
    }
}

/// Deterministic dot product: per-chunk partial sums combined in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            a.par_chunks(CHUNK)
                .zip(b.par_chunks(CHUNK))
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum())
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            a.chunks(CHUNK)
                .zip(b.chunks(CHUNK))
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum())
                .collect()
        }
    };
    partials.iter().sum()
}

/// Deterministic squared l2 norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Deterministic sum.
pub fn sum(a: &[f64]) -> f64 {
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            a.par_chunks(CHUNK).map(|c| c.iter().sum()).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            a.chunks(CHUNK).map(|c| c.iter().sum()).collect()
        }
    };
    partials.iter().sum()
}

/// `y += alpha * x`
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    assert_eq!(y.len(), x.len());
    par_apply(y, |i, v| v + alpha * x[i]);
}

/// `y = x + beta * y`
pub fn xpby(y: &mut [f64], x: &[f64], beta: f64) {
    assert_eq!(y.len(), x.len());
    par_apply(y, |i, v| x[i] + beta * v);
}

/// Run `f` on a rayon pool with `threads` workers (ignored without the
/// `parallel` feature, where execution is single-threaded anyway).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_sequential_reference() {
        let n = 3 * CHUNK + 17;
        let a: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let reference: f64 = {
            let partials: Vec<f64> = a
                .chunks(CHUNK)
                .zip(b.chunks(CHUNK))
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum())
                .collect();
            partials.iter().sum()
        };
        assert_eq!(dot(&a, &b), reference);
    }

    #[test]
    fn dot_is_thread_count_invariant() {
        let n = 5 * CHUNK + 3;
        let a: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        let d1 = with_threads(1, || dot(&a, &b));
        let d4 = with_threads(4, || dot(&a, &b));
        assert_eq!(d1.to_bits(), d4.to_bits());
    }
}
