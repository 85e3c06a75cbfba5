//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in input order, and [`sum_chunks`] always
//! reduces partial results in chunk order, so output does not depend on the
//! number of worker threads or on whether the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// Map `f` over a slice, collecting results in order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Run `f(index, out_chunk, in_chunk)` on matching fixed-size chunks of two buffers.
pub fn zip_chunks<F>(out: &mut [f64], out_len: usize, input: &[f64], in_len: usize, f: F)
where
    F: Fn(usize, &mut [f64], &[f64]) + Sync + Send,
{
    if out_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(out_len)
            .zip(input.par_chunks(in_len.max(1)))
            .enumerate()
            .for_each(|(i, (o, x))| f(i, o, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(out_len)
            .zip(input.chunks(in_len.max(1)))
            .enumerate()
            .for_each(|(i, (o, x))| f(i, o, x));
    }
}

/// Split `0..n` into chunks of `chunk` items, compute a partial vector per chunk
/// with `f`, and add the partials together in chunk order.
pub fn sum_chunks<F>(n: usize, chunk: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>) -> Vec<f64> + Sync + Send,
{
    let chunk = chunk.max(1);
    let ranges: Vec<_> = (0..n)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(n))
        .collect();
    let partials = map_slice(&ranges, |r| f(r.clone()));
    let mut total = vec![0.0; len];
    for p in partials {
        debug_assert_eq!(p.len(), len);
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Number of worker threads that the helpers above will use.
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn sum_chunks_matches_sequential_sum() {
        let xs: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let total = sum_chunks(xs.len(), 4, 1, |r| vec![xs[r].iter().sum()]);
        let mut expect = 0.0;
        for c in xs.chunks(4) {
            expect += c.iter().sum::<f64>();
        }
        assert_eq!(total[0].to_bits(), expect.to_bits());
    }
}
