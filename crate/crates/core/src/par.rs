//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it (or with [`Parallelism::Sequential`]) the same
//! closures run in order on the calling thread. Results are always collected
//! in index order so reductions stay deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether work will actually fan out (false when the feature is off).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<T, F>(n: usize, mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(items: &[I], mode: Parallelism, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Arg-max of `score` over `0..n` with lowest-index tie-breaking. NaN scores
/// are never selected. Returns `None` for an empty range.
///
/// The parallel path splits the range into contiguous chunks, reduces each
/// chunk in order, and merges chunk winners in order, so the result is
/// identical to the sequential scan.
pub fn argmax_range<F>(n: usize, mode: Parallelism, score: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let scan = |lo: usize, hi: usize| {
        let mut best: Option<(usize, f64)> = None;
        for i in lo..hi {
            let v = score(i);
            if v.is_nan() {
                continue;
            }
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((i, v)),
            }
        }
        best
    };

    #[cfg(feature = "parallel")]
    if mode.is_parallel() && n > 4096 {
        let chunk = n.div_ceil(rayon::current_num_threads() * 8).max(1024);
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        let winners: Vec<Option<(usize, f64)>> = starts
            .par_iter()
            .map(|&lo| scan(lo, (lo + chunk).min(n)))
            .collect();
        return winners.into_iter().fold(None, better);
    }
    let _ = mode;
    scan(0, n)
}

#[cfg(feature = "parallel")]
fn better(a: Option<(usize, f64)>, b: Option<(usize, f64)>) -> Option<(usize, f64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((ia, va)), Some((ib, vb))) => {
            if vb > va || (vb == va && ib < ia) {
                Some((ib, vb))
            } else {
                Some((ia, va))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low_in_both_modes() {
        let vals: Vec<f64> = (0..20_000).map(|i| ((i % 977) as f64).min(900.0)).collect();
        let seq = argmax_range(vals.len(), Parallelism::Sequential, |i| vals[i]);
        let par = argmax_range(vals.len(), Parallelism::Parallel, |i| vals[i]);
        assert_eq!(seq, Some((900, 900.0)));
        assert_eq!(seq, par);
    }

    #[test]
    fn argmax_skips_nan_and_handles_empty() {
        assert_eq!(argmax_range(0, Parallelism::Sequential, |_| 1.0), None);
        let v = [f64::NAN, 2.0, 2.0];
        assert_eq!(argmax_range(3, Parallelism::Sequential, |i| v[i]), Some((1, 2.0)));
    }

    #[test]
    fn map_preserves_order() {
        let a = map_range(100, Parallelism::Parallel, |i| i * 2);
        assert_eq!(a, (0..100).map(|i| i * 2).collect::<Vec<_>>());
        let b = map_slice(&a, Parallelism::Sequential, |x| x + 1);
        assert_eq!(b[99], 199);
    }
}
