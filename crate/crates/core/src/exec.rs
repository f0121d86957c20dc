//! Execution strategy for data-parallel loops.
//!
//! With the `parallel` feature, [`Execution::Parallel`] fans work out on the
//! rayon pool; without it every path runs sequentially. Reductions use a
//! fixed pairwise tree, so both strategies give bit-identical results.

/// Blocks at or below this many components are summed left to right.
const LEAF: usize = 32;
/// Subtrees larger than this are split across threads.
const SPLIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is actually available in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Sums `count` vectors of length `dim`, where `fill(i, out)` adds item `i`
/// into `out`. The addition tree depends only on `count`.
pub(crate) fn pairwise_sum<F>(count: usize, dim: usize, exec: Execution, fill: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; dim];
    if count > 0 {
        sum_range(0, count, dim, exec, fill, &mut out);
    }
    out
}

fn sum_range<F>(lo: usize, hi: usize, dim: usize, exec: Execution, fill: &F, out: &mut [f64])
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let len = hi - lo;
    if len <= LEAF {
        for i in lo..hi {
            fill(i, out);
        }
        return;
    }
    let mid = lo + len / 2;
    let mut right = vec![0.0; dim];
    if len > SPLIT && exec.is_parallel() {
        join(
            || sum_range(lo, mid, dim, exec, fill, out),
            || sum_range(mid, hi, dim, exec, fill, &mut right),
        );
    } else {
        sum_range(lo, mid, dim, exec, fill, out);
        sum_range(mid, hi, dim, exec, fill, &mut right);
    }
    for (o, r) in out.iter_mut().zip(&right) {
        *o += r;
    }
}

/// Scalar analogue of [`pairwise_sum`].
pub(crate) fn pairwise_sum_scalar<F>(count: usize, exec: Execution, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    fn go<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, exec: Execution, f: &F) -> f64 {
        let len = hi - lo;
        if len <= LEAF {
            return (lo..hi).map(f).fold(0.0, |acc, v| acc + v);
        }
        let mid = lo + len / 2;
        let (a, b) = if len > SPLIT && exec.is_parallel() {
            join(|| go(lo, mid, exec, f), || go(mid, hi, exec, f))
        } else {
            (go(lo, mid, exec, f), go(mid, hi, exec, f))
        };
        a + b
    }
    if count == 0 {
        0.0
    } else {
        go(0, count, exec, f)
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    (a(), b())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_bitwise() {
        let f = |i: usize, out: &mut [f64]| {
            for (j, o) in out.iter_mut().enumerate() {
                *o += ((i * 7 + j) as f64).sin() * 1e3 + 1e-7 * i as f64;
            }
        };
        for count in [1, 31, 33, 1000, 4097] {
            let a = pairwise_sum(count, 3, Execution::Sequential, &f);
            let b = pairwise_sum(count, 3, Execution::Parallel, &f);
            assert_eq!(a, b);
        }
        let g = |i: usize| (i as f64).sqrt();
        assert_eq!(
            pairwise_sum_scalar(5000, Execution::Sequential, &g),
            pairwise_sum_scalar(5000, Execution::Parallel, &g)
        );
    }

    #[test]
    fn sums_correctly() {
        let s = pairwise_sum_scalar(100, Execution::Sequential, &|i| i as f64);
        assert_eq!(s, 4950.0);
        let v = pairwise_sum(100, 1, Execution::Parallel, &|i, o: &mut [f64]| {
            o[0] += i as f64
        });
        assert_eq!(v, vec![4950.0]);
    }
}
