//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the `map_*` functions fan out over
//! rayon; without it they degrade to the sequential loop. The `*_seq`
//! variants are always sequential regardless of features, so callers can
//! check that a parallel run is bit-identical to the sequential one and the
//! bench suite can compare the two on the same build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
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

/// Sequential twin of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over mutable items with their index, preserving order.
pub fn map_indexed_mut<T, U, F>(items: &mut [T], f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(usize, &mut T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter_mut()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Sequential twin of [`map_indexed_mut`].
pub fn map_indexed_mut_seq<T, U, F>(items: &mut [T], f: F) -> Vec<U>
where
    F: Fn(usize, &mut T) -> U,
{
    items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Fold chunk-local accumulators and merge them in chunk order. The merge
/// order is fixed, so commutative-but-not-associative float sums still come
/// out identical between parallel and sequential runs as long as `chunk`
/// is the same.
pub fn chunked_fold<T, A, F, M>(items: &[T], chunk: usize, fold: F, merge: M, zero: A) -> A
where
    T: Sync,
    A: Send,
    F: Fn(&[T]) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    assert!(chunk > 0, "chunk size must be positive");
    #[cfg(feature = "parallel")]
    let partials: Vec<A> = items.par_chunks(chunk).map(|c| fold(c)).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<A> = items.chunks(chunk).map(|c| fold(c)).collect();
    partials.into_iter().fold(zero, merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_matches_seq() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_collect(&xs, |x| x * x);
        let b = map_collect_seq(&xs, |x| x * x);
        assert_eq!(a, b);
    }

    #[test]
    fn chunked_fold_is_order_stable() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let sum = |c: &[f64]| c.iter().sum::<f64>();
        let a = chunked_fold(&xs, 128, sum, |x, y| x + y, 0.0);
        let b: f64 = xs
            .chunks(128)
            .map(|c| c.iter().sum::<f64>())
            .fold(0.0, |x, y| x + y);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
