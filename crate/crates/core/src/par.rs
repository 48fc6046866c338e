// Order-preserving map over an index range, parallel when the feature is on.
// Results are collected by index, so reductions over the output are deterministic.

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(len: usize, min_len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if len < min_len || rayon::current_num_threads() == 1 {
        (0..len).map(f).collect()
    } else {
        (0..len).into_par_iter().with_min_len(min_len / 4 + 1).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(len: usize, _min_len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}
