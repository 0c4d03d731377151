//! rayon-backed helpers with a sequential fallback when the `parallel`
//! feature is off. Outputs are always collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_range<R, F>(range: std::ops::Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return range.into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return range.map(f).collect();
}

pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Sum with a fixed binary tree shape, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
        assert_eq!(pairwise_mean(&[]), 0.0);
    }

    #[test]
    fn maps_preserve_order() {
        assert_eq!(map_range(0..5, |i| i * 2), vec![0, 2, 4, 6, 8]);
        assert_eq!(map_slice(&[3, 1, 2], |&v| v + 1), vec![4, 2, 3]);
    }
}
