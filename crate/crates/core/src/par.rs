//! Data-parallel helpers. With the `parallel` feature the maps run on the
//! rayon pool; otherwise (or with [`Execution::Sequential`]) they run in
//! order on the calling thread. Results are always returned in input order,
//! and reductions use a fixed pairwise tree, so output does not depend on
//! the execution mode.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Parallel when compiled with the `parallel` feature.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Configures the global pool size. Returns false if a pool already exists
/// or the crate was built without the `parallel` feature.
pub fn set_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

/// Pairwise sum of equally sized vectors in a fixed tree order.
pub fn pairwise_sum(mut parts: Vec<Vec<Complex64>>) -> Vec<Complex64> {
    if parts.is_empty() {
        return Vec::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += *y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let a = map(Execution::Sequential, &xs, |x| x.sin());
        let b = map(Execution::Parallel, &xs, |x| x.sin());
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_is_order_fixed() {
        let parts: Vec<Vec<Complex64>> = (0..7).map(|i| vec![Complex64::new(i as f64, 1.0); 3]).collect();
        let s = pairwise_sum(parts);
        assert_eq!(s, vec![Complex64::new(21.0, 7.0); 3]);
    }
}
