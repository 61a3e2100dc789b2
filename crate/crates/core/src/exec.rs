//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature (default) the index-parallel helpers run on the
//! rayon pool; without it, or with [`Execution::Sequential`], they run as plain
//! iterators. Results are identical either way because every index owns its own
//! random stream and reductions are over integers or in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Maps `f` over `0..n`, preserving index order in the output.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps every element of a slice, preserving order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Counts the indices in `0..n` for which `pred` holds.
    pub fn count<F>(self, n: usize, pred: F) -> u64
    where
        F: Fn(usize) -> bool + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().filter(|&i| pred(i)).count() as u64,
            _ => (0..n).filter(|&i| pred(i)).count() as u64,
        }
    }

    /// Per-bucket tallies: `f(i)` yields `(bucket, hit)` and the result holds,
    /// for each bucket, the number of indices and the number of hits.
    pub fn tally<F>(self, n: usize, buckets: usize, f: F) -> Vec<(u64, u64)>
    where
        F: Fn(usize) -> (usize, bool) + Sync + Send,
    {
        let add = |mut acc: Vec<(u64, u64)>, (b, hit): (usize, bool)| {
            acc[b].0 += 1;
            acc[b].1 += u64::from(hit);
            acc
        };
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n)
                .into_par_iter()
                .map(f)
                .fold(|| vec![(0, 0); buckets], add)
                .reduce(
                    || vec![(0, 0); buckets],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            x.0 += y.0;
                            x.1 += y.1;
                        }
                        a
                    },
                ),
            _ => (0..n).map(f).fold(vec![(0, 0); buckets], add),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_default_agree() {
        let f = |i: usize| (i % 3, i % 7 == 0);
        let a = Execution::Sequential.tally(1000, 3, f);
        let b = Execution::default().tally(1000, 3, f);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|x| x.0).sum::<u64>(), 1000);
        assert_eq!(
            Execution::Sequential.map(10, |i| i * i),
            Execution::default().map(10, |i| i * i)
        );
        assert_eq!(Execution::default().count(100, |i| i % 2 == 0), 50);
    }
}
