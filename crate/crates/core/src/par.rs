//! Data-parallel map over index ranges: rayon when the `parallel` feature is
//! on, a plain loop otherwise. Results always come back in index order, so
//! callers see identical output for any worker count.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Workers(n),
        }
    }
}

/// `(0..n).map(f).collect()`, possibly spread across threads.
pub fn map_range<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok((0..n).map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            Ok((0..n).into_par_iter().map(f).collect())
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(k) => {
            use rayon::prelude::*;
            if k == 0 {
                return Err(Error::Invalid("worker count must be positive".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => Ok((0..n).map(f).collect()),
        #[cfg(not(feature = "parallel"))]
        Execution::Workers(k) => {
            if k == 0 {
                return Err(Error::Invalid("worker count must be positive".into()));
            }
            Ok((0..n).map(f).collect())
        }
    }
}

/// Like [`map_range`] for fallible work; the first error in index order wins.
pub fn try_map_range<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_range(n, exec, f)?.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_range(1000, Execution::Sequential, |i| i * i).unwrap();
        let par = map_range(1000, Execution::Workers(4), |i| i * i).unwrap();
        assert_eq!(seq, par);
        assert!(map_range(3, Execution::Workers(0), |i| i).is_err());
    }

    #[test]
    fn first_error_in_order() {
        let r =
            try_map_range(
                10,
                Execution::Parallel,
                |i| {
                    if i >= 3 {
                        Err(Error::Invalid(format!("{i}")))
                    } else {
                        Ok(i)
                    }
                },
            );
        assert_eq!(r, Err(Error::Invalid("3".into())));
    }
}
