//! Execution strategy for the data-parallel loops.
//!
//! Every parallel loop in the crate maps an index range to owned results
//! collected in index order, so outputs never depend on scheduling. With
//! the `parallel` feature disabled, [`Execution::Parallel`] falls back to
//! the sequential path.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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

impl FromStr for Execution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" | "sequential" => Ok(Execution::Sequential),
            "par" | "parallel" => Ok(Execution::Parallel),
            _ => Err(Error::InvalidParameter(format!("unknown execution mode `{s}`"))),
        }
    }
}

impl Execution {
    /// `(0..n).map(f).collect()`, possibly in parallel.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`map_range`](Self::map_range) with per-worker scratch state
    /// created by `init`.
    pub fn map_range_with<S, T, I, F>(self, n: usize, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect()
            }
            _ => {
                let mut state = init();
                (0..n).map(|i| f(&mut state, i)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let f = |i: usize| (i as f64).sqrt();
        let a = Execution::Sequential.map_range(1000, f);
        let b = Execution::Parallel.map_range(1000, f);
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range_with(100, Vec::<usize>::new, |s, i| {
            s.push(i);
            i * 2
        });
        assert_eq!(c, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
