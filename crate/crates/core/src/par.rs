//! Data-parallel map over independent work items (bootstrap resamples,
//! seeded Monte Carlo repetitions). With the `parallel` feature off every
//! call runs sequentially; results are ordered by index either way.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` only when the crate was built with rayon.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => unreachable!("effective() downgrades to sequential"),
    }
}

/// Independent random stream `stream` of the generator seeded by `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn modes_agree() {
        let f = |i: usize| rng_for(7, i as u64).random::<u64>();
        assert_eq!(
            map_indexed(64, Execution::Sequential, f),
            map_indexed(64, Execution::Parallel, f)
        );
    }

    #[test]
    fn streams_differ() {
        let a: u64 = rng_for(1, 0).random();
        let b: u64 = rng_for(1, 1).random();
        assert_ne!(a, b);
    }
}
