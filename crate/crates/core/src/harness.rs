//! Replica execution on a worker pool.
//!
//! Workers only return finished results; output order is the replica index,
//! so the thread count never changes what is produced.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Run `f(i)` for `i in 0..replicas` on `threads` workers (0 = all cores)
/// and return the results in index order.
pub fn run_replicas<T, F>(replicas: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(|| (0..replicas).into_par_iter().map(&f).collect()))
}

/// Like [`run_replicas`] for fallible replica bodies; the first error by
/// index wins.
pub fn try_run_replicas<T, F>(replicas: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    run_replicas(replicas, threads, f)?.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use rand::Rng;

    #[test]
    fn order_independent_of_threads() {
        let body = |i: u64| -> u64 { replica_rng(5, i).random::<u64>() ^ i };
        let one = run_replicas(200, 1, body).unwrap();
        let four = run_replicas(200, 4, body).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn first_error_wins() {
        let r = try_run_replicas(10, 2, |i| {
            if i >= 3 {
                Err(Error::NoSamples(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert_eq!(r, Err(Error::NoSamples("3".into())));
    }
}
