//! Running work on a pool of a chosen size.
//!
//! Every parallel loop in the crate collects per-index results in index order
//! and reduces them sequentially, so the pool size never changes a result.

use crate::error::{Error, Result};

/// Runs `f` on a fresh pool with `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("thread count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn pool_size_is_applied() {
        assert_eq!(with_threads(Some(3), rayon::current_num_threads).unwrap(), 3);
        assert!(with_threads(Some(0), || ()).is_err());
        let s: u64 = with_threads(Some(2), || (0..1000u64).into_par_iter().sum()).unwrap();
        assert_eq!(s, 499_500);
    }
}
