//! Threaded block executor.
//!
//! Work items are distributed over scoped threads and written into
//! index-addressed slots, then reduced in index order by the caller, so the
//! numerical result is identical for every worker count.

use gilbert_core::solver::BlockExecutor;

/// Name of the environment variable capping the worker count.
pub const WORKERS_ENV: &str = "GILBERT_WORKERS";

pub struct ThreadedExecutor {
    workers: usize,
}

impl ThreadedExecutor {
    pub fn new(workers: usize) -> Self {
        ThreadedExecutor { workers: workers.max(1) }
    }

    /// Worker count from `GILBERT_WORKERS`, defaulting to the available
    /// parallelism.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let workers = match std::env::var(WORKERS_ENV) {
            Ok(raw) => match raw.trim().parse::<usize>() {
                Ok(n) if n >= 1 => n.min(available.max(n)),
                _ => available,
            },
            Err(_) => available,
        };
        ThreadedExecutor::new(workers)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl BlockExecutor for ThreadedExecutor {
    fn map_blocks(
        &self,
        count: usize,
        f: &(dyn Fn(usize) -> Vec<f64> + Sync),
    ) -> Vec<Vec<f64>> {
        if self.workers == 1 || count <= 1 {
            return (0..count).map(f).collect();
        }
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); count];
        let chunk = count.div_ceil(self.workers);
        std::thread::scope(|scope| {
            for (start, slots) in out.chunks_mut(chunk).enumerate().map(|(i, c)| (i * chunk, c)) {
                scope.spawn(move || {
                    for (offset, slot) in slots.iter_mut().enumerate() {
                        *slot = f(start + offset);
                    }
                });
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threaded_matches_serial_in_order() {
        let f = |k: usize| vec![k as f64, (k * k) as f64];
        let threaded = ThreadedExecutor::new(3).map_blocks(7, &f);
        let serial: Vec<Vec<f64>> = (0..7).map(f).collect();
        assert_eq!(threaded, serial);
    }
}
