use atypical_core::Fanout;
use rayon::prelude::*;

/// Fans tasks out over the current rayon pool; results keep task order, so
/// output does not depend on the number of threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Fanout for Rayon {
    fn run<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).into_par_iter().map(task).collect()
    }
}

pub const THREADS_ENV: &str = "ATYPICAL_THREADS";

/// Thread count from the flag, else from `ATYPICAL_THREADS`; `None` lets rayon decide.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count"))?),
            Err(_) => None,
        },
    };
    match n {
        Some(0) => Err("thread count must be positive".into()),
        n => Ok(n),
    }
}

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_threads() {
        let a = pool(Some(1)).unwrap().install(|| Rayon.run(100, |i| i * i));
        let b = pool(Some(4)).unwrap().install(|| Rayon.run(100, |i| i * i));
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn flag_wins_and_zero_is_rejected() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), Some(3));
        assert!(resolve_threads(Some(0)).is_err());
    }
}
