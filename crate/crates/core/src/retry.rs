//! Exponential-backoff retry loop shared by the text-generation provider and
//! the embedding service client.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubles on every further attempt.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(2),
        }
    }
}

impl RetryPolicy {
    pub fn new(max_retries: u32, base_delay: Duration) -> Self {
        RetryPolicy {
            max_retries,
            base_delay,
        }
    }

    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy::new(max_retries, Duration::ZERO)
    }

    /// Delay before retry number `retry` (0-based): `base * 2^retry`.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(31));
        self.base_delay.saturating_mul(factor)
    }

    /// Runs `op` until it succeeds, fails with a non-transient error, or the
    /// retry budget is spent. Returns the final result and the number of
    /// retries performed.
    pub fn run<T, E>(
        &self,
        mut op: impl FnMut(u32) -> Result<T, E>,
        is_transient: impl Fn(&E) -> bool,
    ) -> (Result<T, E>, u32) {
        let mut retries = 0;
        loop {
            match op(retries) {
                Ok(value) => return (Ok(value), retries),
                Err(err) if retries < self.max_retries && is_transient(&err) => {
                    let delay = self.backoff(retries);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    retries += 1;
                }
                Err(err) => return (Err(err), retries),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(0), Duration::from_secs(2));
        assert_eq!(p.backoff(1), Duration::from_secs(4));
        assert_eq!(p.backoff(2), Duration::from_secs(8));
        assert_eq!(
            RetryPolicy::new(1, Duration::from_secs(1)).backoff(40),
            Duration::from_secs(1 << 31)
        );
    }

    #[test]
    fn retries_transient_until_success() {
        let mut calls = 0;
        let (result, retries) = RetryPolicy::no_delay(3).run(
            |_| {
                calls += 1;
                if calls < 3 {
                    Err("busy")
                } else {
                    Ok(calls)
                }
            },
            |_| true,
        );
        assert_eq!(result, Ok(3));
        assert_eq!(retries, 2);
    }

    #[test]
    fn gives_up_after_budget() {
        let mut calls = 0;
        let (result, retries) = RetryPolicy::no_delay(2).run::<(), _>(
            |_| {
                calls += 1;
                Err("down")
            },
            |_| true,
        );
        assert!(result.is_err());
        assert_eq!(retries, 2);
        assert_eq!(calls, 3);
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let mut calls = 0;
        let (result, retries) = RetryPolicy::no_delay(5).run::<(), _>(
            |_| {
                calls += 1;
                Err("unauthorized")
            },
            |_| false,
        );
        assert!(result.is_err());
        assert_eq!((retries, calls), (0, 1));
    }
}
