use std::time::Instant;

use serde::{Deserialize, Serialize};

/// A record is noisy when `std / mean` exceeds this for kernels of at least
/// [`NOISE_MIN_MEAN_MS`].
pub const NOISE_RATIO: f64 = 0.5;
pub const NOISE_MIN_MEAN_MS: f64 = 1.0;

/// Per-iteration wall-clock samples in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub samples_ms: Vec<f64>,
}

impl Timing {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        Self { samples_ms }
    }

    pub fn iters(&self) -> usize {
        self.samples_ms.len()
    }

    pub fn mean_ms(&self) -> f64 {
        if self.samples_ms.is_empty() {
            return 0.0;
        }
        self.samples_ms.iter().sum::<f64>() / self.samples_ms.len() as f64
    }

    /// Population standard deviation.
    pub fn std_ms(&self) -> f64 {
        if self.samples_ms.is_empty() {
            return 0.0;
        }
        let m = self.mean_ms();
        let var = self.samples_ms.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / self.samples_ms.len() as f64;
        var.sqrt()
    }

    pub fn min_ms(&self) -> f64 {
        self.samples_ms.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn noisy(&self) -> bool {
        is_noisy(self.mean_ms(), self.std_ms())
    }
}

pub fn is_noisy(mean_ms: f64, std_ms: f64) -> bool {
    mean_ms >= NOISE_MIN_MEAN_MS && std_ms / mean_ms > NOISE_RATIO
}

/// Run `f` `warmup` times untimed, then `iters` times with a timestamp
/// around each call. Returns the timing and the last result.
pub fn time_iters<R>(warmup: usize, iters: usize, mut f: impl FnMut() -> R) -> (Timing, Option<R>) {
    for _ in 0..warmup {
        std::hint::black_box(f());
    }
    let mut samples = Vec::with_capacity(iters);
    let mut last = None;
    for _ in 0..iters {
        let t = Instant::now();
        let r = std::hint::black_box(f());
        samples.push(t.elapsed().as_secs_f64() * 1e3);
        last = Some(r);
    }
    (Timing::from_samples(samples), last)
}

/// Like [`time_iters`], but hands every timed result to `check` outside the
/// timed region. Returns the timing and the largest value `check` reported.
pub fn time_iters_checked<R>(
    warmup: usize,
    iters: usize,
    mut f: impl FnMut() -> R,
    mut check: impl FnMut(&R) -> f64,
) -> (Timing, f64) {
    for _ in 0..warmup {
        std::hint::black_box(f());
    }
    let mut samples = Vec::with_capacity(iters);
    let mut worst: f64 = 0.0;
    for _ in 0..iters {
        let t = Instant::now();
        let r = std::hint::black_box(f());
        samples.push(t.elapsed().as_secs_f64() * 1e3);
        worst = worst.max(check(&r));
    }
    (Timing::from_samples(samples), worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let t = Timing::from_samples(vec![2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(t.mean_ms(), 5.0);
        assert_eq!(t.std_ms(), 2.0);
        assert_eq!(t.min_ms(), 2.0);
        assert!(!t.noisy());
    }

    #[test]
    fn checked_sees_every_result() {
        let mut k = 0.0;
        let (t, worst) = time_iters_checked(
            2,
            5,
            || {
                k += 1.0;
                k
            },
            |&r| r,
        );
        assert_eq!(t.iters(), 5);
        assert_eq!(worst, 7.0);
    }

    #[test]
    fn noise_flag() {
        assert!(is_noisy(2.0, 1.5));
        assert!(!is_noisy(2.0, 1.0));
        assert!(!is_noisy(0.5, 10.0));
        assert!(Timing::from_samples(vec![1.0, 1.0, 10.0]).noisy());
    }

    #[test]
    fn counts_calls() {
        let mut calls = 0;
        let (t, last) = time_iters(3, 5, || {
            calls += 1;
            calls
        });
        assert_eq!(calls, 8);
        assert_eq!(t.iters(), 5);
        assert_eq!(last, Some(8));
        assert!(t.std_ms() >= 0.0);
    }
}
