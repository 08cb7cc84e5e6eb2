//! Compensated accumulators for long-run averages.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Per-coordinate compensated sums with a shared count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningMean {
    sums: Vec<CompensatedSum>,
    count: u64,
}

impl RunningMean {
    pub fn new(dim: usize) -> Self {
        RunningMean {
            sums: vec![CompensatedSum::new(); dim],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sums.len());
        for (s, x) in self.sums.iter_mut().zip(x) {
            s.add(*x);
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sums(&self) -> Vec<f64> {
        self.sums.iter().map(CompensatedSum::value).collect()
    }

    /// Zeros before the first push.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sums.iter().map(|s| s.value() / n).collect()
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn million_tenths() {
        let mut s = CompensatedSum::new();
        for _ in 0..1_000_000 {
            s.add(0.1);
        }
        assert!((s.value() - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn running_mean() {
        let mut m = RunningMean::new(2);
        assert_eq!(m.mean(), vec![0.0, 0.0]);
        m.push(&[1.0, 2.0]);
        m.push(&[3.0, 6.0]);
        assert_eq!(m.mean(), vec![2.0, 4.0]);
        assert_eq!(m.count(), 2);
    }
}
