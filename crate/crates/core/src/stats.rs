//! Frequency tallies and distribution comparisons for Monte Carlo checks.

use serde::{Deserialize, Serialize};

/// Outcome counts over a fixed number of categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    counts: Vec<u64>,
}

impl Tally {
    pub fn new(categories: usize) -> Self {
        Self { counts: vec![0; categories] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, outcome: usize) {
        if outcome >= self.counts.len() {
            self.counts.resize(outcome + 1, 0);
        }
        self.counts[outcome] += 1;
    }

    /// Merging is associative and commutative, so per-thread tallies can be
    /// combined in any order.
    pub fn merge(mut self, other: &Tally) -> Tally {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Total variation distance `½ Σ |p_i − q_i|`; missing entries count as zero.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>()
}

/// Standard error of a Bernoulli frequency with success probability `p` over `n` trials.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Whether `observed` lies within `k` standard errors of `expected`.
pub fn within_sigma(observed: f64, expected: f64, n: u64, k: f64) -> bool {
    (observed - expected).abs() <= k * binomial_sigma(expected, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_merge_and_tv() {
        let mut a = Tally::new(2);
        a.record(0);
        a.record(1);
        let mut b = Tally::new(3);
        b.record(2);
        let m = a.clone().merge(&b);
        assert_eq!(m.counts(), &[1, 1, 1]);
        assert_eq!(b.merge(&a).counts(), m.counts());
        assert!((total_variation(&[1.0, 0.0], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&[0.25; 4], &[0.25; 4]), 0.0);
        assert!(within_sigma(0.251, 0.25, 100_000, 3.0));
        assert!(!within_sigma(0.26, 0.25, 100_000, 3.0));
    }
}
