use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Default significance level when a caller does not pass one.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Outcome of a randomization or bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub null_stats: Vec<f64>,
    pub alpha: f64,
    pub reject: bool,
    pub seed: u64,
    pub stream: u64,
}

impl TestResult {
    pub fn new(method: &str, statistic: f64, p_value: f64, null_stats: Vec<f64>, rng: RngStream) -> Self {
        Self {
            method: method.to_string(),
            statistic,
            p_value,
            null_stats,
            alpha: DEFAULT_ALPHA,
            reject: rejects(p_value, DEFAULT_ALPHA),
            seed: rng.seed(),
            stream: rng.stream_id(),
        }
    }

    /// Re-evaluates the decision at level `alpha`.
    pub fn at_level(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.reject = rejects(self.p_value, alpha);
        self
    }

    pub fn monte_carlo_size(&self) -> usize {
        self.null_stats.len()
    }
}

/// `p ≤ α`, tolerant of rounding in lattice p-values such as `5/100`.
pub fn rejects(p_value: f64, alpha: f64) -> bool {
    p_value <= alpha * (1.0 + 1e-12)
}
