//! Per-team-size summary statistics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub team_size: usize,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    /// Bessel-corrected; zero for a single sample.
    pub std: f64,
}

impl SweepStats {
    /// Summarizes samples in the order given. `None` when empty.
    pub fn from_samples(team_size: usize, xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let avg = xs.iter().sum::<f64>() / n;
        let std =
            if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can leave the mean a hair outside [min, max] for near-constant data.
        Some(Self { team_size, min, max, avg: avg.clamp(min, max), std })
    }
}
