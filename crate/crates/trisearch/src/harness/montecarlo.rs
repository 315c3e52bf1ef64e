//! Independent seeded episodes over team sizes, run data-parallel when the `parallel`
//! feature is on.

use super::engine::{run_episode, EngineError, RunMetrics};
use super::rng::episode_seed;
use super::scenario::Scenario;
use super::stats::SweepStats;
use crate::search::PolicyChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `f(0..n)` in index order. Falls back to a plain loop without the `parallel` feature.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub team_size: usize,
    pub run: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub policy: PolicyChoice,
    pub outcomes: Vec<EpisodeOutcome>,
}

impl Sweep {
    /// Completion times of terminated runs of one team size, in run order.
    pub fn times(&self, team_size: usize) -> Vec<f64> {
        self.outcomes.iter().filter(|o| o.team_size == team_size).filter_map(|o| o.metrics.completion_time).collect()
    }

    pub fn non_terminated(&self) -> Vec<&EpisodeOutcome> {
        self.outcomes.iter().filter(|o| !o.metrics.terminated()).collect()
    }

    pub fn stats(&self) -> Vec<SweepStats> {
        let mut sizes: Vec<usize> = self.outcomes.iter().map(|o| o.team_size).collect();
        sizes.dedup();
        sizes.into_iter().filter_map(|k| SweepStats::from_samples(k, &self.times(k))).collect()
    }
}

pub fn monte_carlo(s: &Scenario, team_sizes: &[usize], runs: usize, base_seed: u64) -> Result<Sweep, EngineError> {
    monte_carlo_with(s, team_sizes, runs, base_seed, Execution::default())
}

pub fn monte_carlo_with(
    s: &Scenario,
    team_sizes: &[usize],
    runs: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<Sweep, EngineError> {
    let jobs: Vec<(usize, usize)> = team_sizes.iter().flat_map(|&k| (0..runs).map(move |r| (k, r))).collect();
    let results = map_indexed(jobs.len(), exec, |j| {
        let (k, run) = jobs[j];
        let seed = episode_seed(base_seed, k, run);
        run_episode(&s.with_team(k), seed).map(|e| EpisodeOutcome { team_size: k, run, seed, metrics: e.metrics })
    });
    let mut outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    outcomes.sort_by_key(|o| (o.team_size, o.run));
    Ok(Sweep { policy: s.search.policy, outcomes })
}
