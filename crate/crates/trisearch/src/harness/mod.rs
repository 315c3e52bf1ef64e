//! Scenario files, episode engines, Monte Carlo sweeps, statistics and artifact export.

pub mod engine;
pub mod export;
pub mod formation_run;
pub mod lattice;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use engine::{run_episode, Episode, RunMetrics, TrajectorySample};
pub use montecarlo::{monte_carlo, EpisodeOutcome, Sweep};
pub use scenario::{Scenario, ScenarioError};
pub use stats::SweepStats;
