//! Stage-two waypoint policies and mission bookkeeping.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::topomap::{TopoMap, VertexState};
use crate::trigrid::LatticeCoord;
use crate::world::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mission {
    FullCoverage,
    Targets {
        targets: Vec<Point>,
    },
    /// `reset_period` is in simulation ticks.
    Patrol {
        reset_period: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Random,
    SemiRandom,
    Modified,
}

impl PolicyChoice {
    pub const ALL: [PolicyChoice; 3] = [PolicyChoice::Random, PolicyChoice::SemiRandom, PolicyChoice::Modified];

    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Random => "random",
            PolicyChoice::SemiRandom => "semirandom",
            PolicyChoice::Modified => "modified",
        }
    }

    /// Decision cap per robot as a multiple of the vertex count.
    pub fn step_cap_factor(self) -> usize {
        match self {
            PolicyChoice::Random => 50,
            PolicyChoice::SemiRandom => 20,
            PolicyChoice::Modified => 3,
        }
    }
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(PolicyChoice::Random),
            "semirandom" | "semi-random" => Ok(PolicyChoice::SemiRandom),
            "modified" => Ok(PolicyChoice::Modified),
            other => Err(format!("unknown policy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Move(LatticeCoord),
    Stay,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TargetLedger {
    flags: Vec<bool>,
}

impl TargetLedger {
    pub fn new(n: usize) -> Self {
        Self { flags: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_detected(&self, j: usize) -> bool {
        self.flags[j]
    }

    /// Returns true if the flag was newly set.
    pub fn set(&mut self, j: usize) -> bool {
        !std::mem::replace(&mut self.flags[j], true)
    }

    pub fn all_detected(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    pub fn detected(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|f| *f.1).map(|f| f.0)
    }
}

fn pick<R: Rng + ?Sized>(c: &[LatticeCoord], rng: &mut R) -> Decision {
    if c.is_empty() {
        Decision::Stay
    } else {
        Decision::Move(c[rng.random_range(0..c.len())])
    }
}

fn unvisited_neighbors(map: &TopoMap, current: LatticeCoord) -> Vec<LatticeCoord> {
    map.neighbors_in_map(current).into_iter().filter(|&c| map.get(c) == Some(VertexState::Unvisited)).collect()
}

pub fn next_waypoint_random<R: Rng + ?Sized>(map: &TopoMap, current: LatticeCoord, rng: &mut R) -> Decision {
    if map.unvisited_count() == 0 {
        return Decision::Stay;
    }
    pick(&map.neighbors_in_map(current), rng)
}

pub fn next_waypoint_semirandom<R: Rng + ?Sized>(map: &TopoMap, current: LatticeCoord, rng: &mut R) -> Decision {
    if map.unvisited_count() == 0 {
        return Decision::Stay;
    }
    let fresh = unvisited_neighbors(map, current);
    if fresh.is_empty() {
        pick(&map.neighbors_in_map(current), rng)
    } else {
        pick(&fresh, rng)
    }
}

pub fn next_waypoint_modified(map: &TopoMap, pose: Point) -> Decision {
    map.nearest_unvisited(pose).map_or(Decision::Stay, Decision::Move)
}

/// Mission-dependent decision. `targets_left` is the robot's own knowledge of undetected targets.
pub fn decide<R: Rng + ?Sized>(
    policy: PolicyChoice,
    mission: &Mission,
    targets_left: bool,
    map: &TopoMap,
    current: LatticeCoord,
    pose: Point,
    rng: &mut R,
) -> Decision {
    match (mission, policy) {
        (Mission::FullCoverage, PolicyChoice::Random) => next_waypoint_random(map, current, rng),
        (Mission::FullCoverage, PolicyChoice::SemiRandom) => next_waypoint_semirandom(map, current, rng),
        (Mission::FullCoverage, PolicyChoice::Modified) => next_waypoint_modified(map, pose),
        (Mission::Targets { .. }, _) if !targets_left => Decision::Stay,
        (Mission::Targets { .. } | Mission::Patrol { .. }, PolicyChoice::Random) => {
            pick(&map.neighbors_in_map(current), rng)
        }
        (Mission::Targets { .. }, PolicyChoice::SemiRandom) => next_waypoint_semirandom(map, current, rng),
        (Mission::Patrol { .. }, PolicyChoice::SemiRandom) => {
            let fresh = unvisited_neighbors(map, current);
            if fresh.is_empty() {
                pick(&map.neighbors_in_map(current), rng)
            } else {
                pick(&fresh, rng)
            }
        }
        (Mission::Targets { .. } | Mission::Patrol { .. }, PolicyChoice::Modified) => next_waypoint_modified(map, pose),
    }
}

/// Flags every target within `r_s` of some robot. Returns the newly detected target ids.
pub fn sense_targets(targets: &[Point], robots: &[Point], r_s: f64, ledger: &mut TargetLedger) -> Vec<usize> {
    let mut fresh = Vec::new();
    for (j, t) in targets.iter().enumerate() {
        if !ledger.is_detected(j) && robots.iter().any(|p| p.dist(*t) <= r_s) && ledger.set(j) {
            fresh.push(j);
        }
    }
    fresh
}

/// Senses targets, applies the patrol reset when due, and reports whether the mission is over.
/// `tick` counts stage-two simulation ticks.
pub fn mission_step(
    mission: &Mission,
    ledger: &mut TargetLedger,
    maps: &mut [TopoMap],
    robots: &[Point],
    r_s: f64,
    tick: u64,
) -> bool {
    match mission {
        Mission::FullCoverage => maps.iter().all(|m| m.unvisited_count() == 0),
        Mission::Targets { targets } => {
            sense_targets(targets, robots, r_s, ledger);
            ledger.all_detected()
        }
        Mission::Patrol { reset_period } => {
            if let Some(p) = reset_period {
                if *p > 0 && tick > 0 && tick.is_multiple_of(*p) {
                    maps.iter_mut().for_each(TopoMap::reset_visited);
                }
            }
            false
        }
    }
}
