//! Formation building: consensus on heading, speed and centroid, fictitious-target pursuit,
//! anonymous slot assignment and avoiding-angle boundary following.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{Limits, RobotState};
use crate::world::{wrap_angle, Point};

#[derive(Debug, Error, PartialEq)]
pub enum FormationError {
    #[error("pursuit offset c = {c} must exceed 2·v_max/omega_max = {bound}")]
    PursuitOffset { c: f64, bound: f64 },
    #[error("need 0 < eps < R/2 (eps = {eps}, R = {r})")]
    Radii { eps: f64, r: f64 },
    #[error("slot graph is not connected")]
    SlotGraphDisconnected,
    #[error("configuration has no slots")]
    Empty,
    #[error("standoff d0 = {d0} must be below r_s - v_max/omega_max = {d_min}")]
    Standoff { d0: f64, d_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FormationConsensus {
    pub theta_t: f64,
    pub x_t: f64,
    pub y_t: f64,
    pub v_t: f64,
}

impl FormationConsensus {
    /// Agreed point `(x + x̃, y + ỹ)` for a robot at `pos`.
    pub fn anchor(&self, pos: Point) -> Point {
        Point::new(pos.x + self.x_t, pos.y + self.y_t)
    }
}

/// Averages θ̃ and ṽ, and the sums `(x + x̃)`, `(y + ỹ)`, then subtracts the robot's next position.
pub fn formation_consensus_update(
    me: &FormationConsensus,
    pos: Point,
    next_pos: Point,
    neighbors: &[(Point, FormationConsensus)],
) -> FormationConsensus {
    let n = 1.0 + neighbors.len() as f64;
    let mut acc = (me.theta_t, me.v_t, pos.x + me.x_t, pos.y + me.y_t);
    for (p, f) in neighbors {
        acc.0 += f.theta_t;
        acc.1 += f.v_t;
        acc.2 += p.x + f.x_t;
        acc.3 += p.y + f.y_t;
    }
    FormationConsensus { theta_t: acc.0 / n, v_t: acc.1 / n, x_t: acc.2 / n - next_pos.x, y_t: acc.3 / n - next_pos.y }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Edge,
    Line,
    Arc,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "edge" => Ok(Preset::Edge),
            "line" => Ok(Preset::Line),
            "arc" => Ok(Preset::Arc),
            other => Err(format!("unknown formation preset '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    /// Slot offsets `(X, Y)`; X points along the direction of travel.
    pub offsets: Vec<Point>,
    pub c: f64,
}

impl Configuration {
    /// Slots of a preset shape for `n` robots with neighbouring slots `spacing` apart.
    pub fn preset(kind: Preset, n: usize, spacing: f64, c: f64) -> Self {
        let offsets = match kind {
            // Apex in front, arms trailing back at ±40°.
            Preset::Edge => {
                let (s, co) = 40f64.to_radians().sin_cos();
                (0..n)
                    .map(|i| {
                        let k = i.div_ceil(2) as f64;
                        let side = if i % 2 == 1 { 1.0 } else { -1.0 };
                        Point::new(-k * spacing * co, side * k * spacing * s)
                    })
                    .collect()
            }
            Preset::Line => (0..n).map(|i| Point::new(0.0, (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)).collect(),
            // Circular arc bulging forward, radius three spacings.
            Preset::Arc => {
                let radius = 3.0 * spacing;
                let step = 2.0 * (spacing / (2.0 * radius)).asin();
                (0..n)
                    .map(|i| {
                        let a = (i as f64 - (n as f64 - 1.0) / 2.0) * step;
                        Point::new(radius * a.cos() - radius, radius * a.sin())
                    })
                    .collect()
            }
        };
        Self { offsets, c }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn validate(&self, lim: &Limits) -> Result<(), FormationError> {
        if self.offsets.is_empty() {
            return Err(FormationError::Empty);
        }
        let bound = 2.0 * lim.v_max / lim.omega_max;
        if self.c.partial_cmp(&bound) != Some(std::cmp::Ordering::Greater) {
            return Err(FormationError::PursuitOffset { c: self.c, bound });
        }
        Ok(())
    }
}

/// World position of slot `j` at time `t` as seen by a robot with consensus `fc` at `pos`.
pub fn slot_point(pos: Point, fc: &FormationConsensus, cfg: &Configuration, j: usize, t: f64) -> Point {
    let o = cfg.offsets[j];
    fc.anchor(pos) + Point::new(o.x + t * fc.v_t, o.y).rotate(fc.theta_t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitTarget {
    pub g: Point,
    /// `h − x` in the θ̃-aligned frame; non-negative means the robot is at or behind its slot.
    pub along_error: f64,
}

impl PursuitTarget {
    pub fn behind(&self) -> bool {
        self.along_error >= 0.0
    }
}

pub fn fictitious_target(
    s: &RobotState,
    fc: &FormationConsensus,
    cfg: &Configuration,
    slot: usize,
    t: f64,
) -> PursuitTarget {
    let pos = s.pos();
    let local = |p: Point| p.rotate(-fc.theta_t);
    let z = local(pos);
    let a = local(fc.anchor(pos));
    let o = cfg.offsets[slot];
    let h = a.x + o.x + t * fc.v_t;
    let gx = if z.x <= h { h + cfg.c } else { z.x + cfg.c };
    let gy = a.y + o.y;
    PursuitTarget { g: Point::new(gx, gy).rotate(fc.theta_t), along_error: h - z.x }
}

/// How the discontinuous control law is applied at a fixed sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub dt: f64,
    /// Heading errors below this give no turn (rad).
    pub psi_db: f64,
    /// When true, a switch that would overshoot its switching surface within one sample is
    /// replaced by the in-range command that lands on it.
    pub landing: bool,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { dt: crate::motion::DEFAULT_DT, psi_db: 0.02, landing: true }
    }
}

fn turn(err: f64, lim: &Limits, smp: &Sampling) -> f64 {
    if err.abs() < smp.psi_db {
        return 0.0;
    }
    let bang = lim.omega_max * err.signum();
    if smp.landing {
        bang.signum() * lim.omega_max.min(err.abs() / smp.dt)
    } else {
        bang
    }
}

/// Speed is `v_max` behind the slot and `v_min` ahead of it; the turn is the sign law on ψ,
/// the angle from the velocity direction to `g − z`.
pub fn formation_control(
    s: &RobotState,
    target: &PursuitTarget,
    fc: &FormationConsensus,
    lim: &Limits,
    smp: &Sampling,
) -> (f64, f64) {
    let psi = wrap_angle((target.g - s.pos()).angle() - s.theta);
    let omega = turn(psi, lim, smp);
    let bang = if target.behind() { lim.v_max } else { lim.v_min };
    let v = if smp.landing {
        let along = (s.theta - fc.theta_t).cos();
        if along > 0.2 {
            ((fc.v_t + target.along_error / smp.dt) / along).clamp(lim.v_min, lim.v_max)
        } else {
            bang
        }
    } else {
        bang
    };
    (v, omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnonymousParams {
    pub period_n: u64,
    /// Detection radius for other robots (m).
    pub r_detect: f64,
    /// Vacancy radius (m).
    pub eps: f64,
}

impl Default for AnonymousParams {
    fn default() -> Self {
        Self { period_n: 20, r_detect: 6.0, eps: 0.4 }
    }
}

impl AnonymousParams {
    pub fn validate(&self) -> Result<(), FormationError> {
        if !(self.eps > 0.0 && self.eps < self.r_detect / 2.0) {
            return Err(FormationError::Radii { eps: self.eps, r: self.r_detect });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnonymousState {
    /// Claimed slot, zero-based.
    pub r_idx: usize,
    pub params: AnonymousParams,
}

/// Slots are adjacent when their offsets are within `R − 2ε`.
pub fn slot_graph(cfg: &Configuration, p: &AnonymousParams) -> Vec<Vec<usize>> {
    let n = cfg.len();
    let reach = p.r_detect - 2.0 * p.eps;
    (0..n).map(|i| (0..n).filter(|&j| j != i && cfg.offsets[i].dist(cfg.offsets[j]) <= reach).collect()).collect()
}

pub fn graph_connected(adj: &[Vec<usize>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// One reassignment at a period boundary. `poses[me]` is the robot's own position.
#[allow(clippy::too_many_arguments)]
pub fn anonymous_reassign<R: Rng + ?Sized>(
    state: &AnonymousState,
    me: usize,
    poses: &[Point],
    fc: &FormationConsensus,
    cfg: &Configuration,
    slots: &[Vec<usize>],
    t: f64,
    rng: &mut R,
) -> AnonymousState {
    let own = poses[me];
    let p = &state.params;
    let sensed: Vec<Point> =
        poses.iter().enumerate().filter(|&(j, q)| j != me && q.dist(own) <= p.r_detect).map(|(_, &q)| q).collect();
    let occupied = |slot: usize| {
        let a = slot_point(own, fc, cfg, slot, t);
        sensed.iter().any(|q| q.dist(a) <= p.eps)
    };
    let r = state.r_idx;
    if !occupied(r) {
        return *state;
    }
    let mut s = vec![r];
    s.extend(slots[r].iter().copied().filter(|&j| !occupied(j)));
    if s.len() == 1 {
        return *state;
    }
    AnonymousState { r_idx: s[rng.random_range(0..s.len())], params: state.params }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidParams {
    pub phi0: f64,
    pub r_s: f64,
}

impl AvoidParams {
    pub fn d0(&self) -> f64 {
        self.r_s * self.phi0.sin()
    }

    pub fn validate(&self, lim: &Limits) -> Result<(), FormationError> {
        let d_min = self.r_s - lim.v_max / lim.omega_max;
        if d_min <= self.d0() {
            return Err(FormationError::Standoff { d0: self.d0(), d_min });
        }
        Ok(())
    }
}

impl Default for AvoidParams {
    fn default() -> Self {
        Self { phi0: 30f64.to_radians(), r_s: 2.0 }
    }
}

/// Which side of the robot the followed obstacle is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Side holding most of the hits; right on a tie.
    pub fn of(readings: &[(f64, f64)], r_s: f64) -> Side {
        let weight: f64 = readings.iter().filter(|r| r.1 < r_s).map(|r| (r_s - r.1) * r.0.signum()).sum();
        if weight > 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Avoiding angle: the smallest bearing magnitude of any obstacle point seen on `side`.
/// Along a surface this is the point where it leaves the sensing circle; when the view is
/// occluded it is the nearer point, so the robot errs away from the obstacle.
/// Readings are `(bearing relative to heading, range)`; ranges at or beyond `r_s` are misses.
pub fn avoiding_angle(readings: &[(f64, f64)], side: Side, r_s: f64) -> Option<f64> {
    readings.iter().filter(|r| r.1 < r_s && r.0 * side.sign() >= 0.0).map(|r| r.0.abs()).min_by(f64::total_cmp)
}

/// Boundary-following command: full speed, turning to hold the avoiding angle at φ₀.
pub fn boundary_follow(
    readings: &[(f64, f64)],
    side: Side,
    p: &AvoidParams,
    lim: &Limits,
    smp: &Sampling,
) -> (f64, f64) {
    let toward = side.sign();
    let omega = match avoiding_angle(readings, side, p.r_s) {
        // Lost the surface on this side: swing back toward it.
        None => toward * lim.omega_max,
        // φ > φ₀ turns toward the obstacle, φ < φ₀ away from it.
        Some(phi) => toward * turn(phi - p.phi0, lim, smp),
    };
    (lim.v_max, omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FormationPursuit,
    BoundaryFollow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeArbiter {
    pub mode: Mode,
    pub engage_range: f64,
    pub hysteresis: u32,
    clear_steps: u32,
}

impl ModeArbiter {
    pub fn new(engage_range: f64, hysteresis: u32) -> Self {
        Self { mode: Mode::FormationPursuit, engage_range, hysteresis, clear_steps: 0 }
    }

    /// Feeds the closest relevant obstacle range of this step.
    pub fn step(&mut self, nearest: Option<f64>) -> Mode {
        let engaged = nearest.is_some_and(|d| d < self.engage_range);
        match (self.mode, engaged) {
            (_, true) => {
                self.mode = Mode::BoundaryFollow;
                self.clear_steps = 0;
            }
            (Mode::BoundaryFollow, false) => {
                self.clear_steps += 1;
                if self.clear_steps >= self.hysteresis {
                    self.mode = Mode::FormationPursuit;
                    self.clear_steps = 0;
                }
            }
            (Mode::FormationPursuit, false) => {}
        }
        self.mode
    }
}
