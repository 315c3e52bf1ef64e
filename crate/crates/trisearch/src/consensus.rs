//! Stage-one locating: neighbour averaging of lattice angle and anchor, and snap-to-grid.

use crate::trigrid::{nearest_vertex, vertex_point, GridFrame};
use crate::world::Point;

pub const DEFAULT_TOL_THETA: f64 = 1e-4;
pub const DEFAULT_TOL_Q: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatingState {
    pub theta: f64,
    pub q: Point,
}

impl LocatingState {
    pub fn new(theta: f64, q: Point) -> Self {
        Self { theta, q }
    }

    /// Initial state from a robot's own pose: the heading folded into `[0, π)` and its position.
    pub fn from_pose(position: Point, heading: f64) -> Self {
        Self { theta: heading.rem_euclid(std::f64::consts::PI), q: position }
    }

    pub fn frame(&self, side: f64) -> GridFrame {
        GridFrame { q: self.q, theta: self.theta, side }
    }
}

/// One averaging round over the robot itself and its current neighbours. No angle wrap is applied.
pub fn locating_update(me: &LocatingState, neighbors: &[LocatingState]) -> LocatingState {
    let n = 1.0 + neighbors.len() as f64;
    let mut theta = me.theta;
    let (mut x, mut y) = (me.q.x, me.q.y);
    for s in neighbors {
        theta += s.theta;
        x += s.q.x;
        y += s.q.y;
    }
    LocatingState { theta: theta / n, q: Point::new(x / n, y / n) }
}

pub fn snap_waypoint(s: &LocatingState, side: f64, p: Point) -> Point {
    let f = s.frame(side);
    vertex_point(&f, nearest_vertex(&f, p))
}

/// Largest pairwise angle gap and anchor distance.
pub fn spreads(states: &[LocatingState]) -> (f64, f64) {
    let mut dt: f64 = 0.0;
    let mut dq: f64 = 0.0;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            dt = dt.max((a.theta - b.theta).abs());
            dq = dq.max(a.q.dist(b.q));
        }
    }
    (dt, dq)
}

pub fn consensus_converged(states: &[LocatingState], tol_theta: f64, tol_q: f64) -> bool {
    let (dt, dq) = spreads(states);
    dt <= tol_theta && dq <= tol_q
}
