//! Unicycle kinematics, waypoint tracking, reactive avoidance and travel-time budgets.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topomap::SensorModel;
use crate::world::{wrap_angle, Point, Ray, Workspace};

pub const DEFAULT_DT: f64 = 0.1;
/// Heading gain of the waypoint tracker (1/s).
pub const K_HEADING: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("invalid limits: {0}")]
    Limits(&'static str),
    #[error("et_factor must exceed 1, got {0}")]
    EtFactor(f64),
    #[error("arrival_tol must be positive, got {0}")]
    ArrivalTol(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub theta: f64,
    pub v: f64,
    /// Current turn rate, tracked for angular acceleration limits.
    pub omega: f64,
}

impl RobotState {
    pub fn new(p: Point, theta: f64, v: f64) -> Self {
        Self { x: p.x, y: p.y, theta: wrap_angle(theta), v, omega: 0.0 }
    }

    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub v_max: f64,
    pub v_min: f64,
    pub omega_max: f64,
    #[serde(default)]
    pub accel: Option<f64>,
    #[serde(default)]
    pub angular_accel: Option<f64>,
}

impl Limits {
    /// Caps used while searching; stopping is allowed.
    pub fn search() -> Self {
        Self { v_max: 0.4, v_min: 0.0, omega_max: 1.74, accel: Some(0.3), angular_accel: Some(1.74) }
    }

    /// Caps used while building formations.
    pub fn formation() -> Self {
        Self { v_max: 1.5, v_min: 0.2, omega_max: 2.0, accel: None, angular_accel: None }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if !(self.v_min >= 0.0 && self.v_min < self.v_max) {
            return Err(MotionError::Limits("need 0 <= v_min < v_max"));
        }
        if self.omega_max.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(MotionError::Limits("omega_max must be positive"));
        }
        if self.accel.is_some_and(|a| a <= 0.0) || self.angular_accel.is_some_and(|a| a <= 0.0) {
            return Err(MotionError::Limits("acceleration caps must be positive"));
        }
        Ok(())
    }

    pub fn clamp(&self, v: f64, omega: f64) -> (f64, f64) {
        (v.clamp(self.v_min, self.v_max), omega.clamp(-self.omega_max, self.omega_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointNav {
    pub arrival_tol: f64,
    pub et_factor: f64,
}

impl Default for WaypointNav {
    fn default() -> Self {
        Self { arrival_tol: 0.2, et_factor: 3.0 }
    }
}

impl WaypointNav {
    pub fn validate(&self) -> Result<(), MotionError> {
        if self.et_factor.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return Err(MotionError::EtFactor(self.et_factor));
        }
        if self.arrival_tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(MotionError::ArrivalTol(self.arrival_tol));
        }
        Ok(())
    }
}

fn rate_limit(current: f64, target: f64, cap: Option<f64>, dt: f64) -> f64 {
    match cap {
        Some(a) => target.clamp(current - a * dt, current + a * dt),
        None => target,
    }
}

/// Clamps and rate-limits the command, then takes one explicit Euler step.
pub fn integrate(s: &RobotState, v_cmd: f64, omega_cmd: f64, dt: f64, lim: &Limits) -> RobotState {
    debug_assert!(dt > 0.0);
    let (v, omega) = lim.clamp(v_cmd, omega_cmd);
    let (v, omega) = lim.clamp(rate_limit(s.v, v, lim.accel, dt), rate_limit(s.omega, omega, lim.angular_accel, dt));
    RobotState {
        x: s.x + v * s.theta.cos() * dt,
        y: s.y + v * s.theta.sin() * dt,
        theta: wrap_angle(s.theta + omega * dt),
        v,
        omega,
    }
}

/// Proportional heading controller; speed fades with heading error and stops past 90°.
pub fn track_waypoint(s: &RobotState, wp: Point, lim: &Limits, nav: &WaypointNav) -> (f64, f64) {
    let d = wp - s.pos();
    if d.norm() <= nav.arrival_tol {
        return (0.0, 0.0);
    }
    let err = wrap_angle(d.angle() - s.theta);
    let omega = (K_HEADING * err).clamp(-lim.omega_max, lim.omega_max);
    let v = if err.abs() > FRAC_PI_2 { 0.0 } else { lim.v_max * err.cos() };
    (v.max(lim.v_min), omega)
}

/// Repulsive field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidField {
    /// Obstacle hits closer than this push back (m).
    pub r_obstacle: f64,
    /// Other robots closer than this push back (m).
    pub r_robot: f64,
    pub k_omega: f64,
    pub k_v: f64,
    /// Forward range below which translation stops (m).
    pub stop_dist: f64,
}

impl Default for AvoidField {
    fn default() -> Self {
        Self { r_obstacle: 0.3, r_robot: 1.0, k_omega: 1.0, k_v: 1.0, stop_dist: 0.1 }
    }
}

/// Blends a raw command with the summed inverse-distance repulsion from nearby walls and robots.
/// Robots ahead also add a rightward push so head-on encounters resolve.
pub fn avoid_blend(
    s: &RobotState,
    w: &Workspace,
    others: &[Point],
    raw: (f64, f64),
    sensor: &SensorModel,
    field: &AvoidField,
    lim: &Limits,
) -> (f64, f64) {
    let p = s.pos();
    let mut force = Point::default();
    let mut blocked = false;
    if w.edge_distance(p) < field.r_obstacle.max(field.stop_dist) {
        let n = sensor.n_rays.max(2);
        for k in 0..n {
            let alpha = -FRAC_PI_2 + std::f64::consts::PI * k as f64 / (n - 1) as f64;
            let range = field.r_obstacle.max(field.stop_dist);
            if let Some(d) = w.raycast(Ray::new(p, s.theta + alpha, range)) {
                if d < field.r_obstacle {
                    force = force - Point::from_polar(1.0 / d - 1.0 / field.r_obstacle, alpha);
                }
                if alpha.abs() < 0.35 && d < field.stop_dist {
                    blocked = true;
                }
            }
        }
    }
    for &o in others {
        let rel = (o - p).rotate(-s.theta);
        let d = rel.norm();
        if d >= field.r_robot || d <= 1e-9 || rel.x <= 0.0 {
            continue;
        }
        let m = 1.0 / d - 1.0 / field.r_robot;
        force = force - rel * (m / d) + Point::new(0.0, -m);
    }
    if force == Point::default() && !blocked {
        return raw;
    }
    let omega = raw.1 + field.k_omega * force.y;
    let v = if blocked { 0.0 } else { raw.0 / (1.0 + field.k_v * (-force.x).max(0.0)) };
    (v.clamp(lim.v_min, lim.v_max), omega.clamp(-lim.omega_max, lim.omega_max))
}

pub fn et_timeout(start_time: f64, now: f64, dist: f64, v_ref: f64, nav: &WaypointNav) -> bool {
    debug_assert!(v_ref > 0.0);
    now - start_time > nav.et_factor * dist / v_ref
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn free_limits() -> Limits {
        Limits { v_max: 10.0, v_min: 0.0, omega_max: 10.0, accel: None, angular_accel: None }
    }

    fn sensor() -> SensorModel {
        SensorModel { r_s: 1.0, n_rays: 17, max_range: 5.0 }
    }

    #[test]
    fn straight_line_and_rotation() {
        let s = RobotState::new(Point::new(0.0, 0.0), 0.0, 0.0);
        let n = integrate(&s, 1.0, 0.0, 1.0, &free_limits());
        assert_eq!((n.x, n.y), (1.0, 0.0));
        let lim = Limits::search();
        let lim = Limits { accel: None, angular_accel: None, ..lim };
        let r = integrate(&s, 0.0, lim.omega_max, 1.0, &lim);
        assert_eq!((r.x, r.y), (0.0, 0.0));
        assert!((r.theta - lim.omega_max).abs() < 1e-12);
    }

    fn circle_error(dt: f64) -> f64 {
        let lim = free_limits();
        let mut s = RobotState::new(Point::new(0.0, 0.0), 0.0, 1.0);
        let steps = (2.0 * PI / dt).round() as usize;
        for _ in 0..steps {
            s = integrate(&s, 1.0, 1.0, dt, &lim);
        }
        // Closed-form arc end point after steps·dt seconds.
        let t = steps as f64 * dt;
        let exact = Point::new(t.sin(), 1.0 - t.cos());
        s.pos().dist(exact)
    }

    #[test]
    fn circle_closes_and_error_is_first_order() {
        let e1 = circle_error(0.001);
        assert!(e1 < 1e-2, "{e1}");
        let e2 = circle_error(0.0005);
        let ratio = e1 / e2;
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn accel_caps_apply() {
        let lim = Limits::search();
        let s = RobotState::new(Point::default(), 0.0, 0.0);
        let n = integrate(&s, 0.4, 1.74, 0.1, &lim);
        assert!((n.v - 0.03).abs() < 1e-12);
        assert!((n.omega - 0.174).abs() < 1e-12);
    }

    #[test]
    fn tracking() {
        let lim = Limits::search();
        let nav = WaypointNav::default();
        let s = RobotState::new(Point::default(), 0.0, 0.0);
        assert_eq!(track_waypoint(&s, Point::new(2.0, 0.0), &lim, &nav), (lim.v_max, 0.0));
        let (v, w) = track_waypoint(&s, Point::new(-2.0, 0.0), &lim, &nav);
        assert_eq!((v, w.abs()), (0.0, lim.omega_max));
        assert_eq!(track_waypoint(&s, Point::new(0.1, 0.05), &lim, &nav), (0.0, 0.0));
    }

    #[test]
    fn avoid_nothing_near() {
        let w = Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.0).unwrap();
        let s = RobotState::new(Point::new(5.0, 5.0), 0.0, 0.3);
        let lim = Limits::search();
        let raw = (0.3, 0.2);
        assert_eq!(avoid_blend(&s, &w, &[Point::new(8.0, 5.0)], raw, &sensor(), &AvoidField::default(), &lim), raw);
    }

    #[test]
    fn avoid_oblique_wall_turns_away() {
        // Wall at x = 10, 0.5 m ahead, approached 20° left of its normal.
        let w = Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.0).unwrap();
        let s = RobotState::new(Point::new(9.5, 5.0), 20f64.to_radians(), 0.3);
        let field = AvoidField { r_obstacle: 1.0, ..AvoidField::default() };
        let lim = Limits::search();
        let (v, om) = avoid_blend(&s, &w, &[], (0.3, 0.0), &sensor(), &field, &lim);
        // Gradient of Σ 1/d for a wall x = 10 points to −x; in the robot frame its lateral part is
        // −sin(−20°) > 0, i.e. a left (positive) turn away from the wall.
        let grad_lateral = -(-s.theta).sin();
        assert!(om.signum() == grad_lateral.signum() && om.abs() > 0.0, "{om}");
        assert!(v < 0.3);
    }

    #[test]
    fn avoid_symmetric_cancels() {
        let w = Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 1.0), 0.0).unwrap();
        let s = RobotState::new(Point::new(5.0, 0.5), 0.0, 0.3);
        let field = AvoidField { r_obstacle: 0.8, ..AvoidField::default() };
        let lim = Limits::search();
        let (v, om) = avoid_blend(&s, &w, &[], (0.3, 0.0), &sensor(), &field, &lim);
        assert!(om.abs() < 1e-9, "{om}");
        assert!(v < 0.3);
    }

    #[test]
    fn et_budget() {
        let nav = WaypointNav { arrival_tol: 0.2, et_factor: 2.0 };
        assert!(!et_timeout(0.0, 9.0, 2.0, 0.4, &nav));
        assert!(et_timeout(0.0, 10.1, 2.0, 0.4, &nav));
        assert_eq!(WaypointNav { arrival_tol: 0.2, et_factor: 0.9 }.validate(), Err(MotionError::EtFactor(0.9)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn commands_respect_limits(v in -5.0..5.0f64, om in -10.0..10.0f64, v0 in 0.0..0.4f64, w0 in -1.74..1.74f64) {
                let lim = Limits::search();
                let s = RobotState { v: v0, omega: w0, ..RobotState::default() };
                let n = integrate(&s, v, om, 0.1, &lim);
                prop_assert!(n.v >= lim.v_min && n.v <= lim.v_max);
                prop_assert!(n.omega.abs() <= lim.omega_max);
                prop_assert!(n.theta > -PI && n.theta <= PI);
                let f = Limits::formation();
                let m = integrate(&s, v, om, 0.1, &f);
                prop_assert!(m.v >= 0.2 && m.v <= 1.5 && m.omega.abs() <= 2.0);
            }
        }
    }
}
