//! Formation episodes: consensus-driven pursuit of moving slots, boundary following around
//! obstacles and optional anonymous slot assignment.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::engine::{EngineError, TrajectorySample};
use super::rng::{stream, Subsystem};
use super::scenario::{Course, FormationSpec};
use crate::formation::{
    anonymous_reassign, boundary_follow, fictitious_target, formation_consensus_update, formation_control, slot_graph,
    AnonymousParams, AnonymousState, Configuration, FormationConsensus, Mode, ModeArbiter, Side,
};
use crate::motion::{integrate, RobotState};
use crate::netsim::build_graph;
use crate::world::{wrap_angle, Point, Ray, Workspace};

/// Ray spacing of the range fan.
const FAN_STEP_DEG: usize = 1;
const BISECT_ITERS: usize = 12;
/// Boundary-following samples this soon after engaging are transients, not standoff.
pub const SETTLE_TIME: f64 = 2.0;
/// Formation tolerances.
pub const OFFSET_TOL: f64 = 0.1;
pub const HEADING_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormationMetrics {
    pub final_offset_error: f64,
    pub final_heading_spread: f64,
    /// Earliest time after which the formation stayed within tolerance.
    pub settle_time: Option<f64>,
    pub max_abs_omega: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// Ticks any robot spent outside free space.
    pub penetrations: usize,
    pub boundary_ticks: usize,
    pub standoff_samples: usize,
    pub standoff_violations: usize,
    pub standoff_min: f64,
    pub standoff_max: f64,
    /// When every robot was past the course's clear line in pursuit mode.
    pub cleared_time: Option<f64>,
    /// Formation within tolerance at the end, after clearing.
    pub reformed: bool,
    pub assignment: Vec<usize>,
    pub permutation: bool,
}

#[derive(Debug, Clone)]
pub struct FormationEpisode {
    pub metrics: FormationMetrics,
    pub trajectory: Vec<TrajectorySample>,
    pub config: Configuration,
}

/// `(bearing, range)` fan over ±90° of the heading, misses reported at `max_range`.
pub fn range_fan(w: &Workspace, p: Point, heading: f64, max_range: f64) -> Vec<(f64, f64)> {
    (0..=180)
        .step_by(FAN_STEP_DEG)
        .map(|k| {
            let a = -FRAC_PI_2 + (k as f64).to_radians();
            (a, w.raycast(Ray::new(p, heading + a, max_range)).unwrap_or(max_range))
        })
        .collect()
}

/// Adds the reading where the followed surface leaves the range `r_s`, found by bisection
/// between the in-range ray on `side` nearest the heading and its out-of-range neighbour.
pub fn refine_edge(w: &Workspace, p: Point, heading: f64, fan: &mut Vec<(f64, f64)>, side: Side, r_s: f64) {
    let sign = if side == Side::Left { 1.0 } else { -1.0 };
    let Some(hit) = (0..fan.len())
        .filter(|&k| fan[k].0 * sign >= 0.0 && fan[k].1 < r_s)
        .min_by(|&a, &b| fan[a].0.abs().total_cmp(&fan[b].0.abs()))
    else {
        return;
    };
    // Neighbour one step closer to the heading.
    let next = if sign > 0.0 { hit.checked_sub(1) } else { Some(hit + 1).filter(|&k| k < fan.len()) };
    let Some(miss) = next.filter(|&k| fan[k].1 >= r_s) else { return };
    let (mut a_in, mut a_out) = (fan[hit].0, fan[miss].0);
    let mut best = fan[hit];
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (a_in + a_out);
        match w.raycast(Ray::new(p, heading + mid, r_s)) {
            Some(d) if d < r_s => {
                a_in = mid;
                best = (mid, d);
            }
            _ => a_out = mid,
        }
    }
    fan.push(best);
}

fn cone_min(fan: &[(f64, f64)], center: f64, half: f64) -> Option<f64> {
    fan.iter().filter(|r| wrap_angle(r.0 - center).abs() <= half).map(|r| r.1).min_by(f64::total_cmp)
}

/// Largest pairwise offset error against the configuration, measured in the mean θ̃ frame, and
/// the largest pairwise heading gap.
pub fn formation_error(robots: &[RobotState], slots: &[usize], cfg: &Configuration, theta_t: f64) -> (f64, f64) {
    let mut off: f64 = 0.0;
    let mut head: f64 = 0.0;
    for i in 0..robots.len() {
        for j in i + 1..robots.len() {
            let rel = (robots[i].pos() - robots[j].pos()).rotate(-theta_t);
            let want = cfg.offsets[slots[i]] - cfg.offsets[slots[j]];
            off = off.max(rel.dist(want));
            head = head.max(wrap_angle(robots[i].theta - robots[j].theta).abs());
        }
    }
    (off, head)
}

fn is_permutation(slots: &[usize]) -> bool {
    let mut s = slots.to_vec();
    s.sort_unstable();
    s.iter().enumerate().all(|(i, &k)| i == k)
}

pub fn run_formation(
    spec: &FormationSpec,
    course: &Course,
    n: usize,
    seed: u64,
) -> Result<FormationEpisode, EngineError> {
    let w = course.workspace.build()?;
    let cfg = spec.configuration(n);
    let lim = &spec.limits;
    let smp = &spec.sampling;
    let dt = smp.dt;
    let has_obstacles = !w.obstacles().is_empty();
    let spawn = course.spawn.unwrap_or(spec.spawn);

    let mut rng = stream(seed, Subsystem::Formation, 0);
    let mut robots = Vec::with_capacity(n);
    let mut fc = Vec::with_capacity(n);
    while robots.len() < n {
        let p = Point::new(rng.random_range(spawn[0].x..=spawn[1].x), rng.random_range(spawn[0].y..=spawn[1].y));
        if !w.contains_free(p) || robots.iter().any(|r: &RobotState| r.pos().dist(p) < 1.0) {
            continue;
        }
        let h = rng.random_range(-spec.heading_spread..=spec.heading_spread);
        let v = rng.random_range(spec.speed_range[0]..=spec.speed_range[1]);
        robots.push(RobotState::new(p, h, v));
        fc.push(FormationConsensus { theta_t: h, x_t: 0.0, y_t: 0.0, v_t: v });
    }
    let anon: Option<AnonymousParams> = spec.anonymous;
    let slot_adj = anon.map(|a| slot_graph(&cfg, &a));
    let mut anon_rng: Vec<ChaCha8Rng> = (0..n).map(|i| stream(seed, Subsystem::Anonymous, i)).collect();
    let mut slots: Vec<usize> = match anon {
        Some(_) => anon_rng.iter_mut().map(|r| r.random_range(0..n)).collect(),
        None => (0..n).collect(),
    };
    let mut arbiters = vec![ModeArbiter::new(spec.avoid.r_s, spec.hysteresis); n];
    let mut sides = vec![Side::Right; n];
    let mut engaged_at = vec![0.0; n];

    let ticks = (spec.t_end / dt).round() as u64;
    let mut m = FormationMetrics { min_v: f64::INFINITY, standoff_min: f64::INFINITY, ..Default::default() };
    let mut traj = Vec::new();
    let mut in_tol_since: Option<f64> = None;
    let d0 = spec.avoid.d0();
    let cone = spec.avoid.phi0;

    for k in 0..ticks {
        let t = k as f64 * dt;
        let pos: Vec<Point> = robots.iter().map(RobotState::pos).collect();
        let g = build_graph(&pos, spec.r_c);

        if let (Some(a), Some(adj)) = (anon, &slot_adj) {
            if k > 0 && k % a.period_n == 0 {
                let claims = slots.clone();
                for i in 0..n {
                    let st = AnonymousState { r_idx: claims[i], params: a };
                    slots[i] = anonymous_reassign(&st, i, &pos, &fc[i], &cfg, adj, t, &mut anon_rng[i]).r_idx;
                }
            }
        }

        let mut next = robots.clone();
        for i in 0..n {
            let s = &robots[i];
            let target = fictitious_target(s, &fc[i], &cfg, slots[i], t);
            let mut cmd = formation_control(s, &target, &fc[i], lim, smp);
            if has_obstacles {
                let mut fan = range_fan(&w, s.pos(), s.theta, spec.avoid.r_s);
                let to_g = wrap_angle((target.g - s.pos()).angle() - s.theta);
                let mode = arbiters[i].mode;
                let near = match mode {
                    Mode::FormationPursuit => [cone_min(&fan, 0.0, cone), cone_min(&fan, to_g, cone)]
                        .into_iter()
                        .flatten()
                        .min_by(f64::total_cmp),
                    Mode::BoundaryFollow => cone_min(&fan, to_g, cone),
                };
                let now = arbiters[i].step(near);
                if now == Mode::BoundaryFollow {
                    if mode == Mode::FormationPursuit {
                        sides[i] = Side::of(&fan, spec.avoid.r_s);
                        engaged_at[i] = t;
                    }
                    refine_edge(&w, s.pos(), s.theta, &mut fan, sides[i], spec.avoid.r_s);
                    cmd = boundary_follow(&fan, sides[i], &spec.avoid, lim, smp);
                    m.boundary_ticks += 1;
                    if t - engaged_at[i] >= SETTLE_TIME {
                        let d = w.edge_distance(s.pos());
                        m.standoff_samples += 1;
                        m.standoff_min = m.standoff_min.min(d);
                        m.standoff_max = m.standoff_max.max(d);
                        if (d - d0).abs() > 0.25 * d0 {
                            m.standoff_violations += 1;
                        }
                    }
                }
            }
            next[i] = integrate(s, cmd.0, cmd.1, dt, lim);
            m.max_abs_omega = m.max_abs_omega.max(next[i].omega.abs());
            m.min_v = m.min_v.min(next[i].v);
            m.max_v = m.max_v.max(next[i].v);
            if !w.contains_free(next[i].pos()) {
                m.penetrations += 1;
            }
        }

        let fc_next: Vec<FormationConsensus> = (0..n)
            .map(|i| {
                let nb: Vec<(Point, FormationConsensus)> = g.neighbors(i).iter().map(|&j| (pos[j], fc[j])).collect();
                formation_consensus_update(&fc[i], pos[i], next[i].pos(), &nb)
            })
            .collect();
        robots = next;
        fc = fc_next;

        let t1 = (k + 1) as f64 * dt;
        if (k + 1) % spec.sample_every == 0 {
            for (i, r) in robots.iter().enumerate() {
                let mode = match arbiters[i].mode {
                    Mode::FormationPursuit => "pursuit",
                    Mode::BoundaryFollow => "boundary",
                };
                traj.push(TrajectorySample { t: t1, robot: i, x: r.x, y: r.y, theta: r.theta, mode });
            }
        }
        if let (Some(x), None) = (course.clear_x, m.cleared_time) {
            if robots.iter().zip(&arbiters).all(|(r, a)| r.x > x && a.mode == Mode::FormationPursuit) {
                m.cleared_time = Some(t1);
            }
        }
        let theta_mean = fc.iter().map(|f| f.theta_t).sum::<f64>() / n as f64;
        let (off, head) = formation_error(&robots, &slots, &cfg, theta_mean);
        if off <= OFFSET_TOL && head <= HEADING_TOL && is_permutation(&slots) {
            in_tol_since.get_or_insert(t1);
        } else {
            in_tol_since = None;
        }
        m.final_offset_error = off;
        m.final_heading_spread = head;
    }
    m.settle_time = in_tol_since;
    m.permutation = is_permutation(&slots);
    m.reformed = in_tol_since.is_some() && course.clear_x.is_none_or(|_| m.cleared_time.is_some());
    m.assignment = slots;
    if m.min_v == f64::INFINITY {
        m.min_v = 0.0;
    }
    if m.standoff_samples == 0 {
        m.standoff_min = 0.0;
    }
    Ok(FormationEpisode { metrics: m, trajectory: traj, config: cfg })
}

/// Two robots claim the same slot and sit on it; each period both reassign from where they
/// stand and jump to their new claims. Returns the periods until the claims differ.
pub fn contention_periods<R: Rng + ?Sized>(
    cfg: &Configuration,
    params: AnonymousParams,
    start_slot: usize,
    max_periods: u64,
    rng: &mut R,
) -> Option<u64> {
    let adj = slot_graph(cfg, &params);
    let origin = FormationConsensus::default();
    let place = |slot: usize| crate::formation::slot_point(Point::default(), &origin, cfg, slot, 0.0);
    let mut claims = [start_slot, start_slot];
    for period in 1..=max_periods {
        let poses = [place(claims[0]), place(claims[1])];
        let old = claims;
        for i in 0..2 {
            // Anchor every robot at the origin.
            let fc = FormationConsensus { x_t: -poses[i].x, y_t: -poses[i].y, ..origin };
            let st = AnonymousState { r_idx: old[i], params };
            claims[i] = anonymous_reassign(&st, i, &poses, &fc, cfg, &adj, 0.0, rng).r_idx;
        }
        if claims[0] != claims[1] {
            return Some(period);
        }
    }
    None
}
