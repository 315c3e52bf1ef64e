//! Continuous two-stage episode: consensus locating, then lattice search with map exchange.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::rng::{stream, Subsystem};
use super::scenario::Scenario;
use crate::consensus::{consensus_converged, locating_update, spreads, LocatingState};
use crate::motion::{avoid_blend, et_timeout, integrate, track_waypoint, RobotState};
use crate::netsim::{build_graph, flood_exchange, CommGraph, MapPacket};
use crate::search::{decide, mission_step, sense_targets, Decision, Mission, PolicyChoice, TargetLedger};
use crate::topomap::{TopoMap, VertexState};
use crate::trigrid::{hex_distance, nearest_vertex, six_neighbors, vertex_point, GridFrame, LatticeCoord};
use crate::world::{Point, Workspace, WorldError};

/// Rings searched around the nearest vertex for an admissible one.
const SNAP_RINGS: i64 = 6;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    World(#[from] WorldError),
    #[error("could not place {0} robots after {1} attempts")]
    Placement(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Locate,
    Search,
    Retreat,
    Idle,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Locate => "locate",
            Mode::Search => "search",
            Mode::Retreat => "retreat",
            Mode::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub mode: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub consensus_rounds: usize,
    pub consensus_converged: bool,
    pub stage_one_time: f64,
    /// Present iff the mission terminated.
    pub completion_ticks: Option<u64>,
    pub completion_time: Option<f64>,
    pub path_length: Vec<f64>,
    /// Distinct vertices visited by anyone.
    pub visited_vertices: usize,
    /// Size of the reachable admissible lattice region.
    pub region_vertices: usize,
    pub revisits: usize,
    /// Decisions that picked a vertex another robot was already heading to or standing on.
    pub conflicts: usize,
    pub decisions: Vec<usize>,
    pub deleted_vertices: usize,
    pub targets_detected: usize,
}

impl RunMetrics {
    pub fn terminated(&self) -> bool {
        self.completion_ticks.is_some()
    }

    pub fn coverage(&self) -> f64 {
        if self.region_vertices == 0 {
            return 1.0;
        }
        self.visited_vertices as f64 / self.region_vertices as f64
    }
}

#[derive(Debug, Clone)]
pub struct Locating {
    pub starts: Vec<(Point, f64)>,
    pub states: Vec<LocatingState>,
    /// Spread per round, starting with the initial one.
    pub spreads: Vec<(f64, f64)>,
    pub rounds: usize,
    pub converged: bool,
    /// Final vertex of each robot in its own frame.
    pub vertices: Vec<Option<LatticeCoord>>,
    pub robots: Vec<RobotState>,
    pub ticks: u64,
    pub path_length: Vec<f64>,
}

impl Locating {
    pub fn vertex_points(&self, side: f64) -> Vec<Option<Point>> {
        self.vertices.iter().zip(&self.states).map(|(c, s)| c.map(|c| vertex_point(&s.frame(side), c))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub metrics: RunMetrics,
    pub trajectory: Vec<TrajectorySample>,
    pub locating: Locating,
    pub maps: Vec<TopoMap>,
    pub region: BTreeSet<LatticeCoord>,
}

/// Random starts: admissible, at least `min_separation` apart, and each robot within
/// `connect_fraction · r_c` of an earlier one so the initial graph is connected.
pub fn place_robots(s: &Scenario, w: &Workspace, rng: &mut ChaCha8Rng) -> Result<Vec<(Point, f64)>, EngineError> {
    if let Some(p) = &s.robots.poses {
        return Ok(p.iter().map(|p| (Point::new(p[0], p[1]), p[2])).collect());
    }
    let pl = &s.robots.placement;
    let reach = pl.connect_fraction * s.search.r_c;
    let (lo, hi) = w.bounds();
    let mut out: Vec<(Point, f64)> = Vec::with_capacity(s.robots.count);
    let mut attempts = 0;
    while out.len() < s.robots.count {
        attempts += 1;
        if attempts > pl.max_attempts {
            return Err(EngineError::Placement(s.robots.count, pl.max_attempts));
        }
        let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if !w.admissible(p) || out.iter().any(|(q, _)| q.dist(p) < pl.min_separation) {
            continue;
        }
        if !out.is_empty() && out.iter().all(|(q, _)| q.dist(p) > reach) {
            continue;
        }
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        out.push((p, heading));
    }
    Ok(out)
}

/// Nearest admissible vertex of `f` to `p`; ties go to the smallest coordinate.
pub fn admissible_snap(f: &GridFrame, p: Point, w: &Workspace) -> Option<LatticeCoord> {
    let c0 = nearest_vertex(f, p);
    if w.admissible(vertex_point(f, c0)) {
        return Some(c0);
    }
    let mut best: Option<(f64, LatticeCoord)> = None;
    for da in -SNAP_RINGS..=SNAP_RINGS {
        for db in -SNAP_RINGS..=SNAP_RINGS {
            let c = LatticeCoord::new(c0.a + da, c0.b + db);
            if hex_distance(c, c0) > SNAP_RINGS {
                continue;
            }
            let q = vertex_point(f, c);
            if !w.admissible(q) {
                continue;
            }
            let d = q.dist(p);
            if best.is_none_or(|(bd, bc)| d < bd - 1e-12 || (d <= bd + 1e-12 && c < bc)) {
                best = Some((d, c));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Vertices reachable from `starts` through the same sensing test the robots use.
pub fn reachable_region(
    f: &GridFrame,
    starts: &[LatticeCoord],
    w: &Workspace,
    max_range: f64,
) -> BTreeSet<LatticeCoord> {
    let mut seen: BTreeSet<LatticeCoord> = starts.iter().copied().collect();
    let mut queue: VecDeque<LatticeCoord> = seen.iter().copied().collect();
    while let Some(c) = queue.pop_front() {
        let p = vertex_point(f, c);
        for n in six_neighbors(c) {
            if seen.contains(&n) {
                continue;
            }
            let q = vertex_point(f, n);
            if p.dist(q) <= max_range && w.line_of_sight(p, q) && w.admissible(q) {
                seen.insert(n);
                queue.push_back(n);
            }
        }
    }
    seen
}

struct Recorder {
    every: u64,
    out: Vec<TrajectorySample>,
}

impl Recorder {
    fn record(&mut self, tick: u64, t: f64, robots: &[RobotState], modes: &[Mode]) {
        if !tick.is_multiple_of(self.every) {
            return;
        }
        for (i, (r, m)) in robots.iter().zip(modes).enumerate() {
            self.out.push(TrajectorySample { t, robot: i, x: r.x, y: r.y, theta: r.theta, mode: m.label() });
        }
    }
}

struct Ctx<'a> {
    s: &'a Scenario,
    w: &'a Workspace,
}

impl Ctx<'_> {
    fn step(&self, robots: &mut [RobotState], path: &mut [f64], targets: &[Option<Point>]) {
        let snapshot: Vec<Point> = robots.iter().map(RobotState::pos).collect();
        for (i, r) in robots.iter_mut().enumerate() {
            let cmd = match targets[i] {
                Some(wp) => {
                    let raw = track_waypoint(r, wp, &self.s.limits, &self.s.nav);
                    avoid_blend(r, self.w, &snapshot, raw, &self.s.sensor, &self.s.avoid, &self.s.limits)
                }
                None => (0.0, 0.0),
            };
            let next = integrate(r, cmd.0, cmd.1, self.s.dt, &self.s.limits);
            path[i] += next.pos().dist(r.pos());
            *r = next;
        }
    }
}

/// Stage one: synchronous averaging rounds. Each round the robots drive to the admissible
/// vertex of their current lattice nearest their start, then exchange states with their
/// neighbours. Snapping around the start keeps every robot within one cell of where it began,
/// so a start graph with slack of two cell radii stays connected throughout.
pub fn run_locating(s: &Scenario, seed: u64) -> Result<Locating, EngineError> {
    let mut rec = Recorder { every: s.search.sample_every, out: Vec::new() };
    run_locating_inner(s, seed, &mut rec)
}

fn run_locating_inner(s: &Scenario, seed: u64, rec: &mut Recorder) -> Result<Locating, EngineError> {
    let w = s.workspace()?;
    let ctx = Ctx { s, w: &w };
    let starts = place_robots(s, &w, &mut stream(seed, Subsystem::Placement, 0))?;
    let n = starts.len();
    let side = s.search.side;
    let mut robots: Vec<RobotState> = starts.iter().map(|&(p, h)| RobotState::new(p, h, 0.0)).collect();
    let mut states: Vec<LocatingState> = starts.iter().map(|&(p, h)| LocatingState::from_pose(p, h)).collect();
    let mut path = vec![0.0; n];
    let mut hist = vec![spreads(&states)];
    let mut ticks = 0u64;
    let modes = vec![Mode::Locate; n];
    let mut rounds = 0;
    let mut converged = consensus_converged(&states, s.search.tol_theta, s.search.tol_q);
    while !converged && rounds < s.search.max_rounds {
        let g = build_graph(&robots.iter().map(RobotState::pos).collect::<Vec<_>>(), s.search.r_c);
        let next: Vec<LocatingState> = (0..n)
            .map(|i| {
                let nb: Vec<LocatingState> = g.neighbors(i).iter().map(|&j| states[j]).collect();
                locating_update(&states[i], &nb)
            })
            .collect();
        let goals: Vec<Option<Point>> = (0..n)
            .map(|i| {
                admissible_snap(&states[i].frame(side), starts[i].0, &w)
                    .map(|c| vertex_point(&states[i].frame(side), c))
            })
            .collect();
        drive(&ctx, &mut robots, &mut path, &goals, &mut ticks, rec, &modes);
        states = next;
        rounds += 1;
        hist.push(spreads(&states));
        converged = consensus_converged(&states, s.search.tol_theta, s.search.tol_q);
    }
    let vertices: Vec<Option<LatticeCoord>> =
        (0..n).map(|i| admissible_snap(&states[i].frame(side), starts[i].0, &w)).collect();
    let goals: Vec<Option<Point>> =
        (0..n).map(|i| vertices[i].map(|c| vertex_point(&states[i].frame(side), c))).collect();
    drive(&ctx, &mut robots, &mut path, &goals, &mut ticks, rec, &modes);
    Ok(Locating { starts, states, spreads: hist, rounds, converged, vertices, robots, ticks, path_length: path })
}

/// Drives every robot to its goal; a robot stops on arrival or when its travel budget runs out.
fn drive(
    ctx: &Ctx,
    robots: &mut [RobotState],
    path: &mut [f64],
    goals: &[Option<Point>],
    ticks: &mut u64,
    rec: &mut Recorder,
    modes: &[Mode],
) {
    let s = ctx.s;
    let n = robots.len();
    let tol = s.nav.arrival_tol;
    let start = *ticks as f64 * s.dt;
    let dist0: Vec<f64> = (0..n).map(|i| goals[i].map_or(0.0, |g| g.dist(robots[i].pos()))).collect();
    let mut active: Vec<Option<Point>> = (0..n).map(|i| goals[i].filter(|g| g.dist(robots[i].pos()) > tol)).collect();
    while active.iter().any(Option::is_some) {
        ctx.step(robots, path, &active);
        *ticks += 1;
        let now = *ticks as f64 * s.dt;
        rec.record(*ticks, now, robots, modes);
        for i in 0..n {
            if let Some(g) = active[i] {
                if g.dist(robots[i].pos()) <= tol || et_timeout(start, now, dist0[i], s.limits.v_max, &s.nav) {
                    active[i] = None;
                }
            }
        }
    }
    for r in robots.iter_mut() {
        r.v = 0.0;
        r.omega = 0.0;
    }
}

#[derive(Debug, Clone)]
struct Leg {
    route: VecDeque<LatticeCoord>,
    goal: LatticeCoord,
    start: f64,
    budget: f64,
    retreat: bool,
    /// Another robot came within avoidance range during the leg.
    crowded: bool,
}

struct Searcher {
    current: LatticeCoord,
    leg: Option<Leg>,
    ledger: TargetLedger,
    sent_targets: BTreeSet<usize>,
    rng: ChaCha8Rng,
    seq: u64,
    decisions: usize,
}

impl Searcher {
    fn mode(&self) -> Mode {
        match &self.leg {
            None => Mode::Idle,
            Some(l) if l.retreat => Mode::Retreat,
            Some(_) => Mode::Search,
        }
    }
}

/// A hop is traversable when the straight segment keeps the workspace margin.
fn clear_hop(map: &TopoMap, w: &Workspace, a: LatticeCoord, b: LatticeCoord) -> bool {
    w.segment_clearance(map.point(a), map.point(b)) >= w.margin()
}

/// Direct hop, or the shortest clear detour when the direct one grazes an obstacle.
fn hop_route(map: &TopoMap, w: &Workspace, from: LatticeCoord, to: LatticeCoord) -> VecDeque<LatticeCoord> {
    if from == to || clear_hop(map, w, from, to) {
        return VecDeque::from([to]);
    }
    route(map, from, to, |a, b| clear_hop(map, w, a, b)).unwrap_or_else(|| VecDeque::from([to]))
}

/// Shortest hop path over the map's six-neighbour graph, excluding `from`.
fn route(
    map: &TopoMap,
    from: LatticeCoord,
    to: LatticeCoord,
    clear: impl Fn(LatticeCoord, LatticeCoord) -> bool,
) -> Option<VecDeque<LatticeCoord>> {
    if from == to {
        return Some(VecDeque::from([to]));
    }
    let mut prev = std::collections::BTreeMap::new();
    prev.insert(from, from);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        for n in map.neighbors_in_map(c) {
            if prev.contains_key(&n) || !clear(c, n) {
                continue;
            }
            prev.insert(n, c);
            if n == to {
                let mut out = VecDeque::new();
                let mut k = n;
                while k != from {
                    out.push_front(k);
                    k = prev[&k];
                }
                return Some(out);
            }
            queue.push_back(n);
        }
    }
    None
}

fn route_length(map: &TopoMap, pos: Point, r: &VecDeque<LatticeCoord>) -> f64 {
    let mut at = pos;
    let mut len = 0.0;
    for &c in r {
        let p = map.point(c);
        len += at.dist(p);
        at = p;
    }
    len
}

fn mark_and_detect(map: &mut TopoMap, c: LatticeCoord, w: &Workspace, s: &Scenario) -> bool {
    let was_visited = map.get(c) == Some(VertexState::Visited);
    map.mark_visited(c);
    map.detect_vertices(map.point(c), w, &s.sensor);
    was_visited
}

#[allow(clippy::needless_range_loop)]
pub fn run_episode(s: &Scenario, seed: u64) -> Result<Episode, EngineError> {
    let w = s.workspace()?;
    let ctx = Ctx { s, w: &w };
    let mut rec = Recorder { every: s.search.sample_every, out: Vec::new() };
    let loc = run_locating_inner(s, seed, &mut rec)?;
    let n = loc.robots.len();
    let side = s.search.side;
    let dt = s.dt;
    let t0 = loc.ticks as f64 * dt;
    let policy = s.search.policy;
    let mission = &s.search.mission;
    let n_targets = match mission {
        Mission::Targets { targets } => targets.len(),
        _ => 0,
    };
    let target_points: &[Point] = match mission {
        Mission::Targets { targets } => targets,
        _ => &[],
    };

    let mut robots = loc.robots.clone();
    let mut path = loc.path_length.clone();
    let mut maps: Vec<TopoMap> = Vec::with_capacity(n);
    let mut bots: Vec<Searcher> = Vec::with_capacity(n);
    for i in 0..n {
        let frame = loc.states[i].frame(side);
        let mut map = TopoMap::new(frame);
        let current = loc.vertices[i].unwrap_or_else(|| nearest_vertex(&frame, robots[i].pos()));
        mark_and_detect(&mut map, current, &w, s);
        maps.push(map);
        bots.push(Searcher {
            current,
            leg: None,
            ledger: TargetLedger::new(n_targets),
            sent_targets: BTreeSet::new(),
            rng: stream(seed, Subsystem::Decision, i),
            seq: 0,
            decisions: 0,
        });
    }
    let frame0 = *maps[0].frame();
    let starts: Vec<LatticeCoord> = (0..n).map(|i| nearest_vertex(&frame0, maps[i].point(bots[i].current))).collect();
    let region = reachable_region(&frame0, &starts, &w, s.sensor.max_range);
    let cap = policy.step_cap_factor() * region.len().max(1);
    let budget_ticks = (s.nav.et_factor * side / (s.limits.v_max * dt)).ceil() as u64;
    let max_ticks = match s.search.max_time {
        Some(t) => (t / dt).ceil() as u64,
        None => (cap as u64 + 10) * budget_ticks * 8,
    };

    let mut global = TargetLedger::new(n_targets);
    let mut metrics = RunMetrics {
        consensus_rounds: loc.rounds,
        consensus_converged: loc.converged,
        stage_one_time: t0,
        ..Default::default()
    };
    let mut prev_comp: Vec<usize> = vec![usize::MAX; n];
    let mut tick: u64 = 0;
    let mut capped = false;
    let mut done = mission_step(mission, &mut global, &mut maps, &positions(&robots), s.sensor.r_s, 0);

    while !done && !capped && tick < max_ticks {
        // Decisions for idle robots.
        for i in 0..n {
            if !replan_needed(&bots[i], &maps[i], policy) {
                continue;
            }
            let pose = robots[i].pos();
            let from = match &bots[i].leg {
                Some(l) => *l.route.front().expect("legs are never empty"),
                None => bots[i].current,
            };
            let targets_left = !bots[i].ledger.all_detected();
            let d = decide(policy, mission, targets_left, &maps[i], from, pose, &mut bots[i].rng);
            let Decision::Move(c) = d else {
                bots[i].leg = None;
                continue;
            };
            bots[i].decisions += 1;
            if bots[i].decisions > cap {
                capped = true;
            }
            let busy = (0..n).any(|j| {
                j != i
                    && match &bots[j].leg {
                        Some(l) => l.goal == c,
                        None => bots[j].current == c,
                    }
            });
            metrics.conflicts += usize::from(busy);
            let r = match policy {
                PolicyChoice::Modified => {
                    let m = &maps[i];
                    let mut r = route(m, from, c, |a, b| clear_hop(m, &w, a, b))
                        .or_else(|| route(m, from, c, |_, _| true))
                        .unwrap_or_else(|| VecDeque::from([c]));
                    if bots[i].leg.is_some() && r.front() != Some(&from) {
                        r.push_front(from);
                    }
                    r
                }
                _ => hop_route(&maps[i], &w, from, c),
            };
            let budget = route_length(&maps[i], pose, &r);
            bots[i].leg =
                Some(Leg { route: r, goal: c, start: tick as f64 * dt, budget, retreat: false, crowded: false });
        }

        let goals: Vec<Option<Point>> =
            (0..n).map(|i| bots[i].leg.as_ref().map(|l| maps[i].point(*l.route.front().unwrap()))).collect();
        ctx.step(&mut robots, &mut path, &goals);
        tick += 1;
        let now = tick as f64 * dt;
        let modes: Vec<Mode> = bots.iter().map(Searcher::mode).collect();
        rec.record(loc.ticks + tick, t0 + now, &robots, &modes);

        // Local events.
        let all_pos = positions(&robots);
        for i in 0..n {
            let pos = robots[i].pos();
            let b = &mut bots[i];
            let map = &mut maps[i];
            if let Some(leg) = &mut b.leg {
                leg.crowded |= all_pos.iter().enumerate().any(|(j, p)| j != i && p.dist(pos) < s.avoid.r_robot);
                let front = *leg.route.front().unwrap();
                let wp = map.point(front);
                // Two robots converging on one waypoint deflect each other short of it.
                let contest = 0.5 * s.avoid.r_robot;
                let contended =
                    wp.dist(pos) < contest && all_pos.iter().enumerate().any(|(j, p)| j != i && p.dist(wp) < contest);
                if wp.dist(pos) <= s.nav.arrival_tol || contended {
                    b.current = front;
                    if !leg.retreat {
                        metrics.revisits += usize::from(mark_and_detect(map, front, &w, s));
                    }
                    leg.route.pop_front();
                    if leg.route.is_empty() {
                        b.leg = None;
                    }
                } else if et_timeout(leg.start, now, leg.budget, s.limits.v_max, &s.nav) {
                    let goal_pt = map.point(leg.goal);
                    let occupied = all_pos.iter().enumerate().any(|(j, p)| j != i && p.dist(goal_pt) < s.avoid.r_robot);
                    if occupied || leg.crowded {
                        // Traffic, not the environment, ran the clock down: give up the leg but keep the vertex.
                        b.leg = None;
                    } else if leg.retreat {
                        b.current = nearest_entry(map, pos).unwrap_or(b.current);
                        b.leg = None;
                    } else {
                        if map.get(leg.goal) == Some(VertexState::Unvisited) && map.delete(leg.goal) {
                            metrics.deleted_vertices += 1;
                        }
                        let back = nearest_entry(map, pos).unwrap_or(b.current);
                        let budget = map.point(back).dist(pos).max(side);
                        b.leg = Some(Leg {
                            route: VecDeque::from([back]),
                            goal: back,
                            start: now,
                            budget,
                            retreat: true,
                            crowded: false,
                        });
                    }
                }
            }
            let c = nearest_vertex(map.frame(), pos);
            if map.get(c) == Some(VertexState::Unvisited) && map.point(c).dist(pos) <= s.nav.arrival_tol {
                mark_and_detect(map, c, &w, s);
            }
            if n_targets > 0 {
                sense_targets(target_points, &[pos], s.sensor.r_s, &mut b.ledger);
            }
        }

        // Communication.
        let pos = positions(&robots);
        let g = build_graph(&pos, s.search.r_c);
        let comp = g.components();
        let mut outboxes: Vec<Vec<MapPacket>> = vec![Vec::new(); n];
        for i in 0..n {
            let rejoined = (0..n).any(|j| j != i && comp[j] == comp[i] && prev_comp[j] != prev_comp[i]);
            let delta = maps[i].take_delta();
            let b = &mut bots[i];
            let fresh: Vec<usize> = b.ledger.detected().filter(|j| !b.sent_targets.contains(j)).collect();
            let packet = if rejoined {
                let mut p = maps[i].to_packet(i, b.seq);
                p.detected_targets = b.ledger.detected().collect();
                Some(p)
            } else if !delta.is_empty() || !fresh.is_empty() {
                Some(MapPacket {
                    sender: i,
                    seq: b.seq,
                    frame: *maps[i].frame(),
                    vertices: delta.vertices,
                    deleted: delta.deleted,
                    detected_targets: fresh,
                })
            } else {
                None
            };
            if let Some(p) = packet {
                b.sent_targets.extend(p.detected_targets.iter().copied());
                b.seq += 1;
                outboxes[i].push(p);
            }
        }
        prev_comp = comp;
        if outboxes.iter().any(|o| !o.is_empty()) {
            deliver(&g, &outboxes, &mut maps, &mut bots);
        }

        done = mission_step(mission, &mut global, &mut maps, &pos, s.sensor.r_s, tick);
    }

    let frame0 = *maps[0].frame();
    let mut visited = BTreeSet::new();
    for m in &maps {
        for (c, st) in m.iter() {
            if st == VertexState::Visited {
                visited.insert(nearest_vertex(&frame0, m.point(c)));
            }
        }
    }
    metrics.visited_vertices = visited.intersection(&region).count();
    metrics.region_vertices = region.len();
    metrics.path_length = path;
    metrics.decisions = bots.iter().map(|b| b.decisions).collect();
    metrics.targets_detected = global.detected().count();
    if done {
        metrics.completion_ticks = Some(tick);
        metrics.completion_time = Some(tick as f64 * dt);
    }
    Ok(Episode { metrics, trajectory: rec.out, locating: loc, maps, region })
}

fn positions(robots: &[RobotState]) -> Vec<Point> {
    robots.iter().map(RobotState::pos).collect()
}

fn nearest_entry(map: &TopoMap, p: Point) -> Option<LatticeCoord> {
    let mut best: Option<(f64, LatticeCoord)> = None;
    for (c, _) in map.iter() {
        let d = map.point(c).dist(p);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

fn replan_needed(b: &Searcher, map: &TopoMap, policy: PolicyChoice) -> bool {
    match &b.leg {
        None => true,
        Some(l) if l.retreat => false,
        // The modified policy drops goals that someone else has already covered.
        Some(l) => policy == PolicyChoice::Modified && map.get(l.goal) != Some(VertexState::Unvisited),
    }
}

fn deliver(g: &CommGraph, outboxes: &[Vec<MapPacket>], maps: &mut [TopoMap], bots: &mut [Searcher]) {
    let inbox = flood_exchange(g, outboxes);
    for (i, packets) in inbox.iter().enumerate() {
        for p in packets {
            // Frames agree to stage-one tolerance; a mismatch just drops the packet.
            let _ = maps[i].merge(p);
            for &j in &p.detected_targets {
                bots[i].ledger.set(j);
            }
        }
        // Merged content is already known to the whole component.
        maps[i].take_delta();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn tiny(policy: &str, robots: usize) -> Scenario {
        let text = format!(
            r#"
schema_version = 1
[workspace]
boundary = [[0, 0], [9, 0], [9, 7], [0, 7]]
[robots]
count = {robots}
[search]
policy = "{policy}"
"#
        );
        Scenario::from_toml_str(&text, Path::new("tiny")).unwrap()
    }

    #[test]
    fn modified_single_robot_covers_tiny_arena() {
        let e = run_episode(&tiny("modified", 1), 3).unwrap();
        assert!(e.metrics.terminated());
        assert!(e.metrics.consensus_converged);
        assert_eq!(e.metrics.visited_vertices, e.metrics.region_vertices);
        assert!(e.metrics.region_vertices >= 8);
        assert!(e.maps[0].iter().all(|(_, s)| s == VertexState::Visited));
    }

    #[test]
    fn same_seed_replays() {
        let s = tiny("random", 2);
        let a = run_episode(&s, 11).unwrap();
        let b = run_episode(&s, 11).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn snap_avoids_inadmissible_vertices() {
        let w = Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.45).unwrap();
        let f = GridFrame::new(Point::new(0.0, 0.0), 0.0, 1.0);
        // Nearest vertex is the corner itself.
        let c = admissible_snap(&f, Point::new(0.1, 0.1), &w).unwrap();
        assert!(w.admissible(vertex_point(&f, c)));
        assert_eq!(c, LatticeCoord::new(0, 1));
    }

    #[test]
    fn region_matches_hexagon() {
        let r = 2.6;
        let boundary: Vec<Point> =
            (0..6).map(|k| Point::from_polar(r, k as f64 * std::f64::consts::FRAC_PI_3)).collect();
        let w = Workspace::new(boundary, vec![], 0.35).unwrap();
        let f = GridFrame::new(Point::new(0.0, 0.0), 0.0, 2.0);
        assert_eq!(reachable_region(&f, &[LatticeCoord::new(0, 0)], &w, 5.0).len(), 7);
    }

    #[test]
    fn route_is_shortest() {
        let f = GridFrame::new(Point::new(0.0, 0.0), 0.0, 1.0);
        let mut m = TopoMap::new(f);
        for a in 0..5 {
            m.insert_detected(LatticeCoord::new(a, 0));
        }
        let r = route(&m, LatticeCoord::new(0, 0), LatticeCoord::new(4, 0), |_, _| true).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r.back(), Some(&LatticeCoord::new(4, 0)));
        assert!(route(&m, LatticeCoord::new(0, 0), LatticeCoord::new(9, 9), |_, _| true).is_none());
    }

    #[test]
    fn hop_past_a_corner_detours() {
        // Small pillar sitting just above the segment between two adjacent vertices.
        let w = Workspace::new(
            vec![Point::new(-5.0, -5.0), Point::new(5.0, -5.0), Point::new(5.0, 5.0), Point::new(-5.0, 5.0)],
            vec![vec![Point::new(0.7, 0.2), Point::new(1.3, 0.2), Point::new(1.3, 1.0), Point::new(0.7, 1.0)]],
            0.35,
        )
        .unwrap();
        let f = GridFrame::new(Point::new(0.0, 0.0), 0.0, 2.0);
        let mut m = TopoMap::new(f);
        for c in [(0, 0), (1, 0), (0, -1), (1, -1), (-1, 0), (0, 1)] {
            m.insert_detected(LatticeCoord::new(c.0, c.1));
        }
        let (from, to) = (LatticeCoord::new(0, 0), LatticeCoord::new(1, 0));
        assert!(!clear_hop(&m, &w, from, to));
        let r = hop_route(&m, &w, from, to);
        assert_eq!(r, VecDeque::from([LatticeCoord::new(1, -1), to]));
        let mut at = from;
        for &c in &r {
            assert!(clear_hop(&m, &w, at, c));
            at = c;
        }
        // Nothing is blocked in open space.
        let open = Workspace::rectangle(Point::new(-5.0, -5.0), Point::new(5.0, 5.0), 0.35).unwrap();
        assert_eq!(hop_route(&m, &open, from, to), VecDeque::from([to]));
    }
}
