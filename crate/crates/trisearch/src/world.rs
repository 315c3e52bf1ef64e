//! Polygonal workspace: free-space membership, clearance and ray casting.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for on-edge decisions (metres).
pub const EPS_GEO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates counter-clockwise by `a` radians.
    pub fn rotate(self, a: f64) -> Point {
        let (s, c) = a.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub direction: f64,
    pub max_range: f64,
}

impl Ray {
    pub fn new(origin: Point, direction: f64, max_range: f64) -> Self {
        debug_assert!(max_range > 0.0);
        Self { origin, direction, max_range }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("polygon {0} has fewer than 3 vertices")]
    Degenerate(String),
    #[error("polygon {0} is self-intersecting")]
    SelfIntersecting(String),
    #[error("obstacle {0} is not strictly inside the boundary")]
    ObstacleOutside(usize),
    #[error("obstacles {0} and {1} overlap")]
    ObstaclesOverlap(usize, usize),
    #[error("margin must be finite and non-negative, got {0}")]
    BadMargin(f64),
    #[error("point ({0}, {1}) is not in free space")]
    NotFree(f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: Point,
    d: Point,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    boundary: Vec<Point>,
    obstacles: Vec<Vec<Point>>,
    margin: f64,
    edges: Vec<Edge>,
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() / 2.0
}

fn ccw(mut poly: Vec<Point>) -> Vec<Point> {
    if poly.len() > 1 && poly[0] == poly[poly.len() - 1] {
        poly.pop();
    }
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

fn poly_edges(poly: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

/// Proper or touching intersection of closed segments.
fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = (q2 - q1).cross(p1 - q1);
    let d2 = (q2 - q1).cross(p2 - q1);
    let d3 = (p2 - p1).cross(q1 - p1);
    let d4 = (p2 - p1).cross(q2 - p1);
    if ((d1 > EPS_GEO && d2 < -EPS_GEO) || (d1 < -EPS_GEO && d2 > EPS_GEO))
        && ((d3 > EPS_GEO && d4 < -EPS_GEO) || (d3 < -EPS_GEO && d4 > EPS_GEO))
    {
        return true;
    }
    let on = |a: Point, b: Point, p: Point| point_segment_distance(p, a, b) <= EPS_GEO;
    on(q1, q2, p1) || on(q1, q2, p2) || on(p1, p2, q1) || on(p1, p2, q2)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 { ((p - a).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + d * t)
}

fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Even-odd containment; points within `EPS_GEO` of an edge are reported as `None`.
fn point_in_polygon(poly: &[Point], p: Point) -> Option<bool> {
    let mut inside = false;
    for (a, b) in poly_edges(poly) {
        if point_segment_distance(p, a, b) <= EPS_GEO {
            return None;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    Some(inside)
}

fn polygons_touch(a: &[Point], b: &[Point]) -> bool {
    poly_edges(a).any(|(p1, p2)| poly_edges(b).any(|(q1, q2)| segments_intersect(p1, p2, q1, q2)))
}

impl Workspace {
    pub fn new(boundary: Vec<Point>, obstacles: Vec<Vec<Point>>, margin: f64) -> Result<Self, WorldError> {
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(WorldError::BadMargin(margin));
        }
        let boundary = ccw(boundary);
        if boundary.len() < 3 {
            return Err(WorldError::Degenerate("boundary".into()));
        }
        if !is_simple(&boundary) {
            return Err(WorldError::SelfIntersecting("boundary".into()));
        }
        let obstacles: Vec<Vec<Point>> = obstacles.into_iter().map(ccw).collect();
        for (i, o) in obstacles.iter().enumerate() {
            if o.len() < 3 {
                return Err(WorldError::Degenerate(format!("obstacle {i}")));
            }
            if !is_simple(o) {
                return Err(WorldError::SelfIntersecting(format!("obstacle {i}")));
            }
            let inside = o.iter().all(|&p| point_in_polygon(&boundary, p) == Some(true));
            if !inside || polygons_touch(o, &boundary) {
                return Err(WorldError::ObstacleOutside(i));
            }
        }
        for i in 0..obstacles.len() {
            for j in i + 1..obstacles.len() {
                let (a, b) = (&obstacles[i], &obstacles[j]);
                let nested = point_in_polygon(a, b[0]) != Some(false) || point_in_polygon(b, a[0]) != Some(false);
                if nested || polygons_touch(a, b) {
                    return Err(WorldError::ObstaclesOverlap(i, j));
                }
            }
        }
        let edges = std::iter::once(&boundary)
            .chain(obstacles.iter())
            .flat_map(|poly| poly_edges(poly).map(|(a, b)| Edge { a, d: b - a }))
            .collect();
        Ok(Self { boundary, obstacles, margin, edges })
    }

    /// Axis-aligned rectangle without obstacles.
    pub fn rectangle(min: Point, max: Point, margin: f64) -> Result<Self, WorldError> {
        let boundary = vec![min, Point::new(max.x, min.y), max, Point::new(min.x, max.y)];
        Self::new(boundary, Vec::new(), margin)
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn obstacles(&self) -> &[Vec<Point>] {
        &self.obstacles
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `(min, max)` corners of the boundary's bounding box.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.boundary {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn contains_free(&self, p: Point) -> bool {
        point_in_polygon(&self.boundary, p) == Some(true)
            && self.obstacles.iter().all(|o| point_in_polygon(o, p) == Some(false))
    }

    /// Distance to the nearest edge, without checking membership.
    pub fn edge_distance(&self, p: Point) -> f64 {
        self.edges.iter().map(|e| point_segment_distance(p, e.a, e.a + e.d)).fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance between the segment `a`-`b` and any edge; zero when they cross.
    pub fn segment_clearance(&self, a: Point, b: Point) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let (c, d) = (e.a, e.a + e.d);
                if segments_intersect(a, b, c, d) {
                    return 0.0;
                }
                point_segment_distance(a, c, d)
                    .min(point_segment_distance(b, c, d))
                    .min(point_segment_distance(c, a, b))
                    .min(point_segment_distance(d, a, b))
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn clearance(&self, p: Point) -> Result<f64, WorldError> {
        if !self.contains_free(p) {
            return Err(WorldError::NotFree(p.x, p.y));
        }
        Ok(self.edge_distance(p))
    }

    /// Free and at least `margin` away from every edge.
    pub fn admissible(&self, p: Point) -> bool {
        self.contains_free(p) && self.edge_distance(p) >= self.margin
    }

    /// Distance to the first edge hit along the ray, or `None` if nothing lies within range.
    pub fn raycast(&self, r: Ray) -> Option<f64> {
        let dir = Point::from_polar(1.0, r.direction);
        let mut best = f64::INFINITY;
        for e in &self.edges {
            let denom = dir.cross(e.d);
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = e.a - r.origin;
            let t = w.cross(e.d) / denom;
            let s = w.cross(dir) / denom;
            if t > EPS_GEO && t < best && (-EPS_GEO..=1.0 + EPS_GEO).contains(&s) {
                best = t;
            }
        }
        (best <= r.max_range).then_some(best)
    }

    /// True when the open segment `a`–`b` crosses no edge.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        let d = b.dist(a);
        if d <= EPS_GEO {
            return true;
        }
        match self.raycast(Ray::new(a, (b - a).angle(), d)) {
            Some(t) => t >= d - EPS_GEO,
            None => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Workspace {
        Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.0).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point> {
        vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
    }

    fn with_obstacle() -> Workspace {
        Workspace::new(rect(0.0, 0.0, 10.0, 10.0), vec![rect(4.0, 4.0, 6.0, 6.0)], 0.0).unwrap()
    }

    // Winding-number oracle, independent of the crossing test used above.
    fn winding(poly: &[Point], p: Point) -> i32 {
        let mut wn = 0;
        for (a, b) in poly_edges(poly) {
            let side = (b - a).cross(p - a);
            if a.y <= p.y {
                if b.y > p.y && side > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && side < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    #[test]
    fn membership() {
        assert!(square().contains_free(Point::new(5.0, 5.0)));
        assert!(!square().contains_free(Point::new(11.0, 5.0)));
        let w = with_obstacle();
        assert!(!w.contains_free(Point::new(5.0, 5.0)));
        assert_ne!(winding(&w.obstacles()[0], Point::new(5.0, 5.0)), 0);
    }

    #[test]
    fn clearance_values() {
        let w = square();
        assert_eq!(w.clearance(Point::new(5.0, 5.0)).unwrap(), 5.0);
        assert_eq!(w.clearance(Point::new(1.0, 5.0)).unwrap(), 1.0);
        let w = with_obstacle();
        // Sampled-segment oracle.
        let p = Point::new(3.0, 5.0);
        let sampled =
            (0..=2000).map(|i| p.dist(Point::new(4.0, 4.0 + 2.0 * i as f64 / 2000.0))).fold(f64::INFINITY, f64::min);
        assert!((w.clearance(p).unwrap() - sampled).abs() < 1e-9);
        assert!((w.clearance(p).unwrap() - 1.0).abs() < 1e-12);
        assert!(w.clearance(Point::new(5.0, 5.0)).is_err());
    }

    #[test]
    fn raycast_walls() {
        let w = square();
        let o = Point::new(5.0, 5.0);
        assert_eq!(w.raycast(Ray::new(o, 0.0, 2.0)), None);
        assert!((w.raycast(Ray::new(o, 0.0, 6.0)).unwrap() - 5.0).abs() < 1e-12);
        let wall = Workspace::new(rect(0.0, 0.0, 10.0, 10.0), vec![rect(7.0, 1.0, 7.5, 9.0)], 0.0).unwrap();
        assert!((wall.raycast(Ray::new(o, 0.0, 6.0)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_normalized() {
        let mut cw = rect(0.0, 0.0, 10.0, 10.0);
        cw.reverse();
        let w = Workspace::new(cw, vec![], 0.0).unwrap();
        assert!(signed_area(w.boundary()) > 0.0);
    }

    #[test]
    fn rejects_bad_geometry() {
        let bowtie = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(matches!(Workspace::new(bowtie, vec![], 0.0), Err(WorldError::SelfIntersecting(_))));
        let outside = Workspace::new(rect(0.0, 0.0, 10.0, 10.0), vec![rect(9.0, 9.0, 11.0, 11.0)], 0.0);
        assert_eq!(outside.unwrap_err(), WorldError::ObstacleOutside(0));
        let overlap =
            Workspace::new(rect(0.0, 0.0, 10.0, 10.0), vec![rect(2.0, 2.0, 5.0, 5.0), rect(4.0, 4.0, 6.0, 6.0)], 0.0);
        assert_eq!(overlap.unwrap_err(), WorldError::ObstaclesOverlap(0, 1));
        let nested =
            Workspace::new(rect(0.0, 0.0, 10.0, 10.0), vec![rect(2.0, 2.0, 8.0, 8.0), rect(4.0, 4.0, 6.0, 6.0)], 0.0);
        assert_eq!(nested.unwrap_err(), WorldError::ObstaclesOverlap(0, 1));
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn free_points_have_positive_clearance(x in 0.0..10.0f64, y in 0.0..10.0f64) {
                let w = with_obstacle();
                let p = Point::new(x, y);
                if w.contains_free(p) {
                    prop_assert!(w.clearance(p).unwrap() > 0.0);
                }
            }

            #[test]
            fn free_matches_winding(x in -1.0..11.0f64, y in -1.0..11.0f64) {
                let w = with_obstacle();
                let p = Point::new(x, y);
                let near_edge = w.edge_distance(p) <= 1e-6;
                prop_assume!(!near_edge);
                let oracle = winding(w.boundary(), p) != 0 && winding(&w.obstacles()[0], p) == 0;
                prop_assert_eq!(w.contains_free(p), oracle);
            }

            #[test]
            fn raycast_hit_lies_on_edge(x in 0.5..9.5f64, y in 0.5..9.5f64, dir in -3.2..3.2f64, range in 0.1..15.0f64) {
                let w = with_obstacle();
                let o = Point::new(x, y);
                prop_assume!(w.contains_free(o));
                if let Some(t) = w.raycast(Ray::new(o, dir, range)) {
                    prop_assert!(t > 0.0 && t <= range);
                    let hit = o + Point::from_polar(t, dir);
                    prop_assert!(w.edge_distance(hit) <= 1e-9);
                }
            }

            // Dense sampling along the segment brackets the exact value.
            #[test]
            fn segment_clearance_matches_sampling(
                ax in -1.0..11.0f64, ay in -1.0..11.0f64, bx in -1.0..11.0f64, by in -1.0..11.0f64,
            ) {
                let w = with_obstacle();
                let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
                let n = 2000;
                let sampled = (0..=n)
                    .map(|k| w.edge_distance(a + (b - a) * (k as f64 / n as f64)))
                    .fold(f64::INFINITY, f64::min);
                let c = w.segment_clearance(a, b);
                prop_assert!(c <= sampled + 1e-9);
                prop_assert!(c >= sampled - a.dist(b) / n as f64 - 1e-9);
            }
        }
    }
}
