//! Equilateral triangular lattice: frames, snapping and six-neighbourhoods.

use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};

use crate::world::{Point, EPS_GEO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub q: Point,
    pub theta: f64,
    pub side: f64,
}

/// Axial vertex coordinates: `q + a·u + b·w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub a: i64,
    pub b: i64,
}

impl LatticeCoord {
    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }
}

pub const NEIGHBOR_OFFSETS: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

impl GridFrame {
    /// Builds a frame, folding `theta` into `[0, π)`.
    pub fn new(q: Point, theta: f64, side: f64) -> Self {
        assert!(side > 0.0, "lattice side must be positive");
        Self { q, theta: theta.rem_euclid(PI), side }
    }

    pub fn u(&self) -> Point {
        Point::from_polar(self.side, self.theta)
    }

    pub fn w(&self) -> Point {
        Point::from_polar(self.side, self.theta + FRAC_PI_3)
    }

    /// Fractional axial coordinates of `p`.
    pub fn to_axial(&self, p: Point) -> (f64, f64) {
        let (u, w) = (self.u(), self.w());
        let det = u.cross(w);
        let d = p - self.q;
        (d.cross(w) / det, u.cross(d) / det)
    }
}

pub fn vertex_point(f: &GridFrame, c: LatticeCoord) -> Point {
    f.q + f.u() * c.a as f64 + f.w() * c.b as f64
}

pub fn nearest_vertex(f: &GridFrame, p: Point) -> LatticeCoord {
    let (fa, fb) = f.to_axial(p);
    let (ra, rb) = (fa.round() as i64, fb.round() as i64);
    let mut best = LatticeCoord::new(ra, rb);
    let mut best_d = f64::INFINITY;
    for da in -1..=1 {
        for db in -1..=1 {
            let c = LatticeCoord::new(ra + da, rb + db);
            let d = vertex_point(f, c).dist(p);
            if d < best_d - EPS_GEO || (d <= best_d + EPS_GEO && c < best) {
                best_d = best_d.min(d);
                best = c;
            }
        }
    }
    best
}

pub fn six_neighbors(c: LatticeCoord) -> [LatticeCoord; 6] {
    NEIGHBOR_OFFSETS.map(|(da, db)| LatticeCoord::new(c.a + da, c.b + db))
}

pub fn are_neighbors(x: LatticeCoord, y: LatticeCoord) -> bool {
    NEIGHBOR_OFFSETS.contains(&(y.a - x.a, y.b - x.b))
}

/// Lattice distance in steps.
pub fn hex_distance(x: LatticeCoord, y: LatticeCoord) -> i64 {
    let (da, db) = (y.a - x.a, y.b - x.b);
    (da.abs() + db.abs() + (da + db).abs()) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> GridFrame {
        GridFrame::new(Point::new(0.0, 0.0), 0.0, 1.0)
    }

    fn brute(f: &GridFrame, p: Point, radius: i64) -> (LatticeCoord, f64) {
        let centre = LatticeCoord::new(f.to_axial(p).0.round() as i64, f.to_axial(p).1.round() as i64);
        let mut all: Vec<(f64, LatticeCoord)> = Vec::new();
        for a in -radius..=radius {
            for b in -radius..=radius {
                let c = LatticeCoord::new(centre.a + a, centre.b + b);
                all.push((vertex_point(f, c).dist(p), c));
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        (all[0].1, all[0].0)
    }

    #[test]
    fn vertex_points() {
        let f = unit();
        assert_eq!(vertex_point(&f, LatticeCoord::new(0, 0)), Point::new(0.0, 0.0));
        assert_eq!(vertex_point(&f, LatticeCoord::new(1, 0)), Point::new(1.0, 0.0));
        let p = vertex_point(&f, LatticeCoord::new(0, 1));
        assert!((p.x - 0.5).abs() < 1e-12 && (p.y - 0.8660254037844386).abs() < 1e-12);
    }

    #[test]
    fn snapping() {
        let f = unit();
        assert_eq!(nearest_vertex(&f, Point::new(0.0, 0.0)), LatticeCoord::new(0, 0));
        assert_eq!(nearest_vertex(&f, Point::new(0.4, 0.0)), LatticeCoord::new(0, 0));
        assert_eq!(nearest_vertex(&f, Point::new(0.55, 0.0)), LatticeCoord::new(1, 0));
        assert_eq!(brute(&f, Point::new(0.4, 0.0), 3).0, LatticeCoord::new(0, 0));
        assert_eq!(brute(&f, Point::new(0.55, 0.0), 3).0, LatticeCoord::new(1, 0));
    }

    #[test]
    fn tie_breaks_lexicographically() {
        let f = GridFrame::new(Point::new(0.5, 0.0), 0.0, 1.0);
        assert_eq!(nearest_vertex(&f, Point::new(0.0, 0.0)), LatticeCoord::new(-1, 0));
    }

    #[test]
    fn neighbours() {
        let n = six_neighbors(LatticeCoord::new(2, -1));
        let expect = [(3, -1), (1, -1), (2, 0), (2, -2), (3, -2), (1, 0)].map(|(a, b)| LatticeCoord::new(a, b));
        assert_eq!(n, expect);
        let f = unit();
        for c in six_neighbors(LatticeCoord::new(0, 0)) {
            assert!((vertex_point(&f, c).norm() - 1.0).abs() < 1e-12);
            assert_eq!(hex_distance(LatticeCoord::new(0, 0), c), 1);
        }
    }

    proptest! {
        #[test]
        fn round_trip(a in -50i64..=50, b in -50i64..=50, theta in 0.0..PI, side in 0.1..5.0f64,
                      qx in -20.0..20.0f64, qy in -20.0..20.0f64) {
            let f = GridFrame::new(Point::new(qx, qy), theta, side);
            let c = LatticeCoord::new(a, b);
            prop_assert_eq!(nearest_vertex(&f, vertex_point(&f, c)), c);
        }

        #[test]
        fn matches_brute_force(x in -30.0..30.0f64, y in -30.0..30.0f64, theta in 0.0..PI, side in 0.2..4.0f64) {
            let f = GridFrame::new(Point::new(1.0, -2.0), theta, side);
            let p = Point::new(x, y);
            let got = nearest_vertex(&f, p);
            let (oracle, d) = brute(&f, p, 3);
            let gd = vertex_point(&f, got).dist(p);
            prop_assert!(gd <= d + EPS_GEO);
            if (gd - d).abs() > 1e-6 {
                prop_assert_eq!(got, oracle);
            }
        }

        #[test]
        fn neighbours_symmetric(a in -100i64..100, b in -100i64..100, k in 0usize..6) {
            let x = LatticeCoord::new(a, b);
            let y = six_neighbors(x)[k];
            prop_assert!(six_neighbors(y).contains(&x));
            prop_assert!(are_neighbors(x, y) && are_neighbors(y, x));
        }
    }
}
