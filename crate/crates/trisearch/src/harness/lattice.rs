//! Lattice-level walk: one robot jumps vertex to vertex with the same map bookkeeping and
//! decision rules as the continuous engine, but no kinematics.

use rand::Rng;

use crate::search::{decide, Decision, Mission, PolicyChoice};
use crate::topomap::{SensorModel, TopoMap};
use crate::trigrid::{GridFrame, LatticeCoord};
use crate::world::Workspace;

/// Moves until the robot's map holds no unvisited vertex, or `None` past `cap` moves or on a dead end.
pub fn cover_moves<R: Rng + ?Sized>(
    w: &Workspace,
    frame: GridFrame,
    start: LatticeCoord,
    policy: PolicyChoice,
    sensor: &SensorModel,
    cap: u64,
    rng: &mut R,
) -> Option<u64> {
    let mut map = TopoMap::new(frame);
    let visit = |map: &mut TopoMap, c: LatticeCoord| {
        map.mark_visited(c);
        map.detect_vertices(map.point(c), w, sensor);
    };
    visit(&mut map, start);
    let mut cur = start;
    let mut moves = 0;
    while map.unvisited_count() > 0 {
        if moves >= cap {
            return None;
        }
        match decide(policy, &Mission::FullCoverage, false, &map, cur, map.point(cur), rng) {
            Decision::Move(c) => {
                cur = c;
                moves += 1;
                visit(&mut map, c);
            }
            Decision::Stay => return None,
        }
    }
    Some(moves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strip() -> (Workspace, GridFrame) {
        // Three vertices in a row at x = 1, 3, 5.
        let w = Workspace::rectangle(Point::new(0.0, -0.5), Point::new(6.0, 0.5), 0.3).unwrap();
        (w, GridFrame::new(Point::new(1.0, 0.0), 0.0, 2.0))
    }

    fn sensor() -> SensorModel {
        SensorModel { r_s: 1.0, n_rays: 17, max_range: 5.0 }
    }

    #[test]
    fn modified_sweeps_a_strip_in_two_moves() {
        let (w, f) = strip();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = cover_moves(&w, f, LatticeCoord::new(0, 0), PolicyChoice::Modified, &sensor(), 100, &mut rng);
        assert_eq!(m, Some(2));
    }

    #[test]
    fn random_walk_on_path_of_three() {
        // From an end of a 3-path the cover time is exactly 4 in expectation.
        let (w, f) = strip();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let total: u64 = (0..n)
            .map(|_| {
                cover_moves(&w, f, LatticeCoord::new(0, 0), PolicyChoice::Random, &sensor(), 1000, &mut rng).unwrap()
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.1, "{mean}");
    }
}
