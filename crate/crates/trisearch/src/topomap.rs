//! Per-robot topological map over the shared lattice.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::MapPacket;
use crate::trigrid::{nearest_vertex, six_neighbors, vertex_point, GridFrame, LatticeCoord};
use crate::world::{Point, Workspace, EPS_GEO};

/// Frames closer than these are treated as the same lattice when merging.
pub const FRAME_TOL_THETA: f64 = 1e-3;
pub const FRAME_TOL_Q: f64 = 1e-2;

/// Ordered so that the join is `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VertexState {
    Unvisited,
    Visited,
}

impl VertexState {
    pub fn label(self) -> &'static str {
        match self {
            VertexState::Unvisited => "detected",
            VertexState::Visited => "visited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub r_s: f64,
    pub n_rays: usize,
    pub max_range: f64,
}

impl SensorModel {
    /// Side length at which neighbouring sensing disks just cover the plane.
    pub fn optimal_side(&self) -> f64 {
        3f64.sqrt() * self.r_s
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("packet from robot {0} uses a different lattice frame")]
    FrameMismatch(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MapDelta {
    pub vertices: Vec<(LatticeCoord, bool)>,
    pub deleted: Vec<LatticeCoord>,
}

impl MapDelta {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.deleted.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TopoMap {
    frame: GridFrame,
    entries: BTreeMap<LatticeCoord, VertexState>,
    tombstones: BTreeSet<LatticeCoord>,
    unvisited: usize,
    pending: MapDelta,
}

impl PartialEq for TopoMap {
    fn eq(&self, o: &Self) -> bool {
        self.entries == o.entries && self.tombstones == o.tombstones
    }
}

pub fn frames_match(a: &GridFrame, b: &GridFrame) -> bool {
    (a.side - b.side).abs() <= EPS_GEO && (a.theta - b.theta).abs() <= FRAME_TOL_THETA && a.q.dist(b.q) <= FRAME_TOL_Q
}

impl TopoMap {
    pub fn new(frame: GridFrame) -> Self {
        Self {
            frame,
            entries: BTreeMap::new(),
            tombstones: BTreeSet::new(),
            unvisited: 0,
            pending: MapDelta::default(),
        }
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unvisited_count(&self) -> usize {
        self.unvisited
    }

    pub fn get(&self, c: LatticeCoord) -> Option<VertexState> {
        self.entries.get(&c).copied()
    }

    pub fn contains(&self, c: LatticeCoord) -> bool {
        self.entries.contains_key(&c)
    }

    pub fn is_deleted(&self, c: LatticeCoord) -> bool {
        self.tombstones.contains(&c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticeCoord, VertexState)> + '_ {
        self.entries.iter().map(|(&c, &s)| (c, s))
    }

    pub fn tombstones(&self) -> impl Iterator<Item = LatticeCoord> + '_ {
        self.tombstones.iter().copied()
    }

    pub fn point(&self, c: LatticeCoord) -> Point {
        vertex_point(&self.frame, c)
    }

    /// The detected six-neighbours of `c` (ℵ).
    pub fn neighbors_in_map(&self, c: LatticeCoord) -> Vec<LatticeCoord> {
        six_neighbors(c).into_iter().filter(|n| self.entries.contains_key(n)).collect()
    }

    /// Changes made locally since the last call.
    pub fn take_delta(&mut self) -> MapDelta {
        std::mem::take(&mut self.pending)
    }

    /// Joins `state` into the entry; returns true if anything changed.
    fn join(&mut self, c: LatticeCoord, state: VertexState) -> bool {
        if self.tombstones.contains(&c) {
            return false;
        }
        match self.entries.get_mut(&c) {
            Some(s) if *s >= state => false,
            Some(s) => {
                *s = state;
                self.unvisited -= 1;
                true
            }
            None => {
                self.entries.insert(c, state);
                if state == VertexState::Unvisited {
                    self.unvisited += 1;
                }
                true
            }
        }
    }

    fn remove(&mut self, c: LatticeCoord) -> bool {
        let fresh = self.tombstones.insert(c);
        if let Some(s) = self.entries.remove(&c) {
            if s == VertexState::Unvisited {
                self.unvisited -= 1;
            }
        }
        fresh
    }

    /// Adds the admissible, visible six-neighbours of the vertex nearest `pose`.
    /// Returns the newly added coordinates.
    pub fn detect_vertices(&mut self, pose: Point, w: &Workspace, s: &SensorModel) -> Vec<LatticeCoord> {
        let here = nearest_vertex(&self.frame, pose);
        let mut added = Vec::new();
        for n in six_neighbors(here) {
            if self.entries.contains_key(&n) || self.tombstones.contains(&n) {
                continue;
            }
            let p = self.point(n);
            if pose.dist(p) > s.max_range || !w.line_of_sight(pose, p) || !w.admissible(p) {
                continue;
            }
            self.join(n, VertexState::Unvisited);
            self.pending.vertices.push((n, false));
            added.push(n);
        }
        added
    }

    /// Adds `c` as detected-unvisited without any sensing checks.
    pub fn insert_detected(&mut self, c: LatticeCoord) -> bool {
        let changed = self.join(c, VertexState::Unvisited);
        if changed {
            self.pending.vertices.push((c, false));
        }
        changed
    }

    /// Returns true if the state changed.
    pub fn mark_visited(&mut self, c: LatticeCoord) -> bool {
        let changed = self.join(c, VertexState::Visited);
        if changed {
            self.pending.vertices.push((c, true));
        }
        changed
    }

    /// Removes `c` permanently; later merges cannot bring it back.
    pub fn delete(&mut self, c: LatticeCoord) -> bool {
        let changed = self.remove(c);
        if changed {
            self.pending.deleted.push(c);
        }
        changed
    }

    pub fn merge(&mut self, packet: &MapPacket) -> Result<bool, MapError> {
        if !frames_match(&self.frame, &packet.frame) {
            return Err(MapError::FrameMismatch(packet.sender));
        }
        let mut changed = false;
        for &c in &packet.deleted {
            changed |= self.remove(c);
        }
        for &(c, visited) in &packet.vertices {
            let s = if visited { VertexState::Visited } else { VertexState::Unvisited };
            changed |= self.join(c, s);
        }
        Ok(changed)
    }

    /// Join with another map of the same frame.
    pub fn merge_map(&mut self, other: &TopoMap) -> Result<bool, MapError> {
        self.merge(&other.to_packet(usize::MAX, 0))
    }

    pub fn to_packet(&self, sender: usize, seq: u64) -> MapPacket {
        MapPacket {
            sender,
            seq,
            frame: self.frame,
            vertices: self.iter().map(|(c, s)| (c, s == VertexState::Visited)).collect(),
            deleted: self.tombstones.iter().copied().collect(),
            detected_targets: Vec::new(),
        }
    }

    /// The unvisited entry closest to `p`; ties go to the smallest coordinate.
    pub fn nearest_unvisited(&self, p: Point) -> Option<LatticeCoord> {
        let mut best: Option<(f64, LatticeCoord)> = None;
        for (&c, &s) in &self.entries {
            if s != VertexState::Unvisited {
                continue;
            }
            let d = self.point(c).dist(p);
            // Entries iterate in coordinate order, so a strict improvement keeps the smallest tie.
            if best.is_none_or(|(bd, _)| d < bd - EPS_GEO) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c)
    }

    pub fn reset_visited(&mut self) {
        for s in self.entries.values_mut() {
            *s = VertexState::Unvisited;
        }
        self.unvisited = self.entries.len();
    }

    /// Every entry lies in free space with at least the workspace margin of clearance.
    pub fn respects_margin(&self, w: &Workspace) -> bool {
        self.entries.keys().all(|&c| w.admissible(self.point(c)))
    }

    /// Entries form one six-connected set.
    pub fn is_connected(&self) -> bool {
        let Some((&start, _)) = self.entries.iter().next() else { return true };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for n in six_neighbors(c) {
                if self.entries.contains_key(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        seen.len() == self.entries.len()
    }
}
