//! Range-limited communication: neighbour graphs, multi-hop flooding and joint connectivity.

use std::collections::{BTreeSet, VecDeque};

use crate::trigrid::{GridFrame, LatticeCoord};
use crate::world::Point;

pub const DEFAULT_K_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    pub n: usize,
    pub r_c: f64,
    adj: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn from_edges(n: usize, r_c: f64, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i != j && !adj[i].contains(&j) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Self { n, r_c, adj }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Edges as ordered pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        (0..self.n).flat_map(|i| self.adj[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j))).collect()
    }

    /// Component label per robot; labels are the smallest member id.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            let mut stack = vec![s];
            while let Some(i) = stack.pop() {
                for &j in &self.adj[i] {
                    if label[j] == usize::MAX {
                        label[j] = s;
                        stack.push(j);
                    }
                }
            }
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }
}

pub fn build_graph(positions: &[Point], r_c: f64) -> CommGraph {
    assert!(r_c > 0.0, "communication range must be positive");
    let n = positions.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if positions[i].dist(positions[j]) <= r_c {
                edges.push((i, j));
            }
        }
    }
    CommGraph::from_edges(n, r_c, &edges)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPacket {
    pub sender: usize,
    pub seq: u64,
    pub frame: GridFrame,
    /// `(coord, visited)` pairs.
    pub vertices: Vec<(LatticeCoord, bool)>,
    pub deleted: Vec<LatticeCoord>,
    pub detected_targets: Vec<usize>,
}

impl MapPacket {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.deleted.is_empty() && self.detected_targets.is_empty()
    }
}

/// Relays every packet hop by hop until no robot has anything new to forward.
/// Each robot ends up with one copy of every packet originated elsewhere in its component.
pub fn flood_exchange(graph: &CommGraph, outboxes: &[Vec<MapPacket>]) -> Vec<Vec<MapPacket>> {
    let n = graph.n;
    let mut inbox: Vec<Vec<MapPacket>> = vec![Vec::new(); n];
    let mut seen: Vec<BTreeSet<(usize, u64)>> = vec![BTreeSet::new(); n];
    let mut queue: VecDeque<(usize, &MapPacket)> = VecDeque::new();
    for (i, out) in outboxes.iter().enumerate() {
        for p in out {
            seen[i].insert((p.sender, p.seq));
            queue.push_back((i, p));
        }
    }
    while let Some((holder, p)) = queue.pop_front() {
        for &j in graph.neighbors(holder) {
            if seen[j].insert((p.sender, p.seq)) {
                inbox[j].push(p.clone());
                queue.push_back((j, p));
            }
        }
    }
    for b in &mut inbox {
        b.sort_by_key(|p| (p.sender, p.seq));
    }
    inbox
}

pub fn joint_connectivity(windows: &[CommGraph]) -> bool {
    assert!(!windows.is_empty(), "window must be non-empty");
    let n = windows[0].n;
    let edges: Vec<(usize, usize)> = windows.iter().flat_map(|g| g.edges()).collect();
    CommGraph::from_edges(n, windows[0].r_c, &edges).is_connected()
}

/// Sliding-window joint-connectivity check.
#[derive(Debug, Clone)]
pub struct ConnectivityMonitor {
    k: usize,
    window: VecDeque<CommGraph>,
    pub checks: usize,
    pub violations: usize,
}

impl ConnectivityMonitor {
    pub fn new(k: usize) -> Self {
        Self { k: k.max(1), window: VecDeque::new(), checks: 0, violations: 0 }
    }

    /// Records a graph; returns the verdict once a full window is available.
    pub fn push(&mut self, g: CommGraph) -> Option<bool> {
        self.window.push_back(g);
        if self.window.len() > self.k {
            self.window.pop_front();
        }
        if self.window.len() < self.k {
            return None;
        }
        let ok = joint_connectivity(self.window.make_contiguous());
        self.checks += 1;
        if !ok {
            self.violations += 1;
        }
        Some(ok)
    }
}
