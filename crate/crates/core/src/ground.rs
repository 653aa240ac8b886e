//! Ground graphs: ordered vertex sets with adjacency lists and a lazily
//! cached all-pairs BFS distance oracle.

use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use thiserror::Error;

/// Distances are `u32` with an explicit infinity sentinel for unreachable
/// pairs; every comparison treats it as larger than any finite bound.
pub const INF_DIST: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(u32, u32),
    #[error("self-loop at {0}")]
    SelfLoop(u32),
}

/// Undirected simple graph on vertices `0..n`, vertex order = index order.
#[derive(Debug, Clone)]
pub struct GroundGraph {
    adj: Vec<Vec<u32>>,
    dist_cache: Arc<RwLock<Vec<Option<Arc<Vec<u32>>>>>>,
}

impl PartialEq for GroundGraph {
    fn eq(&self, other: &Self) -> bool {
        self.adj == other.adj
    }
}
impl Eq for GroundGraph {}

impl GroundGraph {
    pub fn new(n: u32, edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n as usize];
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !adj[u as usize].contains(&v) {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Ok(Self {
            dist_cache: Arc::new(RwLock::new(vec![None; n as usize])),
            adj,
        })
    }

    pub fn complete(n: u32) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::new(n, &edges).expect("complete graph is valid")
    }

    pub fn n(&self) -> u32 {
        self.adj.len() as u32
    }

    pub fn vertices(&self) -> impl Iterator<Item = u32> {
        0..self.n()
    }

    pub fn neighbours(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as ordered pairs (u < v), sorted.
    pub fn edge_list(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in self.vertices() {
            for &v in self.neighbours(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    /// BFS distances from `src`, cached; `INF_DIST` for unreachable.
    pub fn distances_from(&self, src: u32) -> Arc<Vec<u32>> {
        if let Some(d) = &self.dist_cache.read().expect("poisoned")[src as usize] {
            return Arc::clone(d);
        }
        let mut dist = vec![INF_DIST; self.adj.len()];
        dist[src as usize] = 0;
        let mut q = VecDeque::new();
        q.push_back(src);
        while let Some(u) = q.pop_front() {
            let du = dist[u as usize];
            for &w in &self.adj[u as usize] {
                if dist[w as usize] == INF_DIST {
                    dist[w as usize] = du + 1;
                    q.push_back(w);
                }
            }
        }
        let arc = Arc::new(dist);
        self.dist_cache.write().expect("poisoned")[src as usize] = Some(Arc::clone(&arc));
        arc
    }

    pub fn dist(&self, u: u32, v: u32) -> u32 {
        if u == v {
            return 0;
        }
        self.distances_from(u)[v as usize]
    }

    /// Vertices within distance `t` of `v`, in index order (includes `v`).
    pub fn ball(&self, v: u32, t: u32) -> Vec<u32> {
        let d = self.distances_from(v);
        (0..self.n()).filter(|&u| d[u as usize] <= t).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.adj.is_empty() {
            return true;
        }
        let d = self.distances_from(0);
        d.iter().all(|&x| x != INF_DIST)
    }

    pub fn diameter(&self) -> u32 {
        let mut best = 0;
        for v in self.vertices() {
            let d = self.distances_from(v);
            for &x in d.iter() {
                if x == INF_DIST {
                    return INF_DIST;
                }
                best = best.max(x);
            }
        }
        best
    }

    /// The graph power `G^k` as an explicit graph.
    pub fn power(&self, k: u32) -> GroundGraph {
        let mut edges = Vec::new();
        for u in self.vertices() {
            let d = self.distances_from(u);
            for v in u + 1..self.n() {
                if d[v as usize] <= k {
                    edges.push((u, v));
                }
            }
        }
        GroundGraph::new(self.n(), &edges).expect("power of a valid graph")
    }

    /// Induced subgraph on `keep` (relabelled 0..keep.len()), plus the map
    /// from new index to old vertex.
    pub fn induced(&self, keep: &[u32]) -> (GroundGraph, Vec<u32>) {
        let mut old_of_new = keep.to_vec();
        old_of_new.sort_unstable();
        old_of_new.dedup();
        let new_of_old: std::collections::BTreeMap<u32, u32> = old_of_new
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut edges = Vec::new();
        for (i, &u) in old_of_new.iter().enumerate() {
            for &v in self.neighbours(u) {
                if let Some(&j) = new_of_old.get(&v) {
                    if (i as u32) < j {
                        edges.push((i as u32, j));
                    }
                }
            }
        }
        (
            GroundGraph::new(old_of_new.len() as u32, &edges).expect("induced subgraph"),
            old_of_new,
        )
    }
}

/// The maximum of `a` and `b` treating `INF_DIST` as absorbing.
pub fn dist_max(a: u32, b: u32) -> u32 {
    if a == INF_DIST || b == INF_DIST {
        INF_DIST
    } else {
        a.max(b)
    }
}

/// Saturating distance sum that preserves the infinity sentinel.
pub fn dist_add(a: u32, b: u32) -> u32 {
    if a == INF_DIST || b == INF_DIST {
        INF_DIST
    } else {
        a.saturating_add(b)
    }
}
