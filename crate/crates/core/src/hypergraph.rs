//! r-uniform hypergraphs on ordered vertex sets, tight walks, graph powers,
//! tensor products with S-forests, and blow-ups.
//!
//! Conventions: a walk's *order* is the number of vertices in its sequence
//! and its *length* is order − 1. Edges are stored as sorted vertex arrays.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::colouring::EdgeColour;
use crate::ground::{GroundGraph, INF_DIST};
use crate::sforest::{root_of, Pair, SForest};

/// Vertex types usable in hypergraphs.
pub trait HyperVertex: Copy + Ord + Hash + Debug {}
impl<T: Copy + Ord + Hash + Debug> HyperVertex for T {}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HypergraphError {
    #[error("edge {0} has wrong size (r = {1})")]
    BadEdgeSize(String, usize),
    #[error("edge contains a repeated vertex")]
    RepeatedVertex,
    #[error("uniformity must be at least 2")]
    UniformityTooSmall,
    #[error("r exceeds the number of vertices")]
    NotEnoughVertices,
    #[error("ground sets do not match")]
    GroundMismatch,
    #[error("forest is not balanced")]
    NotBalanced,
    #[error("walk interfaces do not match")]
    InterfaceMismatch,
    #[error("projection precondition failed: {0}")]
    ProjectionPrecondition(String),
}

/// Anything that can answer edge-membership queries for sorted r-sets.
pub trait EdgeSet<V: HyperVertex> {
    fn uniformity(&self) -> usize;
    /// `e` must be sorted and duplicate-free.
    fn has_edge(&self, e: &[V]) -> bool;
}

/// A materialised r-uniform hypergraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph<V: HyperVertex> {
    r: usize,
    vertices: BTreeSet<V>,
    edges: BTreeSet<Vec<V>>,
}

impl<V: HyperVertex> Hypergraph<V> {
    pub fn new<I, E>(r: usize, vertices: I, edges: E) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = V>,
        E: IntoIterator<Item = Vec<V>>,
    {
        if r < 2 {
            return Err(HypergraphError::UniformityTooSmall);
        }
        let vertices: BTreeSet<V> = vertices.into_iter().collect();
        let mut set = BTreeSet::new();
        for mut e in edges {
            e.sort_unstable();
            let distinct: BTreeSet<&V> = e.iter().collect();
            if distinct.len() != e.len() {
                return Err(HypergraphError::RepeatedVertex);
            }
            if e.len() != r {
                return Err(HypergraphError::BadEdgeSize(format!("{e:?}"), r));
            }
            if !e.iter().all(|v| vertices.contains(v)) {
                return Err(HypergraphError::BadEdgeSize(format!("{e:?}"), r));
            }
            set.insert(e);
        }
        Ok(Self {
            r,
            vertices,
            edges: set,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &V> + '_ {
        self.vertices.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Vec<V>> + '_ {
        self.edges.iter()
    }

    pub fn degree(&self, v: V) -> usize {
        self.edges.iter().filter(|e| e.binary_search(&v).is_ok()).count()
    }

    pub fn max_degree(&self) -> usize {
        self.vertices
            .iter()
            .map(|&v| self.degree(v))
            .max()
            .unwrap_or(0)
    }
}

impl<V: HyperVertex> EdgeSet<V> for Hypergraph<V> {
    fn uniformity(&self) -> usize {
        self.r
    }
    fn has_edge(&self, e: &[V]) -> bool {
        e.len() == self.r && self.edges.contains(e)
    }
}

// ---------------------------------------------------------------------------
// Powers, tensors and blow-ups
// ---------------------------------------------------------------------------

/// `𝒢ᵗ`: the r-uniform power hypergraph, materialised. Edges are the r-sets
/// of vertices pairwise within ground distance `t`.
pub fn power_hypergraph(g: &GroundGraph, t: u32, r: usize) -> Result<Hypergraph<u32>, HypergraphError> {
    if (r as u32) > g.n() {
        return Err(HypergraphError::NotEnoughVertices);
    }
    let mut edges: Vec<Vec<u32>> = Vec::new();
    let mut chosen: Vec<u32> = Vec::with_capacity(r);
    fn rec(
        g: &GroundGraph,
        t: u32,
        r: usize,
        from: u32,
        chosen: &mut Vec<u32>,
        edges: &mut Vec<Vec<u32>>,
    ) {
        if chosen.len() == r {
            edges.push(chosen.clone());
            return;
        }
        for v in from..g.n() {
            if chosen.iter().all(|&u| g.dist(u, v) <= t) {
                chosen.push(v);
                rec(g, t, r, v + 1, chosen, edges);
                chosen.pop();
            }
        }
    }
    rec(g, t, r, 0, &mut chosen, &mut edges);
    Hypergraph::new(r, g.vertices(), edges)
}

/// Implicit view of `𝒢ᵗ` (no materialisation).
#[derive(Clone, Copy)]
pub struct PowerView<'g> {
    pub g: &'g GroundGraph,
    pub t: u32,
    pub r: usize,
}

impl<'g> EdgeSet<u32> for PowerView<'g> {
    fn uniformity(&self) -> usize {
        self.r
    }
    fn has_edge(&self, e: &[u32]) -> bool {
        if e.len() != self.r {
            return false;
        }
        for i in 0..e.len() {
            if e[i] >= self.g.n() {
                return false;
            }
            for j in i + 1..e.len() {
                if e[i] == e[j] || self.g.dist(e[i], e[j]) > self.t {
                    return false;
                }
            }
        }
        true
    }
}

/// `ℋ ⊗_r F`: vertex set `L(F)`, edges the r-sets whose root projections sit
/// inside some edge of `ℋ`. Materialised; intended for small instances.
pub fn tensor(
    h: &Hypergraph<u32>,
    f: &SForest,
    r: usize,
) -> Result<Hypergraph<Pair>, HypergraphError> {
    if !f.is_balanced() {
        return Err(HypergraphError::NotBalanced);
    }
    if f.ground_n() < h.vertex_count() as u32 {
        return Err(HypergraphError::GroundMismatch);
    }
    let leaves = f.leaves();
    if leaves.len() < r {
        return Ok(Hypergraph::new(r, leaves, Vec::new())?);
    }
    let mut edges = Vec::new();
    let mut idx = vec![0usize; r];
    crate::sforest::enumerate_subsets(leaves.len(), r, &mut idx, &mut |chosen| {
        let e: Vec<Pair> = chosen.iter().map(|&i| leaves[i]).collect();
        let pi0: BTreeSet<u32> = e.iter().map(|&p| root_of(p)).collect();
        let inside = h
            .edges()
            .any(|edge| pi0.iter().all(|v| edge.binary_search(v).is_ok()));
        if inside {
            edges.push(e);
        }
        true
    });
    Hypergraph::new(r, leaves, edges)
}

/// Implicit view of `𝒢ᵗ ⊗_r F`: an r-set of leaves is an edge when its root
/// set extends to an r-set of ground vertices pairwise within distance `t`.
pub struct TensorPowerView<'a> {
    pub g: &'a GroundGraph,
    pub f: &'a SForest,
    pub t: u32,
    pub r: usize,
    leaf_set: BTreeSet<Pair>,
}

impl<'a> TensorPowerView<'a> {
    pub fn new(g: &'a GroundGraph, f: &'a SForest, t: u32, r: usize) -> Self {
        Self {
            g,
            f,
            t,
            r,
            leaf_set: f.leaves().into_iter().collect(),
        }
    }

    pub fn is_vertex(&self, p: Pair) -> bool {
        self.leaf_set.contains(&p)
    }

    /// Does `roots` extend to an r-set of ground vertices pairwise within t?
    fn extends_to_power_edge(&self, roots: &BTreeSet<u32>) -> bool {
        let m = roots.len();
        if m > self.r {
            return false;
        }
        for &u in roots {
            for &v in roots {
                if u < v && self.g.dist(u, v) > self.t {
                    return false;
                }
            }
        }
        if m == self.r {
            return true;
        }
        // Candidates within t of all chosen roots.
        let anchor = *roots.iter().next().expect("nonempty");
        let candidates: Vec<u32> = self
            .g
            .ball(anchor, self.t)
            .into_iter()
            .filter(|&c| !roots.contains(&c) && roots.iter().all(|&v| self.g.dist(c, v) <= self.t))
            .collect();
        // Small backtracking for the missing r - m vertices.
        fn pick(g: &GroundGraph, t: u32, cands: &[u32], from: usize, need: usize, acc: &mut Vec<u32>) -> bool {
            if need == 0 {
                return true;
            }
            for i in from..cands.len() {
                let c = cands[i];
                if acc.iter().all(|&x| g.dist(x, c) <= t) {
                    acc.push(c);
                    if pick(g, t, cands, i + 1, need - 1, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
            false
        }
        let mut acc = Vec::new();
        pick(self.g, self.t, &candidates, 0, self.r - m, &mut acc)
    }
}

impl<'a> EdgeSet<Pair> for TensorPowerView<'a> {
    fn uniformity(&self) -> usize {
        self.r
    }
    fn has_edge(&self, e: &[Pair]) -> bool {
        if e.len() != self.r || e.windows(2).any(|w| w[0] >= w[1]) {
            return false;
        }
        if !e.iter().all(|&p| self.leaf_set.contains(&p)) {
            return false;
        }
        let roots: BTreeSet<u32> = e.iter().map(|&p| root_of(p)).collect();
        self.extends_to_power_edge(&roots)
    }
}

/// `ℋ[t]`: every vertex replaced by `t` clones, edges lifted over all clone
/// choices.
pub fn blow_up<V: HyperVertex>(h: &Hypergraph<V>, t: u32) -> Hypergraph<(V, u32)> {
    assert!(t >= 1, "blow-up factor must be at least 1");
    let vertices: Vec<(V, u32)> = h
        .vertices()
        .flat_map(|&v| (1..=t).map(move |i| (v, i)))
        .collect();
    let mut edges = Vec::new();
    for e in h.edges() {
        let mut choice = vec![1u32; e.len()];
        loop {
            edges.push(
                e.iter()
                    .zip(choice.iter())
                    .map(|(&v, &i)| (v, i))
                    .collect::<Vec<_>>(),
            );
            // Odometer over clone indices.
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    break;
                }
                if choice[pos] < t {
                    choice[pos] += 1;
                    break;
                }
                choice[pos] = 1;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
    }
    Hypergraph::new(h.r(), vertices, edges).expect("blow-up of a valid hypergraph")
}

// ---------------------------------------------------------------------------
// Tight walks
// ---------------------------------------------------------------------------

/// A tight walk: every window of `r` consecutive vertices is an edge, and the
/// first and last `r−1` vertices are sorted increasingly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TightWalk<V: HyperVertex> {
    pub verts: Vec<V>,
}

/// First violation found when validating a walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkViolation<V: HyperVertex> {
    TooShort,
    WindowNotEdge { index: usize, window: Vec<V> },
    StartNotSorted,
    EndNotSorted,
    RepeatedVertex(V),
}

impl<V: HyperVertex> TightWalk<V> {
    pub fn new(verts: Vec<V>) -> Self {
        Self { verts }
    }

    pub fn order(&self) -> usize {
        self.verts.len()
    }

    pub fn length(&self) -> usize {
        self.verts.len().saturating_sub(1)
    }

    /// The ordered start tuple `v₁ … v_{r−1}`.
    pub fn start(&self, r: usize) -> &[V] {
        &self.verts[..r - 1]
    }

    /// The ordered end tuple `v_{k−r+2} … v_k`.
    pub fn end(&self, r: usize) -> &[V] {
        &self.verts[self.verts.len() - (r - 1)..]
    }

    /// Checks windows, sorted ends, and (if `as_path`) vertex distinctness.
    pub fn validate<E: EdgeSet<V>>(&self, host: &E, as_path: bool) -> Result<(), WalkViolation<V>> {
        let r = host.uniformity();
        if self.verts.len() < r {
            return Err(WalkViolation::TooShort);
        }
        if self.verts[..r - 1].windows(2).any(|w| w[0] >= w[1]) {
            return Err(WalkViolation::StartNotSorted);
        }
        if self.verts[self.verts.len() - (r - 1)..]
            .windows(2)
            .any(|w| w[0] >= w[1])
        {
            return Err(WalkViolation::EndNotSorted);
        }
        for (i, w) in self.verts.windows(r).enumerate() {
            let mut sorted = w.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|x| x[0] == x[1]) || !host.has_edge(&sorted) {
                return Err(WalkViolation::WindowNotEdge {
                    index: i,
                    window: w.to_vec(),
                });
            }
        }
        if as_path {
            let mut seen = BTreeSet::new();
            for &v in &self.verts {
                if !seen.insert(v) {
                    return Err(WalkViolation::RepeatedVertex(v));
                }
            }
        }
        Ok(())
    }

    /// Number of occurrences of each vertex.
    pub fn multiplicities(&self) -> BTreeMap<V, u32> {
        let mut m = BTreeMap::new();
        for &v in &self.verts {
            *m.entry(v).or_insert(0) += 1;
        }
        m
    }
}

/// Concatenates two walks whose interface tuples match: the end of `p` must
/// equal the start of `q` as ordered (r−1)-tuples.
pub fn concat<V: HyperVertex>(
    p: &TightWalk<V>,
    q: &TightWalk<V>,
    r: usize,
) -> Result<TightWalk<V>, HypergraphError> {
    if p.order() < r - 1 || q.order() < r - 1 || p.end(r) != q.start(r) {
        return Err(HypergraphError::InterfaceMismatch);
    }
    let mut verts = p.verts.clone();
    verts.extend_from_slice(&q.verts[r - 1..]);
    Ok(TightWalk::new(verts))
}

/// The trivial walk on an interface tuple (already sorted).
pub fn trivial_walk<V: HyperVertex>(tuple: &[V]) -> TightWalk<V> {
    TightWalk::new(tuple.to_vec())
}

// ---------------------------------------------------------------------------
// Matching decomposition
// ---------------------------------------------------------------------------

/// Partitions the edge set into at most `r·Δ(H)+1` matchings by greedy proper
/// colouring of the line graph, processing edges in sorted order.
pub fn matching_decomposition<V: HyperVertex>(h: &Hypergraph<V>) -> Vec<Vec<Vec<V>>> {
    let mut classes: Vec<Vec<Vec<V>>> = Vec::new();
    let mut occupied: Vec<BTreeSet<V>> = Vec::new();
    for e in h.edges() {
        let mut placed = false;
        for (ci, occ) in occupied.iter_mut().enumerate() {
            if e.iter().all(|v| !occ.contains(v)) {
                occ.extend(e.iter().copied());
                classes[ci].push(e.clone());
                placed = true;
                break;
            }
        }
        if !placed {
            occupied.push(e.iter().copied().collect());
            classes.push(vec![e.clone()]);
        }
    }
    classes
}

// ---------------------------------------------------------------------------
// Monochromatic tight-path search (artifact plumbing for tests and the CLI)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MonoPathResult<V: HyperVertex> {
    pub colour: u16,
    pub best: Option<TightWalk<V>>,
    pub exact: bool,
    pub nodes_expanded: usize,
}

/// Longest monochromatic tight path per colour, exhaustive DFS truncated at a
/// node budget. When the budget is exhausted the result is the best found so
/// far, flagged inexact.
pub fn longest_mono_tight_path<V: HyperVertex, C: EdgeColour<V>>(
    h: &Hypergraph<V>,
    chi: &C,
    budget: usize,
) -> Vec<MonoPathResult<V>> {
    let r = h.r();
    let mut out = Vec::new();
    for colour in 0..chi.colours() {
        let edges: Vec<&Vec<V>> = h
            .edges()
            .filter(|e| chi.colour_of(e) == colour)
            .collect();
        let mut best: Option<Vec<V>> = None;
        let mut nodes = 0usize;
        let mut exact = true;
        for e in &edges {
            // Each edge can start a path: pick the unsorted tail position.
            for tail in 0..r {
                let mut prefix: Vec<V> = e.iter().copied().collect();
                let last = prefix.remove(tail);
                prefix.push(last);
                let mut visited: BTreeSet<V> = prefix.iter().copied().collect();
                dfs_extend(
                    h, chi, colour, &mut prefix, &mut visited, &mut best, &mut nodes, budget,
                    &mut exact,
                );
            }
        }
        out.push(MonoPathResult {
            colour,
            best: best.map(TightWalk::new),
            exact,
            nodes_expanded: nodes,
        });
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs_extend<V: HyperVertex, C: EdgeColour<V>>(
    h: &Hypergraph<V>,
    chi: &C,
    colour: u16,
    path: &mut Vec<V>,
    visited: &mut BTreeSet<V>,
    best: &mut Option<Vec<V>>,
    nodes: &mut usize,
    budget: usize,
    exact: &mut bool,
) {
    *nodes += 1;
    if *nodes > budget {
        *exact = false;
        return;
    }
    let r = h.r();
    // A candidate prefix only counts as a walk when its end is sorted; paths
    // produced here always end sorted once trimmed, so record greedily when
    // the last r-1 entries are increasing.
    let tail_sorted = path[path.len() - (r - 1)..].windows(2).all(|w| w[0] < w[1]);
    let start_sorted = path[..r - 1].windows(2).all(|w| w[0] < w[1]);
    if tail_sorted && start_sorted && best.as_ref().map(|b| b.len()).unwrap_or(0) < path.len() {
        *best = Some(path.clone());
    }
    let window_base: Vec<V> = path[path.len() - (r - 1)..].to_vec();
    for &v in h.vertices().collect::<Vec<_>>() {
        if visited.contains(&v) {
            continue;
        }
        let mut window = window_base.clone();
        window.push(v);
        window.sort_unstable();
        if window.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        if h.has_edge(&window) && chi.colour_of(&window) == colour {
            path.push(v);
            visited.insert(v);
            dfs_extend(h, chi, colour, path, visited, best, nodes, budget, exact);
            visited.remove(&v);
            path.pop();
        }
    }
}

// ---------------------------------------------------------------------------
// Walk projection
// ---------------------------------------------------------------------------

/// Projects a walk in `𝒢ᵗ ⊗ F` to a walk in `𝒢ᵖ` by taking `π` vertexwise.
///
/// Preconditions (checked): `F` is `t`-separated, all its levels are
/// `k`-short, and `p ≥ t + 2hk`. The image is re-validated window by window.
pub fn project_walk(
    w: &TightWalk<Pair>,
    f: &SForest,
    g: &GroundGraph,
    t: u32,
    k: u32,
    p: u32,
    r: usize,
) -> Result<TightWalk<u32>, HypergraphError> {
    if !f.is_d_separated(g, t) {
        let viol = f.separation_violation(g, t);
        return Err(HypergraphError::ProjectionPrecondition(format!(
            "forest not {t}-separated: {viol:?}"
        )));
    }
    if !f.all_levels_short(g, k) {
        return Err(HypergraphError::ProjectionPrecondition(format!(
            "some level is not {k}-short"
        )));
    }
    let h = f.height() as u32;
    if p < t + 2 * h * k {
        return Err(HypergraphError::ProjectionPrecondition(format!(
            "p = {p} < t + 2hk = {}",
            t + 2 * h * k
        )));
    }
    let mut verts = Vec::with_capacity(w.verts.len());
    for &pair in &w.verts {
        if !f.contains(pair) {
            return Err(HypergraphError::ProjectionPrecondition(format!(
                "walk vertex {pair:?} is not in the forest"
            )));
        }
        verts.push(pair.0);
    }
    let img = TightWalk::new(verts);
    let view = PowerView { g, t: p, r };
    if let Err(v) = img.validate(&view, false) {
        return Err(HypergraphError::ProjectionPrecondition(format!(
            "projected walk fails validation: {v:?}"
        )));
    }
    Ok(img)
}

/// Maximum pairwise ground distance inside a window, for diagnostics.
pub fn window_span(g: &GroundGraph, w: &[u32]) -> u32 {
    let mut best = 0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let d = g.dist(w[i], w[j]);
            if d == INF_DIST {
                return INF_DIST;
            }
            best = best.max(d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::{Colouring, MonoColouring};
    use crate::sforest::STree;

    fn path_graph(n: u32) -> GroundGraph {
        GroundGraph::new(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn power_edges_examples() {
        let g = path_graph(4);
        // t = 0: no edges for r >= 2.
        assert_eq!(power_hypergraph(&g, 0, 2).unwrap().edge_count(), 0);
        // Path on 4 vertices, t = 1, r = 2: exactly the 3 path edges.
        let h = power_hypergraph(&g, 1, 2).unwrap();
        assert_eq!(h.edge_count(), 3);
        // t = diameter: complete r-graph.
        let full = power_hypergraph(&g, g.diameter(), 3).unwrap();
        assert_eq!(full.edge_count(), 4);
        // The implicit view agrees edge-for-edge.
        let view = PowerView { g: &g, t: 1, r: 2 };
        for e in h.edges() {
            assert!(view.has_edge(e));
        }
        assert!(!view.has_edge(&[0, 2]));
    }

    #[test]
    fn tensor_of_height_zero_forest_is_isomorphic_to_h() {
        let g = path_graph(4);
        let h = power_hypergraph(&g, 2, 2).unwrap();
        let f = SForest::new(4, (0..4).map(STree::trivial).collect()).unwrap();
        let t = tensor(&h, &f, 2).unwrap();
        assert_eq!(t.edge_count(), h.edge_count());
        for e in h.edges() {
            let lifted: Vec<Pair> = e.iter().map(|&v| (v, v)).collect();
            assert!(t.has_edge(&lifted));
        }
    }

    #[test]
    fn tensor_star_forest_is_blow_up_on_distinct_roots() {
        // F = disjoint size-d stars: the leaf-indexing map is an isomorphism
        // between blow_up(H, d) and the tensor edges with r distinct roots.
        // (Tensor edges re-using a star are exactly the remainder; they have
        // no preimage in the blow-up.)
        let g = path_graph(3);
        let h = power_hypergraph(&g, 1, 2).unwrap();
        let d = 2u32;
        let trees: Vec<STree> = (0..3)
            .map(|v| STree::star(v, &[3 + 2 * v, 4 + 2 * v]).unwrap())
            .collect();
        let f = SForest::new(10, trees).unwrap();
        let t = tensor(&h, &f, 2).unwrap();
        let b = blow_up(&h, d);
        let index_of = |(x, v): Pair| -> (u32, u32) {
            let idx = f
                .subtree_at(v)
                .unwrap()
                .leaf_firsts()
                .iter()
                .position(|&l| l == x)
                .unwrap() as u32
                + 1;
            (v, idx)
        };
        let mut mapped_edges = BTreeSet::new();
        let mut same_star = 0usize;
        for e in t.edges() {
            let roots: BTreeSet<u32> = e.iter().map(|&p| root_of(p)).collect();
            if roots.len() < e.len() {
                same_star += 1;
                continue;
            }
            let mut img: Vec<(u32, u32)> = e.iter().map(|&p| index_of(p)).collect();
            img.sort_unstable();
            assert!(b.has_edge(&img), "image {img:?} missing from the blow-up");
            mapped_edges.insert(img);
        }
        // Edge-for-edge: the map is a bijection onto the blow-up's edges.
        assert_eq!(mapped_edges.len(), b.edge_count());
        assert_eq!(mapped_edges.len() + same_star, t.edge_count());
    }

    #[test]
    fn blow_up_counts() {
        let g = path_graph(4);
        let h = power_hypergraph(&g, 1, 2).unwrap();
        for t in 1..=3 {
            let b = blow_up(&h, t);
            assert_eq!(b.edge_count(), h.edge_count() * (t as usize).pow(2));
        }
        let b1 = blow_up(&h, 1);
        assert_eq!(b1.edge_count(), h.edge_count());
    }

    #[test]
    fn tensor_norm_characterisation_on_small_instances() {
        // Edges of 𝒢ᵗ⊗F are exactly the r-sets with ‖e‖_G ≤ t, provided
        // t-balls are large enough to host an r-set.
        let g = path_graph(5);
        let t = 2u32;
        let r = 2usize;
        let trees = vec![
            STree::star(0, &[5, 6]).unwrap(),
            STree::star(2, &[7]).unwrap(),
            STree::star(4, &[8, 9]).unwrap(),
        ];
        let f = SForest::new(10, trees).unwrap();
        let power = power_hypergraph(&g, t, r).unwrap();
        let tens = tensor(&power, &f, r).unwrap();
        let view = TensorPowerView::new(&g, &f, t, r);
        let leaves = f.leaves();
        for i in 0..leaves.len() {
            for j in i + 1..leaves.len() {
                let e = vec![leaves[i], leaves[j]];
                let by_def = tens.has_edge(&e);
                let by_norm = f.norm(&g, e.iter().copied()) <= t;
                assert_eq!(by_def, by_norm, "pair {e:?}");
                assert_eq!(view.has_edge(&e), by_norm);
            }
        }
    }

    #[test]
    fn walk_validation_and_concat() {
        let g = path_graph(5);
        let view = PowerView { g: &g, t: 2, r: 3 };
        // Single sorted edge is a valid walk of order r.
        let w = TightWalk::new(vec![0, 1, 2]);
        assert_eq!(w.validate(&view, true), Ok(()));
        // A window failure is reported with its index.
        let bad = TightWalk::new(vec![0, 1, 4]);
        assert!(matches!(
            bad.validate(&view, false),
            Err(WalkViolation::WindowNotEdge { index: 0, .. })
        ));
        // Concatenation through a shared interface.
        let p = TightWalk::new(vec![0, 1, 2]);
        let q = TightWalk::new(vec![1, 2, 3]);
        let pq = concat(&p, &q, 3).unwrap();
        assert_eq!(pq.verts, vec![0, 1, 2, 3]);
        assert_eq!(pq.validate(&view, true), Ok(()));
        // Identity against the trivial walk on the end tuple.
        let triv = trivial_walk(p.end(3));
        assert_eq!(concat(&p, &triv, 3).unwrap(), p);
        // Associativity on a triple.
        let s = TightWalk::new(vec![2, 3, 4]);
        let left = concat(&concat(&p, &q, 3).unwrap(), &s, 3).unwrap();
        let right = concat(&p, &concat(&q, &s, 3).unwrap(), 3).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn concat_rejects_mismatched_interfaces() {
        let p = TightWalk::new(vec![0u32, 1, 2]);
        let q = TightWalk::new(vec![0u32, 2, 3]);
        assert!(concat(&p, &q, 3).is_err());
    }

    #[test]
    fn matching_decomposition_bounds() {
        // Triangle (r = 2): 3 matchings, within the r·Δ+1 = 5 bound.
        let h = Hypergraph::new(2, 0..3u32, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let classes = matching_decomposition(&h);
        assert_eq!(classes.len(), 3);
        assert!(classes.len() <= 2 * h.max_degree() + 1);
        // Classes partition the edges and each is a matching.
        let mut all: Vec<Vec<u32>> = classes.iter().flatten().cloned().collect();
        all.sort();
        let mut orig: Vec<Vec<u32>> = h.edges().cloned().collect();
        orig.sort();
        assert_eq!(all, orig);
        for class in &classes {
            let mut seen = BTreeSet::new();
            for e in class {
                for &v in e {
                    assert!(seen.insert(v));
                }
            }
        }
        // A matching decomposes into one class.
        let m = Hypergraph::new(2, 0..4u32, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(matching_decomposition(&m).len(), 1);
    }

    #[test]
    fn longest_mono_path_examples() {
        // Monochromatic complete 3-graph: search finds a path of order >= r.
        let g = GroundGraph::complete(5);
        let h = power_hypergraph(&g, 1, 3).unwrap();
        let res = longest_mono_tight_path(&h, &MonoColouring, 100_000);
        let best = res[0].best.as_ref().unwrap();
        assert!(best.order() >= 3);
        assert_eq!(best.validate(&h, true), Ok(()));
        // r=2 alternating C4: longest mono path has order 2 (single edges).
        let c4 = Hypergraph::new(
            2,
            0..4u32,
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]],
        )
        .unwrap();
        let mut map = BTreeMap::new();
        map.insert(vec![0u32, 1], 0u16);
        map.insert(vec![2u32, 3], 0);
        map.insert(vec![1u32, 2], 1);
        map.insert(vec![0u32, 3], 1);
        let chi = Colouring::new(2, map).unwrap();
        let res = longest_mono_tight_path(&c4, &chi, 100_000);
        for r in &res {
            assert!(r.exact);
            assert_eq!(r.best.as_ref().unwrap().order(), 2);
        }
    }

    #[test]
    fn project_walk_identity_on_height_zero() {
        let g = path_graph(5);
        let f = SForest::new(5, (0..5).map(STree::trivial).collect()).unwrap();
        let w = TightWalk::new(vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        let img = project_walk(&w, &f, &g, 2, 0, 2, 3).unwrap();
        assert_eq!(img.verts, vec![0, 1, 2, 3]);
        assert_eq!(img.order(), w.order());
    }

    #[test]
    fn project_walk_rejects_unseparated() {
        let g = path_graph(4);
        let f = SForest::new(
            4,
            vec![STree::star(0, &[2]).unwrap(), STree::star(1, &[2]).unwrap()],
        )
        .unwrap();
        let w = TightWalk::new(vec![(2, 0), (2, 1)]);
        assert!(project_walk(&w, &f, &g, 1, 1, 10, 2).is_err());
    }
}
