//! S-forests: balanced ordered forests whose vertices are pairs `(x, s)` of
//! ground elements, with all edges inside a fixed second coordinate and every
//! root of the form `(s, s)`. Each ground element roots at most one tree.
//!
//! Values are immutable after construction; all transformations build new
//! forests.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::forest::{Label, OrderedForest};
use crate::ground::{dist_add, dist_max, GroundGraph, INF_DIST};

/// A vertex `(x, s)` of an S-forest: first coordinate and root.
pub type Pair = (u32, u32);

pub fn first(p: Pair) -> u32 {
    p.0
}

/// `π₀`: the root of the tree containing the vertex.
pub fn root_of(p: Pair) -> u32 {
    p.1
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SForestError {
    #[error("no tree rooted at {0}")]
    NoTree(u32),
    #[error("vertex {0:?} not present")]
    NoSuchVertex(Pair),
    #[error("first coordinate {0} duplicated within one tree")]
    DuplicateFirst(u32),
    #[error("tree rooted at {0} is disconnected at {1}")]
    Disconnected(u32, u32),
    #[error("π is applied above the vertex level ({0} > {1})")]
    LevelTooHigh(usize, usize),
    #[error("root deletion applied to a root")]
    RootDeleted,
    #[error("augmentation precondition violated: {0}")]
    BadAugmentation(String),
    #[error("level {0} out of range 1..={1}")]
    BadLevel(usize, usize),
}

/// A single tree of an S-forest, rooted at `(root, root)`.
///
/// Vertices are stored by first coordinate (distinct within a tree); the
/// per-vertex ordered child lists determine the ordered-tree structure, the
/// total order being the preorder they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct STree {
    root: u32,
    children: BTreeMap<u32, Vec<u32>>,
    parent: BTreeMap<u32, u32>,
    /// Ancestor chain per vertex: `anc[y] = [root, ..., y]`, used as the
    /// cached implementation of the level projections.
    anc: BTreeMap<u32, Vec<u32>>,
}

impl STree {
    /// Builds a tree from the root and its ordered adjacency.
    pub fn new(root: u32, children: BTreeMap<u32, Vec<u32>>) -> Result<Self, SForestError> {
        let mut parent = BTreeMap::new();
        let mut seen = BTreeSet::new();
        seen.insert(root);
        for (&p, kids) in &children {
            for &c in kids {
                if parent.insert(c, p).is_some() || c == root {
                    return Err(SForestError::DuplicateFirst(c));
                }
            }
        }
        for &c in parent.keys() {
            if !seen.insert(c) {
                return Err(SForestError::DuplicateFirst(c));
            }
        }
        // Connectivity: every vertex reaches the root through parents.
        let mut anc: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        anc.insert(root, vec![root]);
        for &v in parent.keys() {
            let mut chain = vec![v];
            let mut cur = v;
            loop {
                match parent.get(&cur) {
                    Some(&p) => {
                        chain.push(p);
                        cur = p;
                        if chain.len() > parent.len() + 2 {
                            return Err(SForestError::Disconnected(root, v));
                        }
                    }
                    None => {
                        if cur != root {
                            return Err(SForestError::Disconnected(root, v));
                        }
                        break;
                    }
                }
            }
            chain.reverse();
            anc.insert(v, chain);
        }
        for (&p, _) in &children {
            if p != root && !parent.contains_key(&p) {
                return Err(SForestError::Disconnected(root, p));
            }
        }
        Ok(Self {
            root,
            children,
            parent,
            anc,
        })
    }

    /// A star rooted at `root` with the given leaves, in the given order.
    pub fn star(root: u32, leaves: &[u32]) -> Result<Self, SForestError> {
        let mut children = BTreeMap::new();
        children.insert(root, leaves.to_vec());
        Self::new(root, children)
    }

    /// Height-0 tree: just the root.
    pub fn trivial(root: u32) -> Self {
        Self::new(root, BTreeMap::new()).expect("trivial tree")
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn len(&self) -> usize {
        self.anc.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_first(&self, x: u32) -> bool {
        self.anc.contains_key(&x)
    }

    /// Vertices as pairs, in tree (preorder) order.
    pub fn vertices(&self) -> Vec<Pair> {
        let mut out = Vec::with_capacity(self.len());
        self.preorder(self.root, &mut out);
        out
    }

    fn preorder(&self, v: u32, out: &mut Vec<Pair>) {
        out.push((v, self.root));
        if let Some(kids) = self.children.get(&v) {
            for &c in kids {
                self.preorder(c, out);
            }
        }
    }

    /// First coordinates of all vertices: `π(V(T))`, as a set.
    pub fn pi_support(&self) -> BTreeSet<u32> {
        self.anc.keys().copied().collect()
    }

    pub fn children_of(&self, x: u32) -> &[u32] {
        self.children.get(&x).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent_of(&self, x: u32) -> Option<u32> {
        self.parent.get(&x).copied()
    }

    pub fn level_of(&self, x: u32) -> Option<usize> {
        self.anc.get(&x).map(|c| c.len() - 1)
    }

    pub fn height(&self) -> usize {
        self.anc.values().map(|c| c.len() - 1).max().unwrap_or(0)
    }

    pub fn is_balanced(&self) -> bool {
        let h = self.height();
        self.leaf_firsts()
            .iter()
            .all(|l| self.level_of(*l) == Some(h))
    }

    pub fn min_arity(&self) -> Option<usize> {
        let ks: Vec<usize> = self
            .children
            .values()
            .map(Vec::len)
            .filter(|&k| k > 0)
            .collect();
        ks.into_iter().min()
    }

    pub fn is_d_ary(&self, d: usize) -> bool {
        self.anc.keys().all(|&x| {
            let k = self.children_of(x).len();
            k == 0 || k == d
        })
    }

    /// Leaves (out-degree 0), in tree order, as first coordinates.
    pub fn leaf_firsts(&self) -> Vec<u32> {
        self.vertices()
            .into_iter()
            .filter(|&(x, _)| self.children_of(x).is_empty())
            .map(|(x, _)| x)
            .collect()
    }

    /// Leaves, in tree order, as pairs.
    pub fn leaves(&self) -> Vec<Pair> {
        self.leaf_firsts().into_iter().map(|x| (x, self.root)).collect()
    }

    /// `π_i(v)` via the cached ancestor chain.
    pub fn pi_level(&self, x: u32, i: usize) -> Result<u32, SForestError> {
        let chain = self
            .anc
            .get(&x)
            .ok_or(SForestError::NoSuchVertex((x, self.root)))?;
        if i >= chain.len() {
            return Err(SForestError::LevelTooHigh(i, chain.len() - 1));
        }
        Ok(chain[i])
    }

    /// `π_i(v)` via an explicit parent walk (independent of the cache).
    pub fn pi_level_walk(&self, x: u32, i: usize) -> Result<u32, SForestError> {
        let level = self
            .level_of(x)
            .ok_or(SForestError::NoSuchVertex((x, self.root)))?;
        if i > level {
            return Err(SForestError::LevelTooHigh(i, level));
        }
        let mut cur = x;
        for _ in 0..(level - i) {
            cur = self.parent_of(cur).expect("walk stays in the tree");
        }
        Ok(cur)
    }

    /// `rd`: root deletion of a non-root vertex, `(x, y) ↦ (x, π₁((x, y)))`.
    pub fn root_delete(&self, x: u32) -> Result<Pair, SForestError> {
        if x == self.root {
            return Err(SForestError::RootDeleted);
        }
        Ok((x, self.pi_level(x, 1)?))
    }

    /// Deepest common ancestor of a nonempty set of vertices.
    pub fn meet(&self, xs: &[u32]) -> Result<u32, SForestError> {
        let mut common: Option<Vec<u32>> = None;
        for &x in xs {
            let chain = self
                .anc
                .get(&x)
                .ok_or(SForestError::NoSuchVertex((x, self.root)))?;
            common = Some(match common {
                None => chain.clone(),
                Some(prev) => {
                    let n = prev
                        .iter()
                        .zip(chain.iter())
                        .take_while(|(a, b)| a == b)
                        .count();
                    prev[..n].to_vec()
                }
            });
        }
        common
            .and_then(|c| c.last().copied())
            .ok_or(SForestError::NoSuchVertex((0, self.root)))
    }

    /// True when some incomparable pair of vertices dominates `e` and `f`
    /// respectively; equivalently, their meets are incomparable.
    pub fn independent(&self, e: &[u32], f: &[u32]) -> Result<bool, SForestError> {
        let me = self.meet(e)?;
        let mf = self.meet(f)?;
        let ce = &self.anc[&me];
        let cf = &self.anc[&mf];
        let n = ce.len().min(cf.len());
        Ok(ce[..n] != cf[..n])
    }

    /// The shape of this tree as an ordered forest on rank labels, with maps
    /// between labels and first coordinates.
    pub fn shape_map(&self) -> ShapeMap {
        let mut label_of = BTreeMap::new();
        let mut ground_of = BTreeMap::new();
        let mut stack = vec![(self.root, vec![1u32])];
        while let Some((x, lab)) = stack.pop() {
            label_of.insert(x, lab.clone());
            ground_of.insert(lab.clone(), x);
            for (i, &c) in self.children_of(x).iter().enumerate() {
                let mut l = lab.clone();
                l.push(i as u32 + 1);
                stack.push((c, l));
            }
        }
        let forest = OrderedForest::new(ground_of.keys().cloned()).expect("ranks are prefix closed");
        ShapeMap {
            forest,
            ground_of,
            label_of,
        }
    }

    /// Ancestor closure of `xs` as a subtree of `self`.
    pub fn closure(&self, xs: &[u32]) -> Result<STree, SForestError> {
        let mut keep = BTreeSet::new();
        for &x in xs {
            let chain = self
                .anc
                .get(&x)
                .ok_or(SForestError::NoSuchVertex((x, self.root)))?;
            keep.extend(chain.iter().copied());
        }
        self.restrict(&keep)
    }

    /// Induced subtree on a root-containing, ancestor-closed subset.
    pub fn restrict(&self, keep: &BTreeSet<u32>) -> Result<STree, SForestError> {
        if !keep.contains(&self.root) {
            return Err(SForestError::Disconnected(self.root, self.root));
        }
        let mut children = BTreeMap::new();
        for &x in keep {
            if !self.anc.contains_key(&x) {
                return Err(SForestError::NoSuchVertex((x, self.root)));
            }
            if x != self.root && !keep.contains(&self.parent[&x]) {
                return Err(SForestError::Disconnected(self.root, x));
            }
            let kids: Vec<u32> = self.children_of(x).iter().copied().filter(|c| keep.contains(c)).collect();
            if !kids.is_empty() {
                children.insert(x, kids);
            }
        }
        STree::new(self.root, children)
    }

    /// The type of a set of leaves: the shape of its ancestor closure.
    pub fn type_of_leaves(&self, xs: &[u32]) -> Result<crate::forest::ForestType, SForestError> {
        Ok(self.closure(xs)?.shape_map().forest.shape())
    }
}

/// Shape of an S-tree as an ordered forest plus the label/ground bijection.
#[derive(Debug, Clone)]
pub struct ShapeMap {
    pub forest: OrderedForest,
    pub ground_of: BTreeMap<Label, u32>,
    pub label_of: BTreeMap<u32, Label>,
}

// ---------------------------------------------------------------------------
// Forests
// ---------------------------------------------------------------------------

/// An S-forest over ground elements `0..ground_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SForest {
    ground_n: u32,
    trees: BTreeMap<u32, STree>,
}

impl SForest {
    pub fn new(ground_n: u32, trees: Vec<STree>) -> Result<Self, SForestError> {
        let mut map = BTreeMap::new();
        for t in trees {
            if t.root >= ground_n {
                return Err(SForestError::NoSuchVertex((t.root, t.root)));
            }
            for x in t.pi_support() {
                if x >= ground_n {
                    return Err(SForestError::NoSuchVertex((x, t.root)));
                }
            }
            let root = t.root;
            if map.insert(root, t).is_some() {
                return Err(SForestError::DuplicateFirst(root));
            }
        }
        Ok(Self {
            ground_n,
            trees: map,
        })
    }

    pub fn empty(ground_n: u32) -> Self {
        Self {
            ground_n,
            trees: BTreeMap::new(),
        }
    }

    pub fn ground_n(&self) -> u32 {
        self.ground_n
    }

    /// Roots in ground order.
    pub fn roots(&self) -> Vec<u32> {
        self.trees.keys().copied().collect()
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// `F(s)`: the subtree rooted at `(s, s)`.
    pub fn subtree_at(&self, s: u32) -> Result<&STree, SForestError> {
        self.trees.get(&s).ok_or(SForestError::NoTree(s))
    }

    pub fn trees(&self) -> impl Iterator<Item = &STree> + '_ {
        self.trees.values()
    }

    pub fn contains(&self, p: Pair) -> bool {
        self.trees
            .get(&p.1)
            .map(|t| t.contains_first(p.0))
            .unwrap_or(false)
    }

    /// All vertices in the forest order (trees by root, preorder within).
    pub fn vertices(&self) -> Vec<Pair> {
        self.trees.values().flat_map(|t| t.vertices()).collect()
    }

    /// All leaves in the forest order.
    pub fn leaves(&self) -> Vec<Pair> {
        self.trees.values().flat_map(|t| t.leaves()).collect()
    }

    /// Position of every vertex in the forest order.
    pub fn order_index(&self) -> BTreeMap<Pair, usize> {
        self.vertices()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect()
    }

    pub fn height(&self) -> usize {
        self.trees.values().map(STree::height).max().unwrap_or(0)
    }

    pub fn is_balanced(&self) -> bool {
        let h = self.height();
        self.trees
            .values()
            .all(|t| t.is_balanced() && t.height() == h)
    }

    /// `π_i` of a vertex.
    pub fn project(&self, p: Pair, i: usize) -> Result<u32, SForestError> {
        self.subtree_at(p.1)?.pi_level(p.0, i)
    }

    /// `rd^F` of a non-root vertex.
    pub fn root_delete(&self, p: Pair) -> Result<Pair, SForestError> {
        self.subtree_at(p.1)?.root_delete(p.0)
    }

    /// `‖e‖_G`: maximum ground distance between the roots of the vertices.
    pub fn norm<I: IntoIterator<Item = Pair> + Clone>(&self, g: &GroundGraph, e: I) -> u32 {
        let roots: Vec<u32> = e.into_iter().map(root_of).collect();
        let mut best = 0u32;
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                best = dist_max(best, g.dist(roots[i], roots[j]));
            }
        }
        best
    }

    /// Level `i` is `k`-short: every edge into level `i` spans ground
    /// distance at most `k` under `π`.
    pub fn is_k_short(&self, g: &GroundGraph, level: usize, k: u32) -> Result<bool, SForestError> {
        let h = self.height();
        if level == 0 || level > h {
            return Err(SForestError::BadLevel(level, h));
        }
        Ok(self.shortness_violation(g, level, k).is_none())
    }

    pub fn shortness_violation(&self, g: &GroundGraph, level: usize, k: u32) -> Option<(Pair, Pair)> {
        for t in self.trees.values() {
            for (x, _) in t.vertices() {
                if t.level_of(x) == Some(level) {
                    let p = t.parent_of(x).expect("level >= 1");
                    let d = g.dist(p, x);
                    if d == INF_DIST || d > k {
                        return Some(((p, t.root), (x, t.root)));
                    }
                }
            }
        }
        None
    }

    /// All levels `1..=height` are `k`-short.
    pub fn all_levels_short(&self, g: &GroundGraph, k: u32) -> bool {
        (1..=self.height()).all(|i| self.is_k_short(g, i, k).unwrap_or(false))
    }

    /// `d`-separation: trees rooted within ground distance `d` have disjoint
    /// `π`-images. Returns the violating pair of roots and a shared element.
    pub fn separation_violation(&self, g: &GroundGraph, d: u32) -> Option<(u32, u32, u32)> {
        let roots = self.roots();
        let supports: BTreeMap<u32, BTreeSet<u32>> = roots
            .iter()
            .map(|&r| (r, self.trees[&r].pi_support()))
            .collect();
        for (i, &u) in roots.iter().enumerate() {
            let du = g.distances_from(u);
            for &v in &roots[i + 1..] {
                if du[v as usize] <= d {
                    if let Some(&shared) = supports[&u].intersection(&supports[&v]).next() {
                        return Some((u, v, shared));
                    }
                }
            }
        }
        None
    }

    pub fn is_d_separated(&self, g: &GroundGraph, d: u32) -> bool {
        self.separation_violation(g, d).is_none()
    }

    /// True iff `self` is an augmentation of `old`: for every root `v`, the
    /// root-deletion map sends `self(v)⁻` into `old` as a monomorphism.
    /// On failure returns the violating root and vertex.
    pub fn is_augmentation_of(&self, old: &SForest) -> Result<(), (u32, Pair)> {
        let order = old.order_index();
        for (&v, tree) in &self.trees {
            // Collect rd images of the non-root vertices, in tree order.
            let verts: Vec<Pair> = tree
                .vertices()
                .into_iter()
                .filter(|&(x, _)| x != tree.root)
                .collect();
            let mut images = Vec::with_capacity(verts.len());
            for &(x, _) in &verts {
                let img = match tree.root_delete(x) {
                    Ok(i) => i,
                    Err(_) => return Err((v, (x, v))),
                };
                if !old.contains(img) {
                    return Err((v, (x, v)));
                }
                images.push(img);
            }
            // Injectivity (first coordinates are distinct in a tree, so rd is
            // injective automatically, but check anyway) and order
            // preservation with respect to the order of `old`.
            let mut seen = BTreeSet::new();
            for w in images.windows(2) {
                if order[&w[0]] >= order[&w[1]] {
                    let bad = verts[images.iter().position(|&i| i == w[1]).unwrap()];
                    return Err((v, bad));
                }
            }
            for (pos, &img) in images.iter().enumerate() {
                if !seen.insert(img) {
                    return Err((v, verts[pos]));
                }
            }
            // Edges map to edges.
            for &(x, _) in &verts {
                if let Some(p) = tree.parent_of(x) {
                    if p != tree.root {
                        let fx = tree.root_delete(x).unwrap();
                        let fp = tree.root_delete(p).unwrap();
                        let ok = old
                            .subtree_at(fx.1)
                            .ok()
                            .and_then(|t| t.parent_of(fx.0).map(|q| (q, fx.1) == fp))
                            .unwrap_or(false);
                        if !ok {
                            return Err((v, (x, v)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `(v; T₁; …; T_k)`: the single-tree augmentation. The trees must be rooted
/// at distinct elements different from `v`, carry pairwise disjoint
/// `π`-supports avoiding `v`, and be passed in increasing root order.
pub fn augment_tree(v: u32, trees: &[&STree]) -> Result<STree, SForestError> {
    if trees.is_empty() {
        return Err(SForestError::BadAugmentation("no trees given".into()));
    }
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    seen.insert(v);
    let mut prev_root = None;
    for t in trees {
        if t.root == v {
            return Err(SForestError::BadAugmentation(format!(
                "tree rooted at the new root {v}"
            )));
        }
        if let Some(p) = prev_root {
            if t.root <= p {
                return Err(SForestError::BadAugmentation(
                    "trees must be in increasing root order".into(),
                ));
            }
        }
        prev_root = Some(t.root);
        for x in t.pi_support() {
            if !seen.insert(x) {
                return Err(SForestError::BadAugmentation(format!(
                    "π-supports are not disjoint at {x}"
                )));
            }
        }
    }
    let mut children: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    children.insert(v, trees.iter().map(|t| t.root).collect());
    for t in trees {
        for (&p, kids) in &t.children {
            children.insert(p, kids.clone());
        }
    }
    STree::new(v, children)
}

/// Mode and outcome of the sampled part of the augmentation property check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationReport {
    pub projection_identity_ok: bool,
    pub level1_via_rd_ok: bool,
    pub norm_pairs_checked: usize,
    pub norm_mode_exhaustive: bool,
    pub norm_violations: Vec<(Pair, Pair)>,
    pub edge_map_checked: usize,
    pub edge_map_violations: Vec<Vec<Pair>>,
}

impl AugmentationReport {
    pub fn ok(&self) -> bool {
        self.projection_identity_ok
            && self.level1_via_rd_ok
            && self.norm_violations.is_empty()
            && self.edge_map_violations.is_empty()
    }
}

/// Verifies the three augmentation properties of `new` over `old`:
/// (i) `π ∘ rd = π` (and `π₁ = π₀ ∘ rd` off the roots), (ii) norms drop by at
/// most `2k` under `rd` (checked on pairs, which is equivalent since norms
/// are pairwise maxima), (iii) `rd` maps `r`-edges of `𝒢ˢ⊗new` into edges of
/// `𝒢ᵗ⊗old` whenever `t ≥ s + 2k`.
#[allow(clippy::too_many_arguments)]
pub fn augmentation_properties_check(
    new: &SForest,
    old: &SForest,
    g: &GroundGraph,
    k: u32,
    s: u32,
    t: u32,
    r: usize,
    exhaustive_budget: usize,
) -> Result<AugmentationReport, SForestError> {
    if new.is_augmentation_of(old).is_err() {
        return Err(SForestError::BadAugmentation(
            "new forest does not augment the old one".into(),
        ));
    }
    if new.height() >= 1 && !new.is_k_short(g, 1, k)? {
        return Err(SForestError::BadAugmentation(format!(
            "level 1 of the new forest is not {k}-short"
        )));
    }
    if !new.is_d_separated(g, s) {
        return Err(SForestError::BadAugmentation(format!(
            "new forest is not {s}-separated"
        )));
    }
    if t < s + 2 * k {
        return Err(SForestError::BadAugmentation(format!(
            "t = {t} < s + 2k = {}",
            s + 2 * k
        )));
    }

    let mut report = AugmentationReport {
        projection_identity_ok: true,
        level1_via_rd_ok: true,
        norm_pairs_checked: 0,
        norm_mode_exhaustive: true,
        norm_violations: Vec::new(),
        edge_map_checked: 0,
        edge_map_violations: Vec::new(),
    };

    // (i) on every non-root vertex.
    for tree in new.trees() {
        for (x, _) in tree.vertices() {
            if x == tree.root {
                continue;
            }
            let rd = tree.root_delete(x)?;
            if first(rd) != x {
                report.projection_identity_ok = false;
            }
            if root_of(rd) != tree.pi_level(x, 1)? {
                report.level1_via_rd_ok = false;
            }
        }
    }

    // (ii) on leaf pairs, exhaustively when within budget else sampled by a
    // deterministic stride.
    let leaves = new.leaves();
    let total_pairs = leaves.len() * leaves.len().saturating_sub(1) / 2;
    let stride = if total_pairs <= exhaustive_budget {
        1
    } else {
        report.norm_mode_exhaustive = false;
        total_pairs / exhaustive_budget + 1
    };
    let mut counter = 0usize;
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            counter += 1;
            if counter % stride != 0 && stride > 1 {
                continue;
            }
            let (a, b) = (leaves[i], leaves[j]);
            let pair_norm = g.dist(root_of(a), root_of(b));
            let (ra, rb) = (new.root_delete(a)?, new.root_delete(b)?);
            let rd_norm = g.dist(root_of(ra), root_of(rb));
            report.norm_pairs_checked += 1;
            if dist_add(pair_norm, 2 * k) < rd_norm {
                report.norm_violations.push((a, b));
            }
        }
    }

    // (iii): r-sets of leaves with norm <= s must map to r-sets of old leaves
    // with norm <= t. Enumerate r-subsets of leaves, bounded by the budget.
    let mut count = 0usize;
    let mut idx = vec![0usize; r];
    enumerate_subsets(leaves.len(), r, &mut idx, &mut |chosen| {
        if count >= exhaustive_budget {
            return false;
        }
        let e: Vec<Pair> = chosen.iter().map(|&i| leaves[i]).collect();
        if new.norm(g, e.iter().copied()) <= s {
            count += 1;
            let rd_e: Vec<Pair> = e.iter().map(|&p| new.root_delete(p).unwrap()).collect();
            let distinct: BTreeSet<Pair> = rd_e.iter().copied().collect();
            let ok = distinct.len() == r
                && rd_e.iter().all(|&p| {
                    old.contains(p)
                        && old
                            .subtree_at(root_of(p))
                            .map(|tr| tr.children_of(first(p)).is_empty())
                            .unwrap_or(false)
                })
                && old.norm(g, rd_e.iter().copied()) <= t;
            if !ok {
                report.edge_map_violations.push(e);
            }
        }
        true
    });
    report.edge_map_checked = count;
    Ok(report)
}

/// Calls `f` with every `k`-subset of `0..n` (as index slices) until `f`
/// returns false.
pub fn enumerate_subsets<F: FnMut(&[usize]) -> bool>(n: usize, k: usize, idx: &mut [usize], f: &mut F) {
    fn rec<F: FnMut(&[usize]) -> bool>(
        n: usize,
        k: usize,
        start: usize,
        depth: usize,
        idx: &mut [usize],
        f: &mut F,
        alive: &mut bool,
    ) {
        if !*alive {
            return;
        }
        if depth == k {
            *alive = f(&idx[..k]);
            return;
        }
        for i in start..n {
            idx[depth] = i;
            rec(n, k, i + 1, depth + 1, idx, f, alive);
            if !*alive {
                return;
            }
        }
    }
    let mut alive = true;
    rec(n, k, 0, 0, idx, f, &mut alive);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: u32) -> GroundGraph {
        let edges: Vec<(u32, u32)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        GroundGraph::new(n, &edges).unwrap()
    }

    fn two_level_tree() -> STree {
        // root 0 -> {1, 2}; 1 -> {3, 4}; 2 -> {5}
        let mut ch = BTreeMap::new();
        ch.insert(0, vec![1, 2]);
        ch.insert(1, vec![3, 4]);
        ch.insert(2, vec![5]);
        STree::new(0, ch).unwrap()
    }

    #[test]
    fn subtrees_partition_vertices() {
        let f = SForest::new(
            6,
            vec![STree::star(0, &[2, 3]).unwrap(), STree::star(1, &[4, 5]).unwrap()],
        )
        .unwrap();
        let all = f.vertices();
        let mut seen = BTreeSet::new();
        for p in &all {
            assert!(seen.insert(*p));
        }
        assert_eq!(all.len(), 6);
        // Every vertex reachable from its root within its own tree.
        for t in f.trees() {
            for (x, _) in t.vertices() {
                assert_eq!(t.pi_level(x, 0).unwrap(), t.root());
            }
        }
    }

    #[test]
    fn projections_walk_equals_cache() {
        let t = two_level_tree();
        for (x, _) in t.vertices() {
            let lvl = t.level_of(x).unwrap();
            for i in 0..=lvl {
                assert_eq!(t.pi_level(x, i).unwrap(), t.pi_level_walk(x, i).unwrap());
            }
            assert_eq!(t.pi_level(x, lvl).unwrap(), x);
            assert_eq!(t.pi_level(x, 0).unwrap(), 0);
        }
    }

    #[test]
    fn rd_on_stars_and_deeper_trees() {
        // Height-1 star at (v,v): leaf (u,v) maps to (u,u).
        let star = STree::star(7, &[1, 2]).unwrap();
        assert_eq!(star.root_delete(1).unwrap(), (1, 1));
        // Height-2: leaf with level-1 ancestor w maps to (leaf, w).
        let t = two_level_tree();
        assert_eq!(t.root_delete(3).unwrap(), (3, 1));
        assert_eq!(t.root_delete(5).unwrap(), (5, 2));
        assert!(t.root_delete(0).is_err());
    }

    #[test]
    fn rd_restriction_property() {
        // rd computed in a subtree agrees with rd in the supertree.
        let t = two_level_tree();
        let mut keep = BTreeSet::new();
        keep.extend([0, 1, 3]);
        let sub = t.restrict(&keep).unwrap();
        for (x, _) in sub.vertices() {
            if x != sub.root() {
                assert_eq!(sub.root_delete(x).unwrap(), t.root_delete(x).unwrap());
            }
        }
    }

    #[test]
    fn norm_examples() {
        let g = path_graph(5);
        let f = SForest::new(
            5,
            vec![STree::star(0, &[2]).unwrap(), STree::star(3, &[4]).unwrap()],
        )
        .unwrap();
        // Same tree: norm 0.
        assert_eq!(f.norm(&g, [(0, 0), (2, 0)]), 0);
        // Roots at distance 3.
        assert_eq!(f.norm(&g, [(2, 0), (4, 3)]), 3);
        // Equal root sets have equal norms.
        assert_eq!(
            f.norm(&g, [(0, 0), (4, 3)]),
            f.norm(&g, [(2, 0), (4, 3)])
        );
    }

    #[test]
    fn norm_disconnected_is_infinite() {
        let g = GroundGraph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let f = SForest::new(
            4,
            vec![STree::trivial(0), STree::trivial(2)],
        )
        .unwrap();
        assert_eq!(f.norm(&g, [(0, 0), (2, 2)]), INF_DIST);
    }

    #[test]
    fn augment_tree_single_root_gives_edge() {
        let t1 = STree::trivial(4);
        let t = augment_tree(9, &[&t1]).unwrap();
        assert_eq!(t.vertices(), vec![(9, 9), (4, 9)]);
        assert_eq!(t.height(), 1);
    }

    #[test]
    fn augment_tree_heights_and_rd_monomorphism() {
        let t1 = STree::star(1, &[2, 3]).unwrap();
        let t2 = STree::star(4, &[5, 6]).unwrap();
        let t = augment_tree(0, &[&t1, &t2]).unwrap();
        assert_eq!(t.height(), 1 + t1.height().max(t2.height()));
        // rd restricted to the non-root part lands in the original forest.
        let old = SForest::new(7, vec![t1.clone(), t2.clone()]).unwrap();
        let new = SForest::new(7, vec![t.clone()]).unwrap();
        assert_eq!(new.is_augmentation_of(&old), Ok(()));
    }

    #[test]
    fn augment_tree_rejects_bad_inputs() {
        let t1 = STree::star(1, &[2]).unwrap();
        let t2 = STree::star(3, &[2]).unwrap(); // shares π-support
        assert!(augment_tree(0, &[&t1, &t2]).is_err());
        let t3 = STree::star(3, &[4]).unwrap();
        assert!(augment_tree(0, &[&t3, &t1]).is_err()); // wrong order
        assert!(augment_tree(2, &[&t1]).is_err()); // v inside a support
    }

    #[test]
    fn forest_equal_to_itself_is_not_an_augmentation_in_general() {
        // Height >= 1: rd of a leaf lands at (x, x) which is generally not a
        // vertex of the same forest.
        let f = SForest::new(4, vec![STree::star(0, &[1, 2]).unwrap()]).unwrap();
        assert!(f.is_augmentation_of(&f).is_err());
        // Empty forest augments anything vacuously.
        let empty = SForest::empty(4);
        assert_eq!(empty.is_augmentation_of(&f), Ok(()));
    }

    #[test]
    fn shortness_checks() {
        let g = path_graph(6);
        let f = SForest::new(
            6,
            vec![STree::star(0, &[1, 2]).unwrap(), STree::star(5, &[4]).unwrap()],
        )
        .unwrap();
        assert!(f.is_k_short(&g, 1, 2).unwrap());
        assert!(!f.is_k_short(&g, 1, 1).unwrap());
        assert!(f.is_k_short(&g, 1, g.diameter()).unwrap());
        assert!(f.is_k_short(&g, 2, 0).is_err());
    }

    #[test]
    fn distances_in_short_trees_lemma() {
        // d_G(u, v) <= ||W|| + ik + jk for u, v in levels i, j over W.
        let g = path_graph(8);
        let mut ch = BTreeMap::new();
        ch.insert(0, vec![1]);
        ch.insert(1, vec![2]);
        let t0 = STree::new(0, ch).unwrap();
        let mut ch = BTreeMap::new();
        ch.insert(5, vec![4]);
        ch.insert(4, vec![3]);
        let t5 = STree::new(5, ch).unwrap();
        let f = SForest::new(8, vec![t0, t5]).unwrap();
        let k = 1;
        assert!(f.all_levels_short(&g, k));
        let leaves = f.leaves();
        for w in [[leaves[0], leaves[1]]] {
            let norm = f.norm(&g, w.iter().copied());
            for &(x, rx) in &w {
                for &(y, ry) in &w {
                    let tx = f.subtree_at(rx).unwrap();
                    let ty = f.subtree_at(ry).unwrap();
                    for i in 0..=tx.level_of(x).unwrap() {
                        for j in 0..=ty.level_of(y).unwrap() {
                            let u = tx.pi_level(x, i).unwrap();
                            let v = ty.pi_level(y, j).unwrap();
                            assert!(g.dist(u, v) <= norm + (i as u32) * k + (j as u32) * k);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn separation_checks() {
        let g = path_graph(6);
        // Two stars sharing π-vertex 2, roots at distance 1.
        let f = SForest::new(
            6,
            vec![STree::star(0, &[2]).unwrap(), STree::star(1, &[2]).unwrap()],
        )
        .unwrap();
        let viol = f.separation_violation(&g, 1).unwrap();
        assert_eq!(viol, (0, 1, 2));
        // A single tree is separated for every d.
        let single = SForest::new(6, vec![STree::star(0, &[1, 2]).unwrap()]).unwrap();
        assert!(single.is_d_separated(&g, 5));
    }

    #[test]
    fn independence_and_single_root_observation() {
        let t = two_level_tree();
        // {3} and {5} sit under incomparable 1 and 2.
        assert!(t.independent(&[3], &[5]).unwrap());
        // {3} and {4} only share comparable dominators through vertex 1... the
        // meets are the leaves themselves which are incomparable.
        assert!(t.independent(&[3], &[4]).unwrap());
        // {3,4} and {3} have comparable meets (1 is an ancestor of 3).
        assert!(!t.independent(&[3, 4], &[3]).unwrap());
        // In a star, two 2-sets of leaves are never independent.
        let star = STree::star(0, &[1, 2, 3, 4]).unwrap();
        assert!(!star.independent(&[1, 2], &[3, 4]).unwrap());
    }

    #[test]
    fn augmentation_properties_on_construction() {
        let g = path_graph(8);
        let t1 = STree::star(1, &[2]).unwrap();
        let t4 = STree::star(4, &[5]).unwrap();
        let old = SForest::new(8, vec![t1.clone(), t4.clone()]).unwrap();
        let aug = augment_tree(3, &[&t1, &t4]).unwrap();
        let new = SForest::new(8, vec![aug]).unwrap();
        // Level 1 of new spans d(3,1)=2, d(3,4)=1: 2-short.
        let k = 2;
        let s = 0;
        let report = augmentation_properties_check(&new, &old, &g, k, s, s + 2 * k, 3, 10_000).unwrap();
        assert!(report.ok(), "{report:?}");
        assert!(report.norm_mode_exhaustive);
    }
}
