//! Versatile leaf sets and walk rerouting.
//!
//! A leaf set `e` of a balanced tree `T` is `t`-versatile when every
//! monomorphism of its ancestor closure into a small tree `T'` can be
//! inverted by an embedding of all of `T'` back into `T` fixing the closure.
//! Versatile sets let tight walks be re-anchored onto prescribed leaf sets
//! without changing any edge's root set or type, which is what makes short
//! walks concatenable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::forest::{
    find_monomorphisms, find_monomorphisms_with_pins, ForestType, Label, Monomorphism,
    OrderedForest,
};
use crate::hypergraph::{EdgeSet, TightWalk};
use crate::sforest::{Pair, SForest};

#[derive(Debug, Error)]
pub enum VersatileError {
    #[error("arity {have} too small: the sequence needs d ≥ 2^k(s+1)−1 = {need}")]
    ArityTooSmall { have: usize, need: u64 },
    #[error("host labels are not consecutive ranks at {0:?}")]
    NotRankLabelled(Label),
    #[error("no type-{0:?} subtree available")]
    NoTypeCopy(String),
    #[error("extension replay ran out of sequence trees (needs {need}, has {have})")]
    SequenceTooShort { need: usize, have: usize },
    #[error("replay step failed: {0}")]
    ReplayFailed(String),
    #[error("walk endpoints invalid: {0}")]
    BadWalk(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("versatility budget {budget} below required {need}")]
    BudgetTooSmall { budget: usize, need: usize },
    #[error("no inverse embedding found")]
    NoInverse,
    #[error("forest error: {0}")]
    Forest(#[from] crate::forest::ForestError),
}

/// `d_i = 2^(k−i)(s+1) − 1`, the arity of the i-th sequence tree.
pub fn sequence_arity(k: usize, i: usize, s: usize) -> u64 {
    (1u64 << (k - i)) * (s as u64 + 1) - 1
}

/// `X_i = 2^i · [d_i]`, the surviving child ranks at step i.
pub fn sequence_ranks(k: usize, i: usize, s: usize) -> Vec<u32> {
    let d_i = sequence_arity(k, i, s);
    (1..=d_i as u32).map(|j| j << i).collect()
}

/// The nested tree sequence `T_0 ≥ T_1 ≥ … ≥ T_k` built from child ranks in
/// the doubling sets `X_i`, on a rank-labelled host.
#[derive(Debug, Clone)]
pub struct VersatileSequence {
    pub k: usize,
    pub s: usize,
    /// `trees[i]` = T_i, as a subtree of the host (host labels).
    pub trees: Vec<OrderedForest>,
}

/// Checks that every vertex's children are labelled 1..=arity.
fn is_rank_labelled(t: &OrderedForest) -> Result<(), VersatileError> {
    for v in t.vertices() {
        for (i, c) in t.children(v).into_iter().enumerate() {
            if c[c.len() - 1] != i as u32 + 1 {
                return Err(VersatileError::NotRankLabelled(c));
            }
        }
    }
    Ok(())
}

/// Builds the sequence inside a rank-labelled balanced tree of arity
/// ≥ 2^k(s+1)−1. `T_i` keeps exactly the vertices whose child ranks all lie
/// in `X_i`, so `T_k` is balanced s-ary.
pub fn build_versatile_sequence(
    host: &OrderedForest,
    k: usize,
    s: usize,
) -> Result<VersatileSequence, VersatileError> {
    is_rank_labelled(host)?;
    let need = sequence_arity(k, 0, s);
    let have = host.min_arity().unwrap_or(0);
    if host.height() > 0 && (have as u64) < need {
        return Err(VersatileError::ArityTooSmall { have, need });
    }
    let mut trees = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let ranks: BTreeSet<u32> = sequence_ranks(k, i, s).into_iter().collect();
        let verts: BTreeSet<Label> = host
            .vertices()
            .filter(|v| v[1..].iter().all(|c| ranks.contains(c)))
            .cloned()
            .collect();
        trees.push(OrderedForest::new(verts)?);
    }
    // T_0 is the (2^k(s+1)−1)-ary skeleton, T_k is s-ary.
    debug_assert!(trees[k].is_d_ary(s) || trees[k].height() == 0);
    Ok(VersatileSequence { k, s, trees })
}

/// Property (∗): for `S ≤ trees[i]` and an insertion step anchored at
/// `anchor` whose preceding sibling has rank `base` (0 for a first child),
/// the fresh child of rank `base + 2^(i−1)` lies in `trees[i−1]`.
pub fn extension_rank(i: usize, base: u32) -> u32 {
    base + (1u32 << (i - 1))
}

impl VersatileSequence {
    /// Finds the `P`-extension of `S ≤ trees[i]` inside `trees[i−1]`, per the
    /// rank formula. `path` is the insertion chain (parent first).
    pub fn find_extension(
        &self,
        i: usize,
        s_tree: &OrderedForest,
        path: &[Label],
    ) -> Result<Label, VersatileError> {
        if i == 0 {
            return Err(VersatileError::SequenceTooShort { need: 1, have: 0 });
        }
        let anchor = &path[0];
        let base = if path.len() >= 2 {
            *path[1].last().expect("nonempty label")
        } else {
            0
        };
        let mut y = anchor.clone();
        y.push(extension_rank(i, base));
        if !self.trees[i - 1].contains(&y) {
            return Err(VersatileError::ReplayFailed(format!(
                "rank formula left the previous tree at {y:?}"
            )));
        }
        // Confirm the insertion is valid in S.
        s_tree.insert_vertex(path, &y)?;
        Ok(y)
    }
}

// ---------------------------------------------------------------------------
// Witnesses
// ---------------------------------------------------------------------------

/// How a versatile set was obtained, and hence how ψ is produced.
#[derive(Debug, Clone)]
pub enum WitnessMode {
    /// Paper construction: the doubling sequence is available and ψ is built
    /// by replaying the extension sequence through it.
    Constructed { seq: VersatileSequence },
    /// Spread construction: the leaf set was embedded with gaps of spare
    /// subtrees on every side; ψ is found by pinned backtracking. The
    /// guaranteed gap bounds which `T'` are certain to embed, but the search
    /// verifies every ψ it returns, so soundness never depends on it.
    Spread { guaranteed_gap: usize },
}

/// A type-τ leaf set of a tree together with the machinery to invert
/// monomorphisms out of its closure.
#[derive(Debug, Clone)]
pub struct VersatileWitness {
    pub tree: OrderedForest,
    pub leaf_set: Vec<Label>,
    pub tau: ForestType,
    pub budget: usize,
    pub mode: WitnessMode,
}

impl VersatileWitness {
    /// `A^T(e)`, the closure of the witness set.
    pub fn closure(&self) -> OrderedForest {
        self.tree
            .ancestor_closure(&self.leaf_set)
            .expect("witness leaves live in the tree")
    }

    /// Builds `ψ : T' → T` with `ψ ∘ φ = id` for a monomorphism `φ` from the
    /// witness closure into a balanced tree `T'` of the same height with at
    /// most `budget` leaves. The result is fully re-verified.
    pub fn build_psi(
        &self,
        t_prime: &OrderedForest,
        phi: &Monomorphism,
    ) -> Result<Monomorphism, VersatileError> {
        let closure = self.closure();
        if t_prime.leaves().len() > self.budget {
            return Err(VersatileError::BudgetTooSmall {
                budget: self.budget,
                need: t_prime.leaves().len(),
            });
        }
        let psi = match &self.mode {
            WitnessMode::Constructed { seq } => self.replay_psi(seq, t_prime, phi, &closure)?,
            WitnessMode::Spread { .. } => {
                let pins: BTreeMap<Label, Label> = closure
                    .vertices()
                    .map(|x| (phi.apply(x).expect("phi total on closure").clone(), x.clone()))
                    .collect();
                find_monomorphisms_with_pins(t_prime, &self.tree, &pins, 1)
                    .into_iter()
                    .next()
                    .ok_or(VersatileError::NoInverse)?
            }
        };
        if !psi.verify(t_prime, &self.tree) {
            return Err(VersatileError::ReplayFailed("ψ fails verification".into()));
        }
        for x in closure.vertices() {
            let img = phi.apply(x).expect("phi total");
            if psi.apply(img) != Some(x) {
                return Err(VersatileError::ReplayFailed(format!(
                    "ψ∘φ moves {x:?}"
                )));
            }
        }
        Ok(psi)
    }

    /// The paper's replay: decompose `T'` above `φ(S)` into single-vertex
    /// insertions and mirror each through property (∗) of the sequence.
    fn replay_psi(
        &self,
        seq: &VersatileSequence,
        t_prime: &OrderedForest,
        phi: &Monomorphism,
        closure: &OrderedForest,
    ) -> Result<Monomorphism, VersatileError> {
        let image: BTreeSet<Label> = closure
            .vertices()
            .map(|x| phi.apply(x).expect("total").clone())
            .collect();
        let a0 = OrderedForest::new(image.iter().cloned())?;
        let steps = a0.extension_sequence(t_prime)?;
        if steps.len() > seq.k {
            return Err(VersatileError::SequenceTooShort {
                need: steps.len(),
                have: seq.k,
            });
        }
        // ψ_0 = φ⁻¹ on the image; A_0 = closure ⊆ T_k.
        let mut psi = phi.inverse();
        let mut a_cur = closure.clone();
        let mut level = seq.k; // A_i ⊆ trees[level]
        for step in &steps {
            let mapped_path: Vec<Label> = step
                .path
                .iter()
                .map(|v| {
                    psi.apply(v)
                        .cloned()
                        .ok_or_else(|| VersatileError::ReplayFailed(format!("path vertex {v:?} unmapped")))
                })
                .collect::<Result<_, _>>()?;
            let y = seq.find_extension(level, &a_cur, &mapped_path)?;
            a_cur = a_cur.insert_vertex(&mapped_path, &y)?;
            let mut map = psi.map().clone();
            map.insert(step.new_vertex.clone(), y);
            psi = Monomorphism::from_map(map);
            level -= 1;
        }
        Ok(psi)
    }
}

/// Constructs a `t`-versatile type-τ leaf set in a balanced rank-labelled
/// tree: via the doubling sequence when the arity supports it, otherwise via
/// the spread embedding. Errors only when even the spread embedding cannot
/// place the type.
pub fn find_versatile_set(
    host: &OrderedForest,
    tau: &ForestType,
    t: usize,
) -> Result<VersatileWitness, VersatileError> {
    is_rank_labelled(host)?;
    let h = host.height();
    let rep = tau.representative();
    if rep.height() != h || tau.component_count() != 1 {
        return Err(VersatileError::TypeMismatch(format!(
            "type height {} vs host height {h}",
            rep.height()
        )));
    }
    let s_max = rep
        .vertices()
        .map(|v| rep.out_degree(v))
        .max()
        .unwrap_or(0)
        .max(1);
    let k = h * t;
    let need = sequence_arity(k, 0, s_max);
    let have = host.min_arity().unwrap_or(0);
    if h == 0 || (have as u64) >= need {
        // Paper construction: T_{ht} is s_max-ary; embed τ there.
        let seq = build_versatile_sequence(host, k, s_max)?;
        let monos = find_monomorphisms(&rep, &seq.trees[k], 1);
        let m = monos
            .first()
            .ok_or_else(|| VersatileError::NoTypeCopy(format!("{tau:?}")))?;
        let leaf_set = m.image(&rep.leaves());
        return Ok(VersatileWitness {
            tree: host.clone(),
            leaf_set,
            tau: tau.clone(),
            budget: t,
            mode: WitnessMode::Constructed { seq },
        });
    }
    // Spread mode: embed the representative choosing evenly spaced children.
    let mut map: BTreeMap<Label, Label> = BTreeMap::new();
    map.insert(rep.roots()[0].clone(), host.roots()[0].clone());
    let mut min_gap = usize::MAX;
    let mut stack = vec![(rep.roots()[0].clone(), host.roots()[0].clone())];
    while let Some((sv, hv)) = stack.pop() {
        let skids = rep.children(&sv);
        if skids.is_empty() {
            continue;
        }
        let hkids = host.children(&hv);
        let (m, n) = (skids.len(), hkids.len());
        if n < m {
            return Err(VersatileError::NoTypeCopy(format!(
                "host arity {n} below type arity {m} at {hv:?}"
            )));
        }
        // Place child j (0-based) near position (j+1)(n+1)/(m+1), keeping
        // room for the remaining children on the right.
        let mut prev: i64 = -1;
        for (j, sk) in skids.iter().enumerate() {
            let mut pos = (((j + 1) * (n + 1)) / (m + 1)) as i64 - 1;
            pos = pos.max(prev + 1).min((n - m + j) as i64);
            let gap = (pos - prev - 1) as usize;
            min_gap = min_gap.min(gap);
            let hk = hkids[pos as usize].clone();
            map.insert(sk.clone(), hk.clone());
            stack.push((sk.clone(), hk));
            prev = pos;
        }
        min_gap = min_gap.min(n - 1 - prev as usize);
    }
    let phi = Monomorphism::from_map(map);
    if !phi.verify(&rep, host) {
        return Err(VersatileError::ReplayFailed("spread embedding invalid".into()));
    }
    let leaf_set = phi.image(&rep.leaves());
    Ok(VersatileWitness {
        tree: host.clone(),
        leaf_set,
        tau: tau.clone(),
        budget: t,
        mode: WitnessMode::Spread {
            guaranteed_gap: if min_gap == usize::MAX { 0 } else { min_gap },
        },
    })
}

/// Brute-force versatility check: enumerates every balanced height-h ordered
/// tree with at most `t` leaves and every monomorphism of the closure into
/// it, and demands an inverse embedding each time. Exponential; intended for
/// small hosts in tests.
pub fn verify_versatile(host: &OrderedForest, e: &[Label], t: usize) -> Result<bool, VersatileError> {
    let closure = host.ancestor_closure(e)?;
    let h = host.height();
    for tau in ForestType::enumerate_trees(h, t) {
        if !tau.is_balanced() || tau.height() != h || tau.component_count() != 1 {
            continue;
        }
        let t_prime = tau.representative();
        for phi in find_monomorphisms(&closure, &t_prime, usize::MAX) {
            let pins: BTreeMap<Label, Label> = closure
                .vertices()
                .map(|x| (phi.apply(x).unwrap().clone(), x.clone()))
                .collect();
            let found = find_monomorphisms_with_pins(&t_prime, host, &pins, 1);
            if found.is_empty() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All same-root subtrees of `t` with the same height (the `≤` relation),
/// enumerated exhaustively. Exponential; test-scale only.
pub fn enumerate_same_root_subtrees(t: &OrderedForest) -> Vec<OrderedForest> {
    let root = match t.roots().as_slice() {
        [r] => r.clone(),
        _ => return Vec::new(),
    };
    let h = t.height();
    // Grow prefix-closed subsets by DFS over inclusion choices per vertex.
    let mut out = Vec::new();
    let mut current: BTreeSet<Label> = BTreeSet::new();
    current.insert(root.clone());
    fn rec(
        t: &OrderedForest,
        frontier: &[Label],
        current: &mut BTreeSet<Label>,
        out: &mut Vec<OrderedForest>,
        h: usize,
    ) {
        if frontier.is_empty() {
            let f = OrderedForest::new(current.iter().cloned()).expect("prefix closed");
            if f.height() == h {
                out.push(f);
            }
            return;
        }
        let v = &frontier[0];
        let rest = &frontier[1..];
        let kids = t.children(v);
        // Choose any subset of children (including none).
        let m = kids.len();
        for mask in 0u32..(1 << m) {
            let chosen: Vec<Label> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| kids[i].clone()).collect();
            for c in &chosen {
                current.insert(c.clone());
            }
            let mut next = rest.to_vec();
            next.extend(chosen.iter().cloned());
            rec(t, &next, current, out, h);
            for c in &chosen {
                current.remove(c);
            }
        }
    }
    rec(t, &[root], &mut current, &mut out, h);
    out
}

// ---------------------------------------------------------------------------
// Rerouting walks between versatile sets
// ---------------------------------------------------------------------------

/// Inputs for one endpoint of a reroute: the tree's root and the witness on
/// that tree's shape, with the leaf set in ground (first-coordinate) terms.
pub struct EndpointWitness {
    pub root: u32,
    pub witness: VersatileWitness,
    /// Maps shape labels of the tree to ground firsts, as produced by
    /// `STree::shape_map`.
    pub ground_of: BTreeMap<Label, u32>,
    pub label_of: BTreeMap<u32, Label>,
}

impl EndpointWitness {
    pub fn for_tree(f: &SForest, root: u32, witness: VersatileWitness) -> Self {
        let sm = f.subtree_at(root).expect("tree exists").shape_map();
        Self {
            root,
            witness,
            ground_of: sm.ground_of,
            label_of: sm.label_of,
        }
    }

    /// The witness leaf set as pairs.
    pub fn leaf_pairs(&self) -> Vec<Pair> {
        self.witness
            .leaf_set
            .iter()
            .map(|l| (self.ground_of[l], self.root))
            .collect()
    }
}

/// Diagnostic payload of a successful reroute.
pub struct RerouteResult {
    pub walk: TightWalk<Pair>,
    /// For every edge index, the (root set, type code) pair that was checked
    /// equal between the original and rerouted walk.
    pub edge_invariants: Vec<(Vec<u32>, Vec<u32>)>,
}

/// The multi-component type of an r-set of leaves in an S-forest: the
/// concatenated shapes of the per-tree closures, in root order.
pub fn edge_type(f: &SForest, e: &[Pair]) -> Vec<u32> {
    let mut roots: Vec<u32> = e.iter().map(|p| p.1).collect();
    roots.sort_unstable();
    roots.dedup();
    let mut code = Vec::new();
    for root in roots {
        let firsts: Vec<u32> = e.iter().filter(|p| p.1 == root).map(|p| p.0).collect();
        let t = f
            .subtree_at(root)
            .expect("edge lives in the forest")
            .type_of_leaves(&firsts)
            .expect("leaves of the tree");
        code.extend_from_slice(t.code());
    }
    code
}

/// Reroutes a tight walk so that it runs from `a.leaf_pairs()` to
/// `b.leaf_pairs()`: the walk's intersection with each endpoint tree is
/// re-embedded through the versatile witness, everything else is fixed.
/// Every edge of the result is checked to keep its root set and type, and
/// the result is validated as a tight walk in the given host.
pub fn reroute_walk<E: EdgeSet<Pair>>(
    host: &E,
    f: &SForest,
    p: &TightWalk<Pair>,
    a: &EndpointWitness,
    b: &EndpointWitness,
) -> Result<RerouteResult, VersatileError> {
    let r = host.uniformity();
    if a.root == b.root {
        return Err(VersatileError::BadWalk("endpoints in one tree".into()));
    }
    if p.order() < r {
        return Err(VersatileError::BadWalk("walk too short".into()));
    }
    let start_roots: BTreeSet<u32> = p.start(r).iter().map(|q| q.1).collect();
    let end_roots: BTreeSet<u32> = p.end(r).iter().map(|q| q.1).collect();
    if start_roots != BTreeSet::from([a.root]) || end_roots != BTreeSet::from([b.root]) {
        return Err(VersatileError::BadWalk(format!(
            "start/end tuples must sit inside the endpoint trees ({start_roots:?}, {end_roots:?})"
        )));
    }
    // Maps for each endpoint: psi on the closure of the walk's intersection.
    let mut vertex_map: BTreeMap<Pair, Pair> = BTreeMap::new();
    for (end, tuple_is_start) in [(a, true), (b, false)] {
        let tree_walk_firsts: Vec<u32> = {
            let mut xs: Vec<u32> = p
                .verts
                .iter()
                .filter(|q| q.1 == end.root)
                .map(|q| q.0)
                .collect();
            xs.sort_unstable();
            xs.dedup();
            xs
        };
        let walk_labels: Vec<Label> = tree_walk_firsts
            .iter()
            .map(|x| end.label_of[x].clone())
            .collect();
        let big = end.witness.tree.ancestor_closure(&walk_labels)?;
        // φ: closure(e') → big, the unique iso of the same-type tuple's
        // closure onto the closure of the walk's start/end in this tree.
        let tuple: Vec<Pair> = if tuple_is_start {
            p.start(r).to_vec()
        } else {
            p.end(r).to_vec()
        };
        let tuple_labels: Vec<Label> = tuple.iter().map(|q| end.label_of[&q.0].clone()).collect();
        let tuple_closure = end.witness.tree.ancestor_closure(&tuple_labels)?;
        let wit_closure = end.witness.closure();
        if tuple_closure.shape() != wit_closure.shape() {
            return Err(VersatileError::TypeMismatch(format!(
                "endpoint tuple type {:?} vs witness type {:?}",
                tuple_closure.shape(),
                wit_closure.shape()
            )));
        }
        let phi = find_monomorphisms(&wit_closure, &tuple_closure, 2)
            .into_iter()
            .find(|m| m.is_isomorphism(&wit_closure, &tuple_closure))
            .ok_or(VersatileError::NoInverse)?;
        let psi = end.witness.build_psi(&big, &phi)?;
        for x in big.vertices() {
            let img = psi.apply(x).expect("psi total on T'");
            let from = (end.ground_of[x], end.root);
            let to = (end.ground_of[img], end.root);
            vertex_map.insert(from, to);
        }
    }
    let mapped: Vec<Pair> = p
        .verts
        .iter()
        .map(|q| vertex_map.get(q).copied().unwrap_or(*q))
        .collect();
    let out = TightWalk::new(mapped);
    // Invariants: same order, same per-edge root sets and types, endpoints
    // hit the witness sets, and the walk validates in the host.
    if out.order() != p.order() {
        return Err(VersatileError::ReplayFailed("order changed".into()));
    }
    let mut edge_invariants = Vec::new();
    for i in 0..=p.order() - r {
        let before: Vec<Pair> = {
            let mut w = p.verts[i..i + r].to_vec();
            w.sort_unstable();
            w
        };
        let after: Vec<Pair> = {
            let mut w = out.verts[i..i + r].to_vec();
            w.sort_unstable();
            w
        };
        let roots_before: Vec<u32> = before.iter().map(|q| q.1).collect();
        let roots_after: Vec<u32> = after.iter().map(|q| q.1).collect();
        if roots_before != roots_after {
            return Err(VersatileError::ReplayFailed(format!(
                "edge {i} changed roots"
            )));
        }
        let t_before = edge_type(f, &before);
        let t_after = edge_type(f, &after);
        if t_before != t_after {
            return Err(VersatileError::ReplayFailed(format!(
                "edge {i} changed type"
            )));
        }
        edge_invariants.push((roots_after, t_after));
    }
    if let Err(v) = out.validate(host, false) {
        return Err(VersatileError::ReplayFailed(format!(
            "rerouted walk invalid: {v:?} (walk {:?})",
            out.verts
        )));
    }
    let got_start: BTreeSet<Pair> = out.start(r).iter().copied().collect();
    let want_start: BTreeSet<Pair> = a.leaf_pairs().into_iter().collect();
    let got_end: BTreeSet<Pair> = out.end(r).iter().copied().collect();
    let want_end: BTreeSet<Pair> = b.leaf_pairs().into_iter().collect();
    if got_start != want_start || got_end != want_end {
        return Err(VersatileError::ReplayFailed(
            "rerouted walk misses the witness sets".into(),
        ));
    }
    Ok(RerouteResult {
        walk: out,
        edge_invariants,
    })
}
