//! The iterative colouring-structure engine: per-iteration states `(Uᵢ, Fᵢ)`
//! with independently re-verified properties (F1)–(F6), the auxiliary
//! colouring with grey, disconnectedness scanning, grey-clique augmentation,
//! walk extraction through versatile sets, the blow-up reduction, and the
//! certificate formats.
//!
//! Every lemma guarantee is treated as best-effort: outcomes are certified
//! or reported, never assumed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cleaning::{clean_forest, separate_forest_with, verify_clean};
use crate::colouring::{ChiSpec, EdgeColour};
use crate::expander::{generate_expander, GenParams};
use crate::forest::ForestType;
use crate::ground::GroundGraph;
use crate::hypergraph::{concat, power_hypergraph, project_walk, Hypergraph, TensorPowerView, TightWalk};
use crate::hypergraph::EdgeSet;
use crate::schedule::{hex_string, ParamSchedule};
use crate::sforest::{augment_tree, Pair, SForest, STree};
use crate::versatile::{edge_type, find_versatile_set, reroute_walk, EndpointWitness};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage}: {detail}")]
    Stage { stage: &'static str, detail: String },
}

fn stage(stage: &'static str, detail: impl ToString) -> PipelineError {
    PipelineError::Stage {
        stage,
        detail: detail.to_string(),
    }
}

/// Search budgets for the pipeline's bounded enumerations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PipelineBudgets {
    pub aux_walk_nodes: usize,
    pub disconnect_nodes: usize,
    pub stitch_walk_nodes: usize,
    pub clean_search_nodes: usize,
    pub verify_rsets: usize,
    pub aux_path_nodes: usize,
    pub grey_clique_nodes: usize,
    /// Minimum order of an aux path worth stitching.
    pub min_aux_path: usize,
    pub separation_retries: u32,
}

impl Default for PipelineBudgets {
    fn default() -> Self {
        Self {
            aux_walk_nodes: 40_000,
            disconnect_nodes: 2_000_000,
            stitch_walk_nodes: 100_000,
            clean_search_nodes: 5_000_000,
            verify_rsets: 2_000_000,
            aux_path_nodes: 300_000,
            grey_clique_nodes: 300_000,
            min_aux_path: 2,
            separation_retries: 200,
        }
    }
}

// ---------------------------------------------------------------------------
// Tensor colouring from the host colouring
// ---------------------------------------------------------------------------

/// Deterministic pair mixer used to decorrelate per-root tie-breaking.
fn mix(u: u32, v: u32) -> u32 {
    let mut x = (u as u64) << 32 | v as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    (x ^ (x >> 31)) as u32
}

/// Colour of a leaf r-set: the host colour of its `π`-image; undefined when
/// the image collapses (which separation prevents on real tensor edges).
pub fn tensor_colour(chi_h: &dyn EdgeColour<u32>, e: &[Pair]) -> Option<u16> {
    let mut firsts: Vec<u32> = e.iter().map(|p| p.0).collect();
    firsts.sort_unstable();
    let distinct = firsts.windows(2).all(|w| w[0] != w[1]);
    if !distinct {
        return None;
    }
    Some(chi_h.colour_of(&firsts))
}

// ---------------------------------------------------------------------------
// Bounded tight-walk search in a tensor view
// ---------------------------------------------------------------------------

pub struct WalkSearch<'a> {
    pub g: &'a GroundGraph,
    pub f: &'a SForest,
    pub view: &'a TensorPowerView<'a>,
    pub chi_h: &'a dyn EdgeColour<u32>,
    pub r: usize,
    /// Every vertex of the walk must stay within this norm of every other.
    pub norm_cap: u32,
    pub max_order: usize,
}

impl<'a> WalkSearch<'a> {
    /// First monochromatic tight walk of colour `colour` from the sorted
    /// tuple `from` to the sorted tuple `to`, within the caps. Deterministic
    /// DFS; `budget` counts node expansions (0 left means the search was
    /// inconclusive).
    pub fn search(
        &self,
        from: &[Pair],
        to: &[Pair],
        colour: u16,
        budget: &mut usize,
    ) -> Option<TightWalk<Pair>> {
        let r = self.r;
        let mut seq: Vec<Pair> = from.to_vec();
        // Candidate pool: leaves of trees rooted within the norm cap of the
        // start's root.
        let start_root = from[0].1;
        let target_root = to[0].1;
        let near_roots: Vec<u32> = self
            .f
            .roots()
            .into_iter()
            .filter(|&v| self.g.dist(start_root, v) <= self.norm_cap)
            .collect();
        let mut pool: Vec<Pair> = near_roots
            .iter()
            .flat_map(|&v| self.f.subtree_at(v).unwrap().leaves())
            .collect();
        // Goal-directed: try vertices near the target tree first, so short
        // completions are found before the budget drains.
        pool.sort_by_key(|p| (self.g.dist(p.1, target_root), *p));
        let mut roots_so_far: BTreeSet<u32> = seq.iter().map(|p| p.1).collect();
        self.dfs(&mut seq, &mut roots_so_far, to, target_root, colour, &pool, budget)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        seq: &mut Vec<Pair>,
        roots: &mut BTreeSet<u32>,
        to: &[Pair],
        target_root: u32,
        colour: u16,
        pool: &[Pair],
        budget: &mut usize,
    ) -> Option<TightWalk<Pair>> {
        let r = self.r;
        if seq.len() >= r && seq[seq.len() - (r - 1)..] == *to {
            return Some(TightWalk::new(seq.clone()));
        }
        if seq.len() >= self.max_order {
            return None;
        }
        // Distance prune: the walk must still be able to reach the target
        // tree, moving at most norm_cap per step.
        let here = seq.last().unwrap().1;
        let steps_left = (self.max_order - seq.len()) as u64;
        let d = self.g.dist(here, target_root) as u64;
        if d > steps_left.saturating_mul(self.norm_cap.max(1) as u64) {
            return None;
        }
        for &cand in pool {
            if *budget == 0 {
                return None;
            }
            *budget -= 1;
            // Norm cap against everything so far.
            if roots
                .iter()
                .any(|&v| self.g.dist(v, cand.1) > self.norm_cap)
            {
                continue;
            }
            let mut window: Vec<Pair> = seq[seq.len() + 1 - r..].to_vec();
            window.push(cand);
            let mut sorted = window.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            if !self.view.has_edge(&sorted) {
                continue;
            }
            match tensor_colour(self.chi_h, &sorted) {
                Some(c) if c == colour => {}
                _ => continue,
            }
            let fresh_root = roots.insert(cand.1);
            seq.push(cand);
            if let Some(hit) = self.dfs(seq, roots, to, target_root, colour, pool, budget) {
                return Some(hit);
            }
            seq.pop();
            if fresh_root {
                roots.remove(&cand.1);
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Disconnectedness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisconnectWitness {
    pub root: u32,
    pub from: Vec<Pair>,
    pub to: Vec<Pair>,
    pub walk: Vec<Pair>,
    pub norm: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisconnectReport {
    pub k: u32,
    pub ok: bool,
    pub witness: Option<DisconnectWitness>,
    pub pairs_scanned: usize,
    pub budget_exhausted: bool,
}

/// Scans every root, every ordered pair of independent same-type
/// `(r−1)`-sets of its leaves, and every monochromatic tight walk of length
/// at most `3r` between them in `𝒢ᵗ ⊗ F`, demanding norm ≥ `k`. Violating
/// walks stay within norm `< k`, so the search is pruned to that ball.
pub fn check_disconnected(
    g: &GroundGraph,
    f: &SForest,
    chi_h: &dyn EdgeColour<u32>,
    r: usize,
    t: u32,
    k: u32,
    budget_total: usize,
) -> DisconnectReport {
    let mut report = DisconnectReport {
        k,
        ok: true,
        witness: None,
        pairs_scanned: 0,
        budget_exhausted: false,
    };
    if k == 0 {
        // Norms are nonnegative; 0-disconnectedness is vacuous.
        return report;
    }
    let view = TensorPowerView::new(g, f, t, r);
    let mut budget = budget_total;
    for tree in f.trees() {
        let v = tree.root();
        let leaves = tree.leaf_firsts();
        if leaves.len() < r - 1 {
            continue;
        }
        // All (r−1)-subsets, grouped by type.
        let mut by_type: BTreeMap<Vec<u32>, Vec<Vec<u32>>> = BTreeMap::new();
        let mut idx = vec![0usize; r - 1];
        crate::sforest::enumerate_subsets(leaves.len(), r - 1, &mut idx, &mut |pick| {
            let set: Vec<u32> = pick.iter().map(|&i| leaves[i]).collect();
            let tau = tree.type_of_leaves(&set).expect("leaves of the tree");
            by_type.entry(tau.code().to_vec()).or_default().push(set);
            true
        });
        for sets in by_type.values() {
            for a in sets {
                for b in sets {
                    if a == b || !tree.independent(a, b).unwrap_or(false) {
                        continue;
                    }
                    report.pairs_scanned += 1;
                    let from: Vec<Pair> = a.iter().map(|&x| (x, v)).collect();
                    let to: Vec<Pair> = b.iter().map(|&x| (x, v)).collect();
                    // A violating walk has norm < k, i.e. ≤ k−1.
                    let search = WalkSearch {
                        g,
                        f,
                        view: &view,
                        chi_h,
                        r,
                        norm_cap: k - 1,
                        max_order: 3 * r + 1,
                    };
                    for colour in 0..chi_h.colours() {
                        if budget == 0 {
                            report.budget_exhausted = true;
                            return report;
                        }
                        if let Some(w) = search.search(&from, &to, colour, &mut budget) {
                            let norm = f.norm(g, w.verts.iter().copied());
                            debug_assert!(norm < k);
                            report.ok = false;
                            report.witness = Some(DisconnectWitness {
                                root: v,
                                from: from.clone(),
                                to: to.clone(),
                                walk: w.verts,
                                norm,
                            });
                            return report;
                        }
                    }
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Auxiliary colouring
// ---------------------------------------------------------------------------

/// A non-grey label: (host colour, type of the endpoint sets).
pub type AuxLabel = (u16, Vec<u32>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxEdge {
    Labelled(BTreeSet<AuxLabel>),
    Grey,
    /// Enumeration budget ran out: excluded from grey cliques and from
    /// labelled paths alike.
    Unknown,
}

#[derive(Debug)]
pub struct AuxColouring {
    /// Edges of `G^{aᵢ}[Uᵢ]` keyed by ordered pair (u < v).
    pub edges: BTreeMap<(u32, u32), AuxEdge>,
    /// One witness walk per (edge, label), in the direction it was found
    /// (from the tree of `.0` to the tree of `.1`).
    pub witnesses: BTreeMap<((u32, u32), AuxLabel), TightWalk<Pair>>,
    pub unknown_edges: usize,
}

/// Builds the auxiliary colouring of `G^{aᵢ}[Uᵢ]`: an edge `uv` carries every
/// `(c, τ)` for which some colour-`c` tight walk of length ≤ 3r and norm
/// ≤ `cᵢ` joins type-τ `(r−1)`-sets of the two trees; grey when none exists.
pub fn build_aux_colouring(
    g: &GroundGraph,
    f: &SForest,
    u_set: &[u32],
    chi_h: &dyn EdgeColour<u32>,
    r: usize,
    a_i: u32,
    c_i: u32,
    budgets: &PipelineBudgets,
) -> AuxColouring {
    let view = TensorPowerView::new(g, f, c_i, r);
    let mut out = AuxColouring {
        edges: BTreeMap::new(),
        witnesses: BTreeMap::new(),
        unknown_edges: 0,
    };
    let members: BTreeSet<u32> = u_set.iter().copied().collect();
    // Per-tree (r−1)-sets grouped by type.
    let mut sets_by_type: BTreeMap<u32, BTreeMap<Vec<u32>, Vec<Vec<Pair>>>> = BTreeMap::new();
    for &v in u_set {
        let tree = match f.subtree_at(v) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let leaves = tree.leaf_firsts();
        let mut m: BTreeMap<Vec<u32>, Vec<Vec<Pair>>> = BTreeMap::new();
        if leaves.len() >= r - 1 {
            let mut idx = vec![0usize; r - 1];
            crate::sforest::enumerate_subsets(leaves.len(), r - 1, &mut idx, &mut |pick| {
                let firsts: Vec<u32> = pick.iter().map(|&i| leaves[i]).collect();
                let tau = tree.type_of_leaves(&firsts).expect("leaves");
                m.entry(tau.code().to_vec())
                    .or_default()
                    .push(firsts.iter().map(|&x| (x, v)).collect());
                true
            });
        }
        sets_by_type.insert(v, m);
    }
    for (i, &u) in u_set.iter().enumerate() {
        let du = g.distances_from(u);
        for &v in &u_set[i + 1..] {
            if du[v as usize] > a_i || !members.contains(&v) {
                continue;
            }
            let mut labels: BTreeSet<AuxLabel> = BTreeSet::new();
            let mut budget = budgets.aux_walk_nodes;
            let (tu, tv) = (&sets_by_type[&u], &sets_by_type[&v]);
            let common_types: Vec<Vec<u32>> = tu
                .keys()
                .filter(|tau| tv.contains_key(*tau))
                .cloned()
                .collect();
            for tau in &common_types {
                for colour in 0..chi_h.colours() {
                    if labels.contains(&(colour, tau.clone())) {
                        continue;
                    }
                    let search = WalkSearch {
                        g,
                        f,
                        view: &view,
                        chi_h,
                        r,
                        norm_cap: c_i,
                        max_order: 3 * r + 1,
                    };
                    'pairs: for from in &tu[tau] {
                        for to in &tv[tau] {
                            if budget == 0 {
                                break 'pairs;
                            }
                            if let Some(w) = search.search(from, to, colour, &mut budget) {
                                labels.insert((colour, tau.clone()));
                                out.witnesses
                                    .insert(((u, v), (colour, tau.clone())), w);
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            let edge = if !labels.is_empty() {
                AuxEdge::Labelled(labels)
            } else if budget == 0 {
                out.unknown_edges += 1;
                AuxEdge::Unknown
            } else {
                AuxEdge::Grey
            };
            out.edges.insert((u, v), edge);
        }
    }
    out
}

impl AuxColouring {
    pub fn all_labels(&self) -> BTreeSet<AuxLabel> {
        self.edges
            .values()
            .filter_map(|e| match e {
                AuxEdge::Labelled(ls) => Some(ls.iter().cloned()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn has_label(&self, u: u32, v: u32, label: &AuxLabel) -> bool {
        let key = (u.min(v), u.max(v));
        matches!(self.edges.get(&key), Some(AuxEdge::Labelled(ls)) if ls.contains(label))
    }

    pub fn is_grey(&self, u: u32, v: u32) -> bool {
        let key = (u.min(v), u.max(v));
        matches!(self.edges.get(&key), Some(AuxEdge::Grey))
    }

    /// Longest path whose every edge carries `label`, greedy DFS with budget.
    pub fn longest_label_path(&self, label: &AuxLabel, budget: usize) -> Vec<u32> {
        let verts: BTreeSet<u32> = self.edges.keys().flat_map(|&(u, v)| [u, v]).collect();
        let verts: Vec<u32> = verts.into_iter().collect();
        let mut best: Vec<u32> = Vec::new();
        let mut nodes = 0usize;
        fn dfs(
            aux: &AuxColouring,
            label: &AuxLabel,
            verts: &[u32],
            path: &mut Vec<u32>,
            used: &mut BTreeSet<u32>,
            best: &mut Vec<u32>,
            nodes: &mut usize,
            budget: usize,
        ) {
            *nodes += 1;
            if *nodes > budget {
                return;
            }
            if path.len() > best.len() {
                *best = path.clone();
            }
            let last = *path.last().unwrap();
            for &v in verts {
                if !used.contains(&v) && aux.has_label(last, v, label) {
                    path.push(v);
                    used.insert(v);
                    dfs(aux, label, verts, path, used, best, nodes, budget);
                    used.remove(&v);
                    path.pop();
                    if *nodes > budget {
                        return;
                    }
                }
            }
        }
        for &start in &verts {
            if nodes > budget {
                break;
            }
            let mut path = vec![start];
            let mut used: BTreeSet<u32> = [start].into_iter().collect();
            dfs(self, label, &verts, &mut path, &mut used, &mut best, &mut nodes, budget);
        }
        best
    }

    /// Greedy disjoint grey cliques of the given size, vertices in order.
    pub fn grey_cliques(&self, size: usize, u_set: &[u32], budget: usize) -> Vec<Vec<u32>> {
        let mut used: BTreeSet<u32> = BTreeSet::new();
        let mut cliques = Vec::new();
        let mut nodes = 0usize;
        loop {
            let residual: Vec<u32> = u_set.iter().copied().filter(|v| !used.contains(v)).collect();
            let found = find_grey_clique(self, &residual, size, &mut nodes, budget);
            match found {
                Some(k) => {
                    used.extend(k.iter().copied());
                    cliques.push(k);
                }
                None => return cliques,
            }
        }
    }
}

fn find_grey_clique(
    aux: &AuxColouring,
    verts: &[u32],
    size: usize,
    nodes: &mut usize,
    budget: usize,
) -> Option<Vec<u32>> {
    fn rec(
        aux: &AuxColouring,
        verts: &[u32],
        from: usize,
        acc: &mut Vec<u32>,
        size: usize,
        nodes: &mut usize,
        budget: usize,
    ) -> bool {
        if acc.len() == size {
            return true;
        }
        if *nodes > budget {
            return false;
        }
        for i in from..verts.len() {
            *nodes += 1;
            let v = verts[i];
            if acc.iter().all(|&u| aux.is_grey(u, v)) {
                acc.push(v);
                if rec(aux, verts, i + 1, acc, size, nodes, budget) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = Vec::new();
    if rec(aux, verts, 0, &mut acc, size, nodes, budget) {
        Some(acc)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// States and flags
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlagReport {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateReport {
    pub iteration: usize,
    pub u_size: usize,
    pub flags: Vec<FlagReport>,
}

pub struct PipelineState {
    pub i: usize,
    pub u: Vec<u32>,
    pub f: SForest,
    pub report: StateReport,
}

impl PipelineState {
    pub fn flags_ok(&self) -> bool {
        self.report.flags.iter().all(|f| f.ok)
    }
}

/// Re-verifies (F1)–(F6) for a candidate state, independently of how it was
/// built. `prev` supplies (F6); iteration 1 skips it.
#[allow(clippy::too_many_arguments)]
pub fn verify_state(
    g: &GroundGraph,
    schedule: &ParamSchedule,
    i: usize,
    u: &[u32],
    f: &SForest,
    chi_h: &dyn EdgeColour<u32>,
    prev: Option<&SForest>,
    budgets: &PipelineBudgets,
) -> StateReport {
    let mut flags = Vec::new();
    let eps = schedule.epsilon;
    let n = schedule.n as f64;
    // (F1) |U_i| ≥ (1−200ε)^i · n.
    let target = (1.0 - 200.0 * eps).powi(i as i32) * n;
    flags.push(FlagReport {
        name: "F1".into(),
        ok: u.len() as f64 >= target,
        detail: format!("|U_{i}| = {} vs (1−200ε)^{i}·n = {target:.2}", u.len()),
    });
    // (F2) balanced c_i-ary height i, rooted exactly on U_i.
    let c_i = schedule.c[i - 1] as usize;
    let roots_ok = f.roots() == u;
    let shape_ok = f.height() == i
        && f.is_balanced()
        && f.trees().all(|t| t.is_d_ary(c_i) && t.height() == i);
    flags.push(FlagReport {
        name: "F2".into(),
        ok: roots_ok && shape_ok,
        detail: format!(
            "roots==U:{roots_ok}, balanced {c_i}-ary height {i}: {shape_ok}"
        ),
    });
    // (F3) all levels d₁-short, F_i b_i-separated.
    let d1 = schedule.d[0];
    let b_i = schedule.b[i - 1];
    let short_ok = f.all_levels_short(g, d1);
    let sep = f.separation_violation(g, b_i);
    flags.push(FlagReport {
        name: "F3".into(),
        ok: short_ok && sep.is_none(),
        detail: format!("levels d1-short: {short_ok}; separation violation: {sep:?}"),
    });
    // (F4) 𝒢^{cᵢ}⊗Fᵢ cleanly coloured.
    let host = power_hypergraph_over(g, u, schedule.c[i - 1], schedule.r);
    let chi_t = |e: &[Pair]| tensor_colour(chi_h, e);
    let clean = verify_clean(&host, f, &chi_t, schedule.r, budgets.verify_rsets);
    flags.push(FlagReport {
        name: "F4".into(),
        ok: clean.is_ok(),
        detail: match &clean {
            Ok(n) => format!("clean on {n} coloured r-sets"),
            Err(e) => e.to_string(),
        },
    });
    // (F5) c_i-disconnected.
    let disc = check_disconnected(
        g,
        f,
        chi_h,
        schedule.r,
        schedule.c[i - 1],
        schedule.c[i - 1],
        budgets.disconnect_nodes,
    );
    flags.push(FlagReport {
        name: "F5".into(),
        ok: disc.ok && !disc.budget_exhausted,
        detail: format!(
            "pairs scanned {}, witness: {:?}, budget exhausted: {}",
            disc.pairs_scanned, disc.witness, disc.budget_exhausted
        ),
    });
    // (F6) augmentation of the previous forest.
    match prev {
        Some(pf) => {
            let aug = f.is_augmentation_of(pf);
            flags.push(FlagReport {
                name: "F6".into(),
                ok: aug.is_ok(),
                detail: format!("{aug:?}"),
            });
        }
        None => flags.push(FlagReport {
            name: "F6".into(),
            ok: true,
            detail: "not applicable at i = 1".into(),
        }),
    }
    StateReport {
        iteration: i,
        u_size: u.len(),
        flags,
    }
}

/// The r-uniform power hypergraph restricted to the given roots.
pub fn power_hypergraph_over(g: &GroundGraph, roots: &[u32], t: u32, r: usize) -> Hypergraph<u32> {
    let mut edges = Vec::new();
    let set: Vec<u32> = roots.to_vec();
    let mut idx = vec![0usize; r];
    crate::sforest::enumerate_subsets(set.len(), r, &mut idx, &mut |pick| {
        let e: Vec<u32> = pick.iter().map(|&i| set[i]).collect();
        let ok = (0..e.len()).all(|a| (a + 1..e.len()).all(|b| g.dist(e[a], e[b]) <= t));
        if ok {
            edges.push(e);
        }
        true
    });
    Hypergraph::new(r, set.iter().copied(), edges).expect("power restriction")
}

// ---------------------------------------------------------------------------
// Certificates and reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    Generated {
        n: u32,
        eps: f64,
        seed: u64,
        /// Edge constant for G(n, C/n); None uses the generator default.
        c: Option<f64>,
    },
    Explicit {
        edges: Vec<(u32, u32)>,
        n: u32,
    },
}

impl GraphSource {
    pub fn build(&self) -> Result<GroundGraph, PipelineError> {
        match self {
            GraphSource::Generated { n, eps, seed, c } => {
                let params = GenParams {
                    c: *c,
                    ..GenParams::default()
                };
                generate_expander(*n, *eps, *seed, params)
                    .map(|(g, _)| g)
                    .map_err(|e| stage("graph", e))
            }
            GraphSource::Explicit { edges, n } => {
                GroundGraph::new(*n, edges).map_err(|e| stage("graph", e))
            }
        }
    }
}

pub fn graph_hash(g: &GroundGraph) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(g.n().to_le_bytes());
    for (u, v) in g.edge_list() {
        h.update(u.to_le_bytes());
        h.update(v.to_le_bytes());
    }
    hex_string(&h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkCertificate {
    pub schedule: ParamSchedule,
    pub schedule_hash: String,
    pub seed: u64,
    pub chi: ChiSpec,
    pub graph: GraphSource,
    pub graph_hash: String,
    pub colour: u16,
    pub walk: Vec<u32>,
    pub order: usize,
    pub target_order: usize,
    pub multiplicities: BTreeMap<u32, u32>,
    pub max_multiplicity: u32,
    pub multiplicity_cap: u32,
    /// The Claim's closed-form bound 3r(Δ+1)^{cᵢ+h·d₁}, saturating.
    pub paper_multiplicity_bound: u64,
    /// Exact ball-based bound computed on this instance.
    pub ball_multiplicity_bound: u64,
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub schedule_hash: String,
    pub seed: u64,
    pub chi: ChiSpec,
    pub graph: GraphSource,
    pub states: Vec<StateReport>,
    pub failure: Option<String>,
    /// Set when iteration h was reached with a verified disconnected state,
    /// which the asymptotic disconnection bound forbids; small h and desk
    /// arities may legitimately reach it.
    pub paper_contradiction_at_desk_scale: bool,
}

#[derive(Debug)]
pub enum RunOutcome {
    Certificate(Box<WalkCertificate>),
    Report(Box<StructureReport>),
}

/// Re-validates a certificate from scratch: rebuilds the graph and the
/// colouring, checks every window of the walk in `𝒢^{p'}`, monochromaticity
/// under the host colouring, and the multiplicity cap.
pub fn verify_certificate(cert: &WalkCertificate) -> Result<(), PipelineError> {
    let g = cert.graph.build()?;
    if graph_hash(&g) != cert.graph_hash {
        return Err(stage("verify", "graph hash mismatch"));
    }
    let chi = cert
        .chi
        .build(&g, None)
        .ok_or_else(|| stage("verify", "file colourings need the file"))?;
    let walk = TightWalk::new(cert.walk.clone());
    let view = crate::hypergraph::PowerView {
        g: &g,
        t: cert.schedule.p_prime,
        r: cert.schedule.r,
    };
    walk.validate(&view, false)
        .map_err(|v| stage("verify", format!("{v:?}")))?;
    for w in cert.walk.windows(cert.schedule.r) {
        let mut e = w.to_vec();
        e.sort_unstable();
        if chi.colour_of(&e) != cert.colour {
            return Err(stage("verify", format!("window {w:?} not colour {}", cert.colour)));
        }
    }
    let mult = walk.multiplicities();
    if mult != cert.multiplicities {
        return Err(stage("verify", "multiplicity table mismatch"));
    }
    let max = mult.values().copied().max().unwrap_or(0);
    if max > cert.multiplicity_cap {
        return Err(stage(
            "verify",
            format!("multiplicity {max} exceeds cap {}", cert.multiplicity_cap),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The pipeline step
// ---------------------------------------------------------------------------

pub enum StepOutcome {
    Walk {
        walk: TightWalk<u32>,
        colour: u16,
        aux_path: Vec<u32>,
        ball_bound: u64,
    },
    NextState(Box<PipelineState>),
}

/// One iteration of the engine: build the auxiliary colouring; either stitch
/// a labelled monochromatic path into a tight walk of `ℋ` through versatile
/// sets and rerouting, or harvest grey cliques and augment into the next
/// state (separated, cleaned, fully re-verified).
#[allow(clippy::too_many_arguments)]
pub fn pipeline_step(
    g: &GroundGraph,
    schedule: &ParamSchedule,
    state: &PipelineState,
    chi_h: &dyn EdgeColour<u32>,
    seed: u64,
    budgets: &PipelineBudgets,
) -> Result<StepOutcome, PipelineError> {
    let i = state.i;
    let r = schedule.r;
    let a_i = schedule.a[i - 1];
    let c_i = schedule.c[i - 1];
    let aux = build_aux_colouring(g, &state.f, &state.u, chi_h, r, a_i, c_i, budgets);

    // Branch (a): the best labelled monochromatic path, labels in order.
    let mut best: Option<(AuxLabel, Vec<u32>)> = None;
    for label in aux.all_labels() {
        let p = aux.longest_label_path(&label, budgets.aux_path_nodes);
        if p.len() >= budgets.min_aux_path
            && p.len() > best.as_ref().map(|(_, q)| q.len()).unwrap_or(0)
        {
            best = Some((label, p));
        }
    }
    if let Some((label, path)) = best {
        match stitch_walk(g, schedule, state, chi_h, &aux, &label, &path, budgets) {
            Ok((walk, ball_bound)) => {
                return Ok(StepOutcome::Walk {
                    walk,
                    colour: label.0,
                    aux_path: path,
                    ball_bound,
                });
            }
            Err(e) => {
                // A failed stitch falls through to the grey branch only when
                // grey cliques exist; otherwise propagate the real failure.
                if aux.grey_cliques(schedule.d.get(i).map(|&d| d as usize + 1).unwrap_or(2), &state.u, budgets.grey_clique_nodes).is_empty() {
                    return Err(e);
                }
            }
        }
    }

    // Branch (b): grey cliques K_{d_{i+1}+1} seeding the augmentation.
    if i >= schedule.h {
        return Err(stage("step", "no labelled path and no iterations left"));
    }
    let d_next = schedule.d[i] as usize;
    let cliques = aux.grey_cliques(d_next + 1, &state.u, budgets.grey_clique_nodes);
    if cliques.is_empty() {
        return Err(stage(
            "grey-cover",
            format!(
                "no grey K_{} found (unknown edges: {})",
                d_next + 1,
                aux.unknown_edges
            ),
        ));
    }
    let mut u_next: Vec<u32> = cliques.iter().flatten().copied().collect();
    u_next.sort_unstable();
    // Build F'' by augmenting every clique member over the others' trees.
    let mut trees = Vec::new();
    for clique in &cliques {
        for &vj in clique {
            let others: Vec<&STree> = clique
                .iter()
                .filter(|&&x| x != vj)
                .map(|&x| state.f.subtree_at(x).expect("clique member rooted"))
                .collect();
            let t = augment_tree(vj, &others).map_err(|e| stage("augment", e))?;
            // Grey-clique children containment: children of (v,v) are the
            // other clique members.
            let kids: BTreeSet<u32> = t.children_of(vj).iter().copied().collect();
            let expect: BTreeSet<u32> = clique.iter().copied().filter(|&x| x != vj).collect();
            if kids != expect {
                return Err(stage("augment", "clique children containment violated"));
            }
            trees.push(t);
        }
    }
    let f_dd = SForest::new(state.f.ground_n(), trees).map_err(|e| stage("augment", e))?;
    // Shortness bookkeeping: level 1 is a_i-short, deeper levels d₁-short.
    if f_dd.height() >= 1 && !f_dd.is_k_short(g, 1, a_i).unwrap_or(false) {
        return Err(stage("augment", "level 1 of the augmented forest is not a_i-short"));
    }
    for lvl in 2..=f_dd.height() {
        if !f_dd.is_k_short(g, lvl, schedule.d[0]).unwrap_or(false) {
            return Err(stage("augment", format!("level {lvl} is not d1-short")));
        }
    }
    if f_dd.is_augmentation_of(&state.f).is_err() {
        return Err(stage("augment", "rd is not a monomorphism into the old forest"));
    }
    let b_next = schedule.b[i];
    let sep_arity = (schedule.b[i].max(schedule.c[i])) as usize;
    let f_sep = separate_forest_with(&f_dd, g, b_next, sep_arity, seed, budgets.separation_retries)
        .map_err(|e| stage("separate", e))?;
    let c_next = schedule.c[i];
    let host = power_hypergraph_over(g, &u_next, c_next, r);
    let chi_t = |e: &[Pair]| tensor_colour(chi_h, e);
    let (f_next, _stats) = clean_forest(
        &host,
        &f_sep,
        &chi_t,
        c_next as usize,
        chi_h.colours(),
        r,
        budgets.clean_search_nodes,
        budgets.verify_rsets,
    )
    .map_err(|e| stage("clean", e))?;
    let report = verify_state(g, schedule, i + 1, &u_next, &f_next, chi_h, Some(&state.f), budgets);
    Ok(StepOutcome::NextState(Box::new(PipelineState {
        i: i + 1,
        u: u_next,
        f: f_next,
        report,
    })))
}

/// Branch (a) conversion: versatile sets per path vertex, per-edge witness
/// walks rerouted onto them, concatenation, and projection into `𝒢^{p'}`.
#[allow(clippy::too_many_arguments)]
fn stitch_walk(
    g: &GroundGraph,
    schedule: &ParamSchedule,
    state: &PipelineState,
    chi_h: &dyn EdgeColour<u32>,
    aux: &AuxColouring,
    label: &AuxLabel,
    path: &[u32],
    budgets: &PipelineBudgets,
) -> Result<(TightWalk<u32>, u64), PipelineError> {
    let r = schedule.r;
    let i = state.i;
    let c_i = schedule.c[i - 1];
    let (colour, tau_code) = (label.0, &label.1);
    let tau = ForestType::from_code(tau_code.clone());
    let view = TensorPowerView::new(g, &state.f, c_i, r);
    // 3r-versatile type-τ set per path vertex.
    let mut endpoints = Vec::with_capacity(path.len());
    for &pj in path {
        let shape = state
            .f
            .subtree_at(pj)
            .map_err(|e| stage("stitch", e))?
            .shape_map();
        let witness = find_versatile_set(&shape.forest, &tau, 3 * r)
            .map_err(|e| stage("versatile", format!("tree {pj}: {e}")))?;
        endpoints.push(EndpointWitness::for_tree(&state.f, pj, witness));
    }
    // Per-edge walks in the traversal direction, rerouted onto the witness
    // sets; cleanliness makes the rerouted walk keep its colour, which is
    // re-checked window by window.
    let mut stitched: Option<TightWalk<Pair>> = None;
    for j in 0..path.len() - 1 {
        let (pj, pk) = (path[j], path[j + 1]);
        let keyed = aux
            .witnesses
            .get(&((pj.min(pk), pj.max(pk)), label.clone()))
            .cloned();
        let forward = match keyed {
            Some(w) if w.start(r)[0].1 == pj => Some(w),
            _ => None,
        };
        let p_j = match forward {
            Some(w) => w,
            None => {
                // Search the traversal direction explicitly.
                let mut budget = budgets.stitch_walk_nodes;
                let search = WalkSearch {
                    g,
                    f: &state.f,
                    view: &view,
                    chi_h,
                    r,
                    norm_cap: c_i,
                    max_order: 3 * r + 1,
                };
                let mut found = None;
                'outer: for from in type_sets(&state.f, pj, &tau, r) {
                    for to in type_sets(&state.f, pk, &tau, r) {
                        if let Some(w) = search.search(&from, &to, colour, &mut budget) {
                            found = Some(w);
                            break 'outer;
                        }
                    }
                }
                found.ok_or_else(|| {
                    stage(
                        "stitch",
                        format!("no forward colour-{colour} walk for edge ({pj},{pk})"),
                    )
                })?
            }
        };
        let rerouted = reroute_walk(&view, &state.f, &p_j, &endpoints[j], &endpoints[j + 1])
            .map_err(|e| stage("reroute", format!("edge ({pj},{pk}): {e}")))?;
        // Colour preservation under the clean colouring, asserted per window.
        for w in rerouted.walk.verts.windows(r) {
            let mut e = w.to_vec();
            e.sort_unstable();
            match tensor_colour(chi_h, &e) {
                Some(c) if c == colour => {}
                other => {
                    return Err(stage(
                        "reroute",
                        format!("window colour {other:?} differs from {colour} (cleanliness does not hold here)"),
                    ))
                }
            }
        }
        stitched = Some(match stitched {
            None => rerouted.walk,
            Some(acc) => concat(&acc, &rerouted.walk, r).map_err(|e| stage("concat", e))?,
        });
    }
    let w = stitched.ok_or_else(|| stage("stitch", "aux path too short"))?;
    // Project into ℋ = 𝒢^{p'}.
    let img = project_walk(&w, &state.f, g, c_i, schedule.d[0], schedule.p_prime, r)
        .map_err(|e| stage("project", e))?;
    // Multiplicity accounting: the Claim's bound and the exact ball bound.
    let delta = schedule.delta() as u64;
    let exp = c_i as u64 + (schedule.h as u64) * schedule.d[0] as u64;
    let paper_bound = (3 * r as u64).saturating_mul((delta + 1).checked_pow(exp.min(60) as u32).unwrap_or(u64::MAX));
    let reach = c_i + schedule.h as u32 * schedule.d[0];
    let ball_bound = img
        .multiplicities()
        .keys()
        .map(|&vert| {
            let near = path
                .iter()
                .filter(|&&pj| g.dist(vert, pj) <= reach)
                .count() as u64;
            near.saturating_mul(3 * r as u64 + 1)
        })
        .max()
        .unwrap_or(0);
    let max_mult = img.multiplicities().values().copied().max().unwrap_or(0) as u64;
    if max_mult > ball_bound {
        return Err(stage("project", "ball multiplicity bound violated"));
    }
    let _ = paper_bound;
    Ok((img, ball_bound))
}

/// All type-τ (r−1)-sets of one tree's leaves, as sorted pair tuples.
fn type_sets(f: &SForest, root: u32, tau: &ForestType, r: usize) -> Vec<Vec<Pair>> {
    let tree = match f.subtree_at(root) {
        Ok(t) => t,
        Err(_) => return Vec::new(),
    };
    let leaves = tree.leaf_firsts();
    if leaves.len() < r - 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; r - 1];
    crate::sforest::enumerate_subsets(leaves.len(), r - 1, &mut idx, &mut |pick| {
        let firsts: Vec<u32> = pick.iter().map(|&i| leaves[i]).collect();
        if tree.type_of_leaves(&firsts).map(|t| t == *tau).unwrap_or(false) {
            out.push(firsts.iter().map(|&x| (x, root)).collect());
        }
        true
    });
    out
}

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

/// Full Theorem-style run: generate (or accept) the expander, build the
/// initial star family, iterate the pipeline, and return either a certified
/// monochromatic walk of `𝒢^{p'}` or a structure report whose states carry
/// verified flags.
pub fn run_theorem_walk(
    schedule: &ParamSchedule,
    chi_spec: &ChiSpec,
    graph: GraphSource,
    seed: u64,
    strict: bool,
    budgets: &PipelineBudgets,
) -> Result<RunOutcome, PipelineError> {
    if strict {
        schedule.validate().map_err(|e| stage("schedule", e))?;
    }
    let g = graph.build()?;
    let chi = chi_spec
        .build(&g, None)
        .ok_or_else(|| stage("colouring", "file colourings need the CLI layer"))?;
    let chi_h: &dyn EdgeColour<u32> = chi.as_ref();
    let mut report = StructureReport {
        schedule_hash: schedule.hash(),
        seed,
        chi: chi_spec.clone(),
        graph: graph.clone(),
        states: Vec::new(),
        failure: None,
        paper_contradiction_at_desk_scale: false,
    };
    // Iteration 1: stars over G^{d1} neighbourhoods.
    let u1: Vec<u32> = g.vertices().collect();
    let d1 = schedule.d[0];
    let mut trees = Vec::new();
    for v in g.vertices() {
        // Every vertex is rooted at i = 1, so separation bars any leaf
        // within b₁ of its root (that leaf is itself a root). Draw leaves
        // from just beyond the separation distance, nearest tier first,
        // decorrelated across roots.
        let mut ball: Vec<u32> = g
            .ball(v, d1)
            .into_iter()
            .filter(|&u| u != v && g.dist(v, u) > schedule.b[0])
            .collect();
        ball.sort_by_key(|&u| (g.dist(v, u), mix(u, v)));
        let mut nbrs: Vec<u32> = ball.into_iter().take(d1 as usize).collect();
        // Stored numerically so the tree order of the leaves matches the
        // pair order used by tight-walk tuples.
        nbrs.sort_unstable();
        if (nbrs.len() as u32) < d1 {
            report.failure = Some(format!(
                "init: vertex {v} has only {} distinct G^{d1} neighbours",
                nbrs.len()
            ));
            return Ok(RunOutcome::Report(Box::new(report)));
        }
        trees.push(STree::star(v, &nbrs).map_err(|e| stage("init", e))?);
    }
    let f1_raw = SForest::new(g.n(), trees).map_err(|e| stage("init", e))?;
    let sep_arity1 = (schedule.b[0].max(schedule.c[0])) as usize;
    let f1_sep = match separate_forest_with(&f1_raw, &g, schedule.b[0], sep_arity1, seed, budgets.separation_retries) {
        Ok(f) => f,
        Err(e) => {
            report.failure = Some(format!("separate (i=1): {e}"));
            return Ok(RunOutcome::Report(Box::new(report)));
        }
    };
    let host1 = power_hypergraph_over(&g, &u1, schedule.c[0], schedule.r);
    let chi_t = |e: &[Pair]| tensor_colour(chi_h, e);
    let f1 = match clean_forest(
        &host1,
        &f1_sep,
        &chi_t,
        schedule.c[0] as usize,
        chi_h.colours(),
        schedule.r,
        budgets.clean_search_nodes,
        budgets.verify_rsets,
    ) {
        Ok((f, _)) => f,
        Err(e) => {
            report.failure = Some(format!("clean (i=1): {e}"));
            return Ok(RunOutcome::Report(Box::new(report)));
        }
    };
    let state_report = verify_state(&g, schedule, 1, &u1, &f1, chi_h, None, budgets);
    report.states.push(state_report.clone());
    let mut state = PipelineState {
        i: 1,
        u: u1,
        f: f1,
        report: state_report,
    };
    loop {
        match pipeline_step(&g, schedule, &state, chi_h, seed, budgets) {
            Ok(StepOutcome::Walk {
                walk,
                colour,
                aux_path: _,
                ball_bound,
            }) => {
                let delta = schedule.delta() as u64;
                let exp = schedule.c[state.i - 1] as u64 + schedule.h as u64 * schedule.d[0] as u64;
                let paper_bound = (3 * schedule.r as u64)
                    .saturating_mul((delta + 1).checked_pow(exp.min(60) as u32).unwrap_or(u64::MAX));
                let mult = walk.multiplicities();
                let max_multiplicity = mult.values().copied().max().unwrap_or(0);
                let cert = WalkCertificate {
                    schedule: schedule.clone(),
                    schedule_hash: schedule.hash(),
                    seed,
                    chi: chi_spec.clone(),
                    graph: graph.clone(),
                    graph_hash: graph_hash(&g),
                    colour,
                    order: walk.order(),
                    target_order: (schedule.n as f64 / schedule.p as f64).ceil() as usize,
                    walk: walk.verts.clone(),
                    multiplicities: mult,
                    max_multiplicity,
                    multiplicity_cap: schedule.p,
                    paper_multiplicity_bound: paper_bound,
                    ball_multiplicity_bound: ball_bound,
                    verified: false,
                };
                let mut cert = cert;
                verify_certificate(&cert)?;
                cert.verified = true;
                return Ok(RunOutcome::Certificate(Box::new(cert)));
            }
            Ok(StepOutcome::NextState(next)) => {
                report.states.push(next.report.clone());
                state = *next;
                if state.i >= schedule.h {
                    // Reached the final height with a (re-verified)
                    // disconnected state: asymptotically impossible.
                    report.paper_contradiction_at_desk_scale = state.flags_ok();
                    report.failure = Some(format!(
                        "reached iteration h = {} with a verified state; the disconnection bound forbids this asymptotically",
                        schedule.h
                    ));
                    return Ok(RunOutcome::Report(Box::new(report)));
                }
            }
            Err(PipelineError::Stage { stage, detail }) => {
                report.failure = Some(format!("{stage}: {detail}"));
                return Ok(RunOutcome::Report(Box::new(report)));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Blow-up reduction
// ---------------------------------------------------------------------------

/// A clone of an original vertex in a blow-up.
pub type Clone = (u32, u32);

#[derive(Debug, Clone)]
pub struct BlowupReduction {
    /// The extracted tight path in ℋ[p], all vertices distinct.
    pub path: TightWalk<Clone>,
    pub colour: u16,
    /// Leaves kept by the cleaning, per original vertex, in index order:
    /// clone `v[j]` of the output refers to `kept[v][j-1]` of the input
    /// blow-up.
    pub kept: BTreeMap<u32, Vec<u32>>,
}

/// Theorem 1.1's reduction: given an s-colouring of ℋ[d] and a walk oracle
/// for ℋ, produce a genuine tight path. Builds the star forest, pulls the
/// colouring through the leaf-indexing isomorphism (root-distinct edges
/// only), cleans to p-ary, runs the oracle on the [1]-layer, and converts
/// the walk with repetition indices.
pub fn blowup_reduction<F>(
    h: &Hypergraph<u32>,
    chi_blowup: &dyn EdgeColour<Clone>,
    d: u32,
    p: u32,
    walk_oracle: F,
    budgets: &PipelineBudgets,
) -> Result<BlowupReduction, PipelineError>
where
    F: FnOnce(&dyn EdgeColour<u32>) -> Result<(TightWalk<u32>, u16), PipelineError>,
{
    let n = h.vertex_count() as u32;
    if d > n {
        return Err(stage("blowup", "d exceeds the ground size"));
    }
    let r = h.r();
    // Star forest: leaves of S(v) are (v+1, …, v+d) mod n — distinct within
    // a tree, arbitrary across trees.
    let trees: Vec<STree> = (0..n)
        .map(|v| {
            let leaves: Vec<u32> = (1..=d).map(|j| (v + j) % n).collect();
            STree::star(v, &leaves).expect("distinct leaves")
        })
        .collect();
    let f = SForest::new(n, trees).map_err(|e| stage("blowup", e))?;
    // φ: v[j] ↦ j-th leaf of S(v); colour tensor edges through φ⁻¹ when all
    // roots are distinct, undefined otherwise.
    let chi_t = |e: &[Pair]| -> Option<u16> {
        let mut roots: Vec<u32> = e.iter().map(|q| q.1).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() != e.len() {
            return None;
        }
        let mut clone_edge: Vec<Clone> = e
            .iter()
            .map(|&(x, v)| {
                let j = f
                    .subtree_at(v)
                    .unwrap()
                    .leaf_firsts()
                    .iter()
                    .position(|&l| l == x)
                    .unwrap() as u32
                    + 1;
                (v, j)
            })
            .collect();
        clone_edge.sort_unstable();
        Some(chi_blowup.colour_of(&clone_edge))
    };
    let (cleaned, _) = clean_forest(
        h,
        &f,
        &chi_t,
        p as usize,
        chi_blowup.colours(),
        r,
        budgets.clean_search_nodes,
        budgets.verify_rsets,
    )
    .map_err(|e| stage("clean", e))?;
    // Relabel: the j-th kept leaf of the cleaned star at v becomes v[j].
    let kept: BTreeMap<u32, Vec<u32>> = (0..n)
        .map(|v| {
            let original = f.subtree_at(v).unwrap().leaf_firsts();
            let kept_firsts = cleaned.subtree_at(v).unwrap().leaf_firsts();
            let js: Vec<u32> = kept_firsts
                .iter()
                .map(|x| original.iter().position(|l| l == x).unwrap() as u32 + 1)
                .collect();
            (v, js)
        })
        .collect();
    // χ' on ℋ: colour of the all-[1] (first kept clone) lift.
    let chi_prime = LiftColouring {
        chi: chi_blowup,
        kept: &kept,
    };
    let (walk, colour) = walk_oracle(&chi_prime)?;
    // Multiplicity indices.
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    let mut out: Vec<Clone> = Vec::with_capacity(walk.order());
    for &w in &walk.verts {
        let m = counts.entry(w).or_insert(0);
        *m += 1;
        if *m > p {
            return Err(stage(
                "blowup",
                format!("oracle walk uses {w} more than p = {p} times"),
            ));
        }
        let j = *m;
        let orig = kept[&w]
            .get(j as usize - 1)
            .copied()
            .ok_or_else(|| stage("blowup", format!("vertex {w} kept fewer than {j} clones")))?;
        out.push((w, orig));
    }
    let path = TightWalk::new(out);
    // Verify: distinct vertices, windows are blow-up edges of the original
    // colour (re-checked against the input colouring, not the tensor).
    let mut seen = BTreeSet::new();
    for &v in &path.verts {
        if !seen.insert(v) {
            return Err(stage("blowup", "output path repeats a vertex"));
        }
    }
    for w in path.verts.windows(r) {
        let originals: Vec<u32> = w.iter().map(|&(v, _)| v).collect();
        let mut sorted = originals.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != r || !h.has_edge(&sorted) {
            return Err(stage("blowup", format!("window {w:?} not a blow-up edge")));
        }
        let mut e = w.to_vec();
        e.sort_unstable();
        if chi_blowup.colour_of(&e) != colour {
            return Err(stage("blowup", format!("window {w:?} wrong colour")));
        }
    }
    if path.order() != walk.order() {
        return Err(stage("blowup", "order changed"));
    }
    Ok(BlowupReduction {
        path,
        colour,
        kept,
    })
}

/// Colours an edge of ℋ by its first-kept-clone lift in ℋ[d].
struct LiftColouring<'a> {
    chi: &'a dyn EdgeColour<Clone>,
    kept: &'a BTreeMap<u32, Vec<u32>>,
}

impl<'a> EdgeColour<u32> for LiftColouring<'a> {
    fn colours(&self) -> u16 {
        self.chi.colours()
    }
    fn colour_of(&self, edge: &[u32]) -> u16 {
        let mut lifted: Vec<Clone> = edge
            .iter()
            .map(|&v| (v, *self.kept[&v].first().expect("cleaning keeps p >= 1 leaves")))
            .collect();
        lifted.sort_unstable();
        self.chi.colour_of(&lifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::{MonoColouring, SeededColouring};

    fn small_ground() -> GroundGraph {
        GroundGraph::complete(6)
    }

    #[test]
    fn star_forests_are_vacuously_disconnected() {
        // Height-1 stars at r = 3: no independent (r−1)-set pairs exist.
        let g = small_ground();
        let trees = vec![
            STree::star(0, &[3, 4, 5]).unwrap(),
            STree::star(1, &[2, 4, 5]).unwrap(),
        ];
        // Overlapping supports are fine for this check.
        let f = SForest::new(6, vec![trees[0].clone()]).unwrap();
        for k in [1, 5, 10] {
            let rep = check_disconnected(&g, &f, &MonoColouring, 3, 2, k, 100_000);
            assert!(rep.ok, "{rep:?}");
            assert_eq!(rep.pairs_scanned, 0);
        }
    }

    #[test]
    fn zero_disconnectedness_is_always_true() {
        let g = small_ground();
        let f = SForest::new(6, vec![STree::star(0, &[3, 4, 5]).unwrap()]).unwrap();
        let rep = check_disconnected(&g, &f, &MonoColouring, 3, 2, 0, 10);
        assert!(rep.ok);
    }

    #[test]
    fn planted_xyz_walk_is_caught() {
        // A height-2 tree with a constant colouring carries an in-tree
        // monochromatic X–Y–Z walk of norm 0, so it is not 1-disconnected.
        let g = GroundGraph::complete(16);
        let mut ch = BTreeMap::new();
        ch.insert(0u32, vec![1, 2]);
        ch.insert(1u32, vec![3, 4]);
        ch.insert(2u32, vec![5, 6]);
        let t = STree::new(0, ch).unwrap();
        let f = SForest::new(16, vec![t]).unwrap();
        let rep = check_disconnected(&g, &f, &MonoColouring, 3, 1, 1, 500_000);
        assert!(!rep.ok, "{rep:?}");
        let w = rep.witness.unwrap();
        assert_eq!(w.norm, 0);
        assert_eq!(w.walk.len() - 1, w.walk.len() - 1);
    }

    #[test]
    fn aux_colouring_all_grey_when_sets_cannot_exist() {
        // Trees with a single leaf have no (r−1) = 2-subsets: all grey.
        let g = small_ground();
        let trees: Vec<STree> = (0..3).map(|v| STree::star(v, &[v + 3]).unwrap()).collect();
        let f = SForest::new(6, trees).unwrap();
        let u: Vec<u32> = vec![0, 1, 2];
        let aux = build_aux_colouring(&g, &f, &u, &MonoColouring, 3, 1, 2, &PipelineBudgets::default());
        assert!(aux.edges.values().all(|e| *e == AuxEdge::Grey));
        assert_eq!(aux.unknown_edges, 0);
    }

    #[test]
    fn aux_colouring_detects_planted_walk() {
        // Two stars, complete ground: a monochromatic walk between any two
        // cherries exists, so the edge is labelled with the cherry type.
        let g = small_ground();
        let trees = vec![
            STree::star(0, &[2, 3]).unwrap(),
            STree::star(1, &[4, 5]).unwrap(),
        ];
        let f = SForest::new(6, trees).unwrap();
        let u = vec![0, 1];
        let aux = build_aux_colouring(&g, &f, &u, &MonoColouring, 3, 1, 2, &PipelineBudgets::default());
        match aux.edges.get(&(0, 1)).unwrap() {
            AuxEdge::Labelled(ls) => {
                let cherry = ForestType::from_code(vec![2, 0, 0]);
                assert!(ls.contains(&(0, cherry.code().to_vec())));
            }
            other => panic!("expected a label, got {other:?}"),
        }
        // The stored witness walk validates.
        let ((_, _), w) = aux.witnesses.iter().next().map(|(k, v)| (k.0, v.clone())).unwrap();
        let view = TensorPowerView::new(&g, &f, 2, 3);
        assert_eq!(w.validate(&view, false), Ok(()));
    }

    #[test]
    fn certificate_round_trip_and_tamper_detection() {
        let schedule = ParamSchedule::desk_loose(96, 1);
        let out = run_theorem_walk(
            &schedule,
            &ChiSpec::Mono,
            GraphSource::Generated {
                n: 96,
                eps: 0.25,
                seed: 9,
                c: Some(4.0),
            },
            9,
            false,
            &PipelineBudgets::default(),
        )
        .unwrap();
        let cert = match out {
            RunOutcome::Certificate(c) => c,
            RunOutcome::Report(r) => panic!("expected certificate, got report {r:?}"),
        };
        assert!(cert.verified);
        assert!(cert.order >= cert.target_order);
        assert!(verify_certificate(&cert).is_ok());
        // Tampering with the walk must be detected and name the window.
        let mut bad = (*cert).clone();
        bad.walk[0] = (bad.walk[0] + 1) % schedule.n;
        assert!(verify_certificate(&bad).is_err());
    }

    #[test]
    fn deterministic_artifacts_per_seed() {
        let schedule = ParamSchedule::desk_loose(96, 2);
        let run = || {
            run_theorem_walk(
                &schedule,
                &ChiSpec::Random { s: 2, seed: 5 },
                GraphSource::Generated {
                    n: 48,
                    eps: 0.25,
                    seed: 11,
                },
                11,
                false,
                &PipelineBudgets::default(),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        let ser = |o: &RunOutcome| match o {
            RunOutcome::Certificate(c) => serde_json::to_string(c).unwrap(),
            RunOutcome::Report(r) => serde_json::to_string(r).unwrap(),
        };
        assert_eq!(ser(&a), ser(&b));
    }

    #[test]
    fn blowup_reduction_identity_and_repeats() {
        let g = GroundGraph::complete(8);
        let h = power_hypergraph(&g, 1, 3).unwrap();
        let chi = MonoBlow;
        // Oracle: a walk with one vertex repeated twice.
        let oracle = |_: &dyn EdgeColour<u32>| {
            Ok((TightWalk::new(vec![0u32, 1, 2, 3, 4, 0, 5, 6, 7]), 0u16))
        };
        let red = blowup_reduction(&h, &chi, 3, 2, oracle, &PipelineBudgets::default()).unwrap();
        assert_eq!(red.path.order(), 9);
        // All distinct; the repeated 0 got index 2 the second time.
        let zeros: Vec<Clone> = red.path.verts.iter().copied().filter(|&(v, _)| v == 0).collect();
        assert_eq!(zeros.len(), 2);
        assert_ne!(zeros[0].1, zeros[1].1);
    }

    struct MonoBlow;
    impl EdgeColour<Clone> for MonoBlow {
        fn colours(&self) -> u16 {
            1
        }
        fn colour_of(&self, _e: &[Clone]) -> u16 {
            0
        }
    }

    #[test]
    fn mono_loose_run_certifies_with_branch_a() {
        // The smoke test: a monochromatic colouring fires branch (a) at
        // i = 1 and yields a verified certificate.
        let schedule = ParamSchedule::desk_loose(96, 1);
        let out = run_theorem_walk(
            &schedule,
            &ChiSpec::Mono,
            GraphSource::Generated {
                n: 96,
                eps: 0.25,
                seed: 5,
                c: Some(4.0),
            },
            5,
            false,
            &PipelineBudgets::default(),
        )
        .unwrap();
        match out {
            RunOutcome::Certificate(c) => {
                assert!(c.verified);
                assert!(c.max_multiplicity <= c.multiplicity_cap);
            }
            RunOutcome::Report(r) => panic!("expected certificate: {r:?}"),
        }
    }

    #[test]
    fn strict_schedule_rejects_loose_inputs() {
        let schedule = ParamSchedule::desk_loose(96, 1);
        let err = run_theorem_walk(
            &schedule,
            &ChiSpec::Mono,
            GraphSource::Generated {
                n: 96,
                eps: 0.25,
                seed: 5,
                c: Some(4.0),
            },
            5,
            true,
            &PipelineBudgets::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn random_colouring_loose_run_terminates_with_verdict() {
        let schedule = ParamSchedule::desk_loose(96, 2);
        let out = run_theorem_walk(
            &schedule,
            &ChiSpec::Random { s: 2, seed: 3 },
            GraphSource::Generated {
                n: 96,
                eps: 0.25,
                seed: 3,
                c: Some(4.0),
            },
            3,
            false,
            &PipelineBudgets::default(),
        )
        .unwrap();
        match out {
            RunOutcome::Certificate(c) => assert!(verify_certificate(&c).is_ok()),
            RunOutcome::Report(r) => {
                // Every produced state must carry verified flags.
                for s in &r.states {
                    for fl in &s.flags {
                        assert!(fl.ok, "state {} flag {} failed: {}", s.iteration, fl.name, fl.detail);
                    }
                }
            }
        }
    }
}
