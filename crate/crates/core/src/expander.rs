//! Bounded-degree vertex expanders: seeded random generation, exhaustive and
//! sampled verification with machine-checkable certificates, expansion
//! boosting, and rainbow paths across set sequences.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::GroundGraph;

#[derive(Debug, Error)]
pub enum ExpanderError {
    #[error("n = {0} is below the floor {1} for ε = {2}")]
    TooSmall(u32, u32, f64),
    #[error("retry budget exhausted after {tries} attempts; last diagnostics: {last}")]
    RetriesExhausted { tries: u32, last: String },
    #[error("exhaustive verification refused: {pairs:.3e} pairs exceeds budget {budget:.3e}")]
    ExhaustiveTooBig { pairs: f64, budget: f64 },
    #[error("rainbow path sets invalid: {0}")]
    BadSets(String),
    #[error("matching M_{index} is empty; sizes so far {sizes:?}")]
    EmptyMatching { index: usize, sizes: Vec<usize> },
}

/// How a certificate was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VerifyMode {
    Exhaustive,
    Sampled { trials: u64, seed: u64 },
}

/// Verdict of an expansion check. An exhaustive pass means every pair of
/// disjoint ⌈εn⌉-sets is joined by an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderCertificate {
    pub n: u32,
    pub epsilon: f64,
    pub set_size: u32,
    pub mode: VerifyMode,
    pub pass: bool,
    pub counterexample: Option<(Vec<u32>, Vec<u32>)>,
    /// Sampling constant used during generation, when applicable.
    pub generation_c: Option<f64>,
}

/// Set size ⌈εn⌉ used throughout.
pub fn expansion_set_size(n: u32, eps: f64) -> u32 {
    (eps * n as f64).ceil() as u32
}

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut out = 1.0f64;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Exhaustive check: for every ⌈εn⌉-set A, some k vertices must remain
/// outside A ∪ N(A) for a failing partner B to exist, so passing is
/// equivalent to |V ∖ (A ∪ N(A))| < k for all A. The refusal threshold is
/// measured as C(n,k)² against `pair_budget`.
pub fn verify_expansion_exhaustive(
    g: &GroundGraph,
    eps: f64,
    pair_budget: f64,
) -> Result<ExpanderCertificate, ExpanderError> {
    let n = g.n();
    let k = expansion_set_size(n, eps);
    let pairs = binom(n, k) * binom(n.saturating_sub(k), k);
    if pairs > pair_budget {
        return Err(ExpanderError::ExhaustiveTooBig {
            pairs,
            budget: pair_budget,
        });
    }
    if k == 0 || 2 * k > n {
        // No disjoint pair exists; vacuous pass.
        return Ok(ExpanderCertificate {
            n,
            epsilon: eps,
            set_size: k,
            mode: VerifyMode::Exhaustive,
            pass: true,
            counterexample: None,
            generation_c: None,
        });
    }
    let mut counterexample = None;
    let mut subset = vec![0usize; k as usize];
    crate::sforest::enumerate_subsets(n as usize, k as usize, &mut subset, &mut |a_idx| {
        let a: Vec<u32> = a_idx.iter().map(|&i| i as u32).collect();
        let mut blocked = vec![false; n as usize];
        for &v in &a {
            blocked[v as usize] = true;
            for &w in g.neighbours(v) {
                blocked[w as usize] = true;
            }
        }
        let free: Vec<u32> = (0..n).filter(|&v| !blocked[v as usize]).collect();
        if free.len() >= k as usize {
            counterexample = Some((a, free[..k as usize].to_vec()));
            return false;
        }
        true
    });
    Ok(ExpanderCertificate {
        n,
        epsilon: eps,
        set_size: k,
        pass: counterexample.is_none(),
        counterexample,
        mode: VerifyMode::Exhaustive,
        generation_c: None,
    })
}

/// Sampled check over random disjoint set pairs.
pub fn verify_expansion_sampled(
    g: &GroundGraph,
    eps: f64,
    trials: u64,
    seed: u64,
) -> ExpanderCertificate {
    let n = g.n();
    let k = expansion_set_size(n, eps);
    let mut cert = ExpanderCertificate {
        n,
        epsilon: eps,
        set_size: k,
        mode: VerifyMode::Sampled { trials, seed },
        pass: true,
        counterexample: None,
        generation_c: None,
    };
    if k == 0 || 2 * k > n {
        return cert;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_a = vec![false; n as usize];
    for _ in 0..trials {
        // Sample 2k distinct vertices, split into A and B.
        let mut pool: Vec<u32> = (0..n).collect();
        for i in 0..(2 * k) as usize {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let a = &pool[..k as usize];
        let b = &pool[k as usize..(2 * k) as usize];
        for &v in a {
            in_a[v as usize] = true;
        }
        let crossing = b
            .iter()
            .any(|&v| g.neighbours(v).iter().any(|&w| in_a[w as usize]));
        for &v in a {
            in_a[v as usize] = false;
        }
        if !crossing {
            let mut av = a.to_vec();
            let mut bv = b.to_vec();
            av.sort_unstable();
            bv.sort_unstable();
            cert.pass = false;
            cert.counterexample = Some((av, bv));
            return cert;
        }
    }
    cert
}

/// Requested verification mode for [`verify_expansion`].
#[derive(Debug, Clone, Copy)]
pub enum ModeRequest {
    Exhaustive { pair_budget: f64 },
    Sampled { trials: u64, seed: u64 },
}

pub fn verify_expansion(
    g: &GroundGraph,
    eps: f64,
    mode: ModeRequest,
) -> Result<ExpanderCertificate, ExpanderError> {
    match mode {
        ModeRequest::Exhaustive { pair_budget } => verify_expansion_exhaustive(g, eps, pair_budget),
        ModeRequest::Sampled { trials, seed } => Ok(verify_expansion_sampled(g, eps, trials, seed)),
    }
}

/// Generation parameters; every constant is recorded in the certificate.
#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    /// Edge constant for G(n, C/n). The headroom below the degree cap ε⁻²
    /// matters: mean degree must stay clear of the cap or deletion guts the
    /// graph, so the default is ε⁻²/2 rather than the naive 4ε⁻².
    pub c: Option<f64>,
    pub retries: u32,
    pub min_n_factor: f64,
    pub sample_trials: u64,
    pub exhaustive_pair_budget: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            c: None,
            retries: 50,
            min_n_factor: 4.0,
            sample_trials: 100_000,
            exhaustive_pair_budget: 1e8,
        }
    }
}

/// Generates a connected ε-expander with Δ ≤ ⌈ε⁻²⌉ by sampling G(n, C/n),
/// deleting high-degree vertices, patching connectivity, and verifying.
/// Retries with derived seeds until the verification passes.
pub fn generate_expander(
    n: u32,
    eps: f64,
    seed: u64,
    params: GenParams,
) -> Result<(GroundGraph, ExpanderCertificate), ExpanderError> {
    let floor = (params.min_n_factor / eps).ceil() as u32;
    if n < floor {
        return Err(ExpanderError::TooSmall(n, floor, eps));
    }
    let delta_cap = (1.0 / (eps * eps)).ceil() as usize;
    let c = params.c.unwrap_or_else(|| (1.0 / (eps * eps)) / 2.0);
    let mut last = String::new();
    for attempt in 0..params.retries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let p = (c / n as f64).min(1.0);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let mut g = GroundGraph::new(n, &edges).expect("sampled graph is simple");
        // Delete highest-degree vertices until Δ fits the cap.
        let mut alive: BTreeSet<u32> = (0..n).collect();
        loop {
            let (kept, _) = g.induced(&alive.iter().copied().collect::<Vec<_>>());
            let worst = kept
                .vertices()
                .max_by_key(|&v| (kept.degree(v), std::cmp::Reverse(v)));
            match worst {
                Some(v) if kept.degree(v) > delta_cap => {
                    let old = alive.iter().copied().collect::<Vec<_>>()[v as usize];
                    alive.remove(&old);
                }
                _ => break,
            }
        }
        let (mut h, _) = g.induced(&alive.iter().copied().collect::<Vec<_>>());
        if h.n() < floor.max(2) {
            last = format!("attempt {attempt}: only {} vertices survive the degree cap", h.n());
            continue;
        }
        // Patch connectivity: join each later component to the first by an
        // edge between lowest-index vertices.
        let comps = components(&h);
        if comps.len() > 1 {
            let mut extra = h.edge_list();
            let anchor = comps[0][0];
            for comp in &comps[1..] {
                extra.push((anchor.min(comp[0]), anchor.max(comp[0])));
            }
            h = GroundGraph::new(h.n(), &extra).expect("patched graph");
        }
        if h.max_degree() > delta_cap {
            last = format!("attempt {attempt}: patching pushed Δ to {}", h.max_degree());
            continue;
        }
        if !h.is_connected() {
            last = format!("attempt {attempt}: still disconnected");
            continue;
        }
        // Verify: exhaustive when affordable, sampled otherwise.
        let k = expansion_set_size(h.n(), eps);
        let pairs = binom(h.n(), k) * binom(h.n().saturating_sub(k), k);
        let mut cert = if pairs <= params.exhaustive_pair_budget {
            verify_expansion_exhaustive(&h, eps, params.exhaustive_pair_budget)
                .expect("budget just checked")
        } else {
            verify_expansion_sampled(&h, eps, params.sample_trials, seed.wrapping_add(attempt as u64))
        };
        cert.generation_c = Some(c);
        if cert.pass {
            return Ok((h, cert));
        }
        last = format!(
            "attempt {attempt}: verification failed with witness {:?}",
            cert.counterexample
        );
    }
    Err(ExpanderError::RetriesExhausted {
        tries: params.retries,
        last,
    })
}

fn components(g: &GroundGraph) -> Vec<Vec<u32>> {
    let mut seen = vec![false; g.n() as usize];
    let mut out = Vec::new();
    for v in g.vertices() {
        if seen[v as usize] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![v];
        seen[v as usize] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &w in g.neighbours(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Expansion boosting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BoostReport {
    /// The low-expansion set that was removed together with its neighbourhood.
    pub x: Vec<u32>,
    pub removed: usize,
    pub kept: Vec<u32>,
    pub ratio: f64,
    pub ratio_target_met: bool,
    /// ε for H^k per the boosting formula, clamped to ≤ 1.
    pub eps_k: f64,
    pub eps_clamped: bool,
    pub hk_certificate: Option<ExpanderCertificate>,
    pub exact_search: bool,
}

/// Removes a maximal set X with |X| ≤ n/4 and |N(X)| ≤ 2|X| (exact subset
/// search for small n, greedy vertex additions otherwise) and reports how
/// much survives together with a spot-check of the boosted power's
/// expansion. The 0.97n target is asymptotic, so shortfall is reported
/// rather than fatal.
pub fn boost_expansion(g: &GroundGraph, k: u32, exact_limit: u32, seed: u64) -> BoostReport {
    let n = g.n();
    let valid = |x: &BTreeSet<u32>| -> bool {
        if x.is_empty() {
            return true;
        }
        if x.len() as f64 > n as f64 / 4.0 {
            return false;
        }
        let mut nb = BTreeSet::new();
        for &v in x {
            for &w in g.neighbours(v) {
                if !x.contains(&w) {
                    nb.insert(w);
                }
            }
        }
        nb.len() <= 2 * x.len()
    };

    let exact = n <= exact_limit;
    let mut best: BTreeSet<u32> = BTreeSet::new();
    if exact {
        // Largest valid X, ties by lexicographic vertex set.
        for mask in 0u64..(1u64 << n) {
            if (mask.count_ones() as f64) > n as f64 / 4.0 {
                continue;
            }
            let x: BTreeSet<u32> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if x.len() > best.len() && valid(&x) {
                best = x;
            }
        }
    } else {
        // Greedy: keep adding any vertex that preserves validity.
        loop {
            let mut grew = false;
            for v in 0..n {
                if best.contains(&v) {
                    continue;
                }
                let mut x = best.clone();
                x.insert(v);
                if valid(&x) {
                    best = x;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }
    let mut removed: BTreeSet<u32> = best.clone();
    for &v in &best {
        for &w in g.neighbours(v) {
            removed.insert(w);
        }
    }
    let kept: Vec<u32> = (0..n).filter(|v| !removed.contains(v)).collect();
    let ratio = kept.len() as f64 / n as f64;
    let raw_eps = 1.0 / (5.0 * f64::powf(2.0, k as f64 / 2.0 - 2.0));
    let eps_clamped = raw_eps > 1.0;
    let eps_k = raw_eps.min(1.0);
    let hk_certificate = if kept.len() >= 2 {
        let (h, _) = g.induced(&kept);
        let hk = h.power(k);
        Some(verify_expansion_sampled(&hk, eps_k, 2000, seed))
    } else {
        None
    };
    BoostReport {
        x: best.into_iter().collect(),
        removed: removed.len(),
        kept,
        ratio,
        ratio_target_met: ratio >= 0.97,
        eps_k,
        eps_clamped,
        hk_certificate,
        exact_search: exact,
    }
}

// ---------------------------------------------------------------------------
// Rainbow paths
// ---------------------------------------------------------------------------

/// Finds a path v₁…v_r with vᵢ ∈ Sᵢ by building sequential maximal matchings
/// M₁…M_{r−1}, exactly as in the expander rainbow-path argument, then
/// back-tracing from the last matching. Greedy matchings in vertex order keep
/// the output deterministic.
pub fn rainbow_path(
    g: &GroundGraph,
    sets: &[Vec<u32>],
    eps_for_check: Option<f64>,
) -> Result<Vec<u32>, ExpanderError> {
    let r = sets.len();
    if r < 2 {
        return Err(ExpanderError::BadSets("need at least two sets".into()));
    }
    let mut seen = BTreeSet::new();
    for (i, s) in sets.iter().enumerate() {
        if s.is_empty() {
            return Err(ExpanderError::BadSets(format!("set {i} is empty")));
        }
        for &v in s {
            if !seen.insert(v) {
                return Err(ExpanderError::BadSets(format!("sets overlap at {v}")));
            }
        }
    }
    if let Some(eps) = eps_for_check {
        let need = (r as f64 * eps * g.n() as f64).ceil() as usize;
        for (i, s) in sets.iter().enumerate() {
            if s.len() < need {
                return Err(ExpanderError::BadSets(format!(
                    "set {i} has {} < rεn = {need} vertices",
                    s.len()
                )));
            }
        }
    }
    // M_1: maximal S_1–S_2 matching; M_i: maximal (S_i ∩ V(M_{i-1}))–S_{i+1}.
    let mut partner_of: Vec<std::collections::BTreeMap<u32, u32>> = Vec::new();
    let mut left_pool: Vec<u32> = sets[0].clone();
    let mut sizes = Vec::new();
    for i in 0..r - 1 {
        let right = &sets[i + 1];
        let mut matched_right: BTreeSet<u32> = BTreeSet::new();
        let mut m = std::collections::BTreeMap::new();
        for &u in &left_pool {
            let cand = g
                .neighbours(u)
                .iter()
                .copied()
                .find(|v| right.contains(v) && !matched_right.contains(v));
            if let Some(v) = cand {
                matched_right.insert(v);
                m.insert(u, v);
            }
        }
        sizes.push(m.len());
        if m.is_empty() {
            return Err(ExpanderError::EmptyMatching { index: i + 1, sizes });
        }
        left_pool = m.values().copied().collect();
        partner_of.push(m);
    }
    // Back-trace from the least edge of M_{r-1}.
    let (&a, &b) = partner_of[r - 2].iter().next().expect("nonempty");
    let mut path = vec![a, b];
    for i in (0..r - 2).rev() {
        let head = path[0];
        let (&u, _) = partner_of[i]
            .iter()
            .find(|(_, &v)| v == head)
            .expect("each matched left vertex came from the previous matching");
        path.insert(0, u);
    }
    // Verify membership and adjacency.
    for (i, &v) in path.iter().enumerate() {
        if !sets[i].contains(&v) {
            return Err(ExpanderError::BadSets(format!("path vertex {v} not in set {i}")));
        }
    }
    for w in path.windows(2) {
        if !g.has_edge(w[0], w[1]) {
            return Err(ExpanderError::BadSets(format!("{} {} not an edge", w[0], w[1])));
        }
    }
    Ok(path)
}

/// Greedy maximal matching between two disjoint sets, exposed for the
/// matching-size invariant check.
pub fn maximal_matching(g: &GroundGraph, s: &[u32], t: &[u32]) -> Vec<(u32, u32)> {
    let tset: BTreeSet<u32> = t.iter().copied().collect();
    let mut used: BTreeSet<u32> = BTreeSet::new();
    let mut m = Vec::new();
    for &u in s {
        if let Some(v) = g
            .neighbours(u)
            .iter()
            .copied()
            .find(|v| tset.contains(v) && !used.contains(v))
        {
            used.insert(v);
            m.push((u, v));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_is_an_expander() {
        let g = GroundGraph::complete(10);
        let cert = verify_expansion_exhaustive(&g, 0.2, 1e8).unwrap();
        assert!(cert.pass);
        let sampled = verify_expansion_sampled(&g, 0.2, 1000, 1);
        assert!(sampled.pass);
    }

    #[test]
    fn edgeless_graph_fails_with_witness() {
        let g = GroundGraph::new(8, &[]).unwrap();
        let cert = verify_expansion_exhaustive(&g, 0.25, 1e8).unwrap();
        assert!(!cert.pass);
        let (a, b) = cert.counterexample.unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        assert!(a.iter().all(|v| !b.contains(v)));
    }

    #[test]
    fn two_cliques_fail_below_half() {
        // Two disjoint K_5's: the sides witness failure for ε < 1/2.
        let mut edges = Vec::new();
        for u in 0..5u32 {
            for v in u + 1..5 {
                edges.push((u, v));
                edges.push((u + 5, v + 5));
            }
        }
        let g = GroundGraph::new(10, &edges).unwrap();
        let cert = verify_expansion_exhaustive(&g, 0.4, 1e8).unwrap();
        assert!(!cert.pass);
        let (a, b) = cert.counterexample.unwrap();
        // No edges between witness sides.
        for &x in &a {
            for &y in &b {
                assert!(!g.has_edge(x, y));
            }
        }
    }

    #[test]
    fn sampled_failure_implies_exhaustive_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..30 {
            let n = rng.gen_range(6..=14u32);
            let p = rng.gen_range(0.05..0.5);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(p) {
                        edges.push((u, v));
                    }
                }
            }
            let g = GroundGraph::new(n, &edges).unwrap();
            let eps = 0.2;
            let ex = verify_expansion_exhaustive(&g, eps, 1e8).unwrap();
            let sa = verify_expansion_sampled(&g, eps, 20_000, trial);
            if !sa.pass {
                assert!(!ex.pass, "sampled found a witness the exhaustive check missed");
            }
            if ex.pass {
                assert!(sa.pass);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_within_bounds() {
        let (g1, c1) = generate_expander(60, 0.3, 7, GenParams::default()).unwrap();
        let (g2, c2) = generate_expander(60, 0.3, 7, GenParams::default()).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(c1, c2);
        assert!(c1.pass);
        assert!(g1.is_connected());
        assert!(g1.max_degree() <= (1.0f64 / (0.3 * 0.3)).ceil() as usize);
    }

    #[test]
    fn boost_on_good_graph_keeps_everything() {
        // K_8: no nonempty X has |N(X)| <= 2|X| with |X| <= n/4 = 2.
        let g = GroundGraph::complete(8);
        let report = boost_expansion(&g, 2, 20, 5);
        assert!(report.x.is_empty());
        assert_eq!(report.kept.len(), 8);
        assert!(report.exact_search);
    }

    #[test]
    fn boost_captures_pendant_path() {
        // K_9 with a pendant path 8-9-10: the unique maximal X within the
        // n/4 = 2 size cap is {9, 10} (any pair touching the clique has too
        // many neighbours), so the boosted graph is exactly the clique part.
        let mut edges = Vec::new();
        for u in 0..9u32 {
            for v in u + 1..9 {
                edges.push((u, v));
            }
        }
        edges.push((8, 9));
        edges.push((9, 10));
        let g = GroundGraph::new(11, &edges).unwrap();
        let report = boost_expansion(&g, 2, 20, 5);
        assert_eq!(report.x, vec![9, 10]);
        assert!(!report.kept.contains(&10));
        assert!(report.ratio < 1.0);
        assert!(report.exact_search);
    }

    #[test]
    fn rainbow_on_complete_bipartition() {
        let g = GroundGraph::complete(10);
        let s1: Vec<u32> = (0..5).collect();
        let s2: Vec<u32> = (5..10).collect();
        let p = rainbow_path(&g, &[s1.clone(), s2.clone()], None).unwrap();
        assert_eq!(p.len(), 2);
        assert!(s1.contains(&p[0]) && s2.contains(&p[1]));
        assert!(g.has_edge(p[0], p[1]));
    }

    #[test]
    fn rainbow_forced_instance_matches_exhaustive_search() {
        // Path graph 0-1-2: sets {0}, {1}, {2} force the unique path 0 1 2.
        let g = GroundGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let p = rainbow_path(&g, &[vec![0], vec![1], vec![2]], None).unwrap();
        assert_eq!(p, vec![0, 1, 2]);
    }

    #[test]
    fn matching_size_invariant_on_verified_expander() {
        // On an exhaustively verified ε-expander, a maximal S–T matching has
        // size >= min(|S|, |T|) − εn.
        let (g, cert) = generate_expander(16, 0.25, 3, GenParams::default()).unwrap();
        assert!(matches!(cert.mode, VerifyMode::Exhaustive), "{cert:?}");
        assert!(cert.pass);
        let eps_n = 0.25 * g.n() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut pool: Vec<u32> = g.vertices().collect();
            for i in 0..pool.len() {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let a = pool[..6].to_vec();
            let b = pool[6..12].to_vec();
            let m = maximal_matching(&g, &a, &b);
            assert!(m.len() as f64 >= 6.0 - eps_n);
        }
    }
}
