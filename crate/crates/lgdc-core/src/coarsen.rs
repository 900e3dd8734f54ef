//! Spectrum-preserving graph coarsening by randomized edge contraction.
//!
//! One pass samples edges proportionally to weight from a fixed candidate
//! pool; contracting an edge removes every candidate touching either
//! endpoint, so a pass contracts a matching and the per-step null
//! probability grows as the pool drains. Passes repeat until the target
//! size is reached. The coarse graph sums fine weights between clusters,
//! which is exactly the projected Laplacian C L C^T restricted off the
//! diagonal.

use ndarray::Array2;
use rand::Rng as _;

use crate::expansion::{expand, ExpansionVector};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::{Error, Result};

/// Surjective cluster assignment of n fine nodes onto n_c coarse nodes,
/// i.e. a binary n_c x n matrix with orthogonal rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMatrix {
    assignment: Vec<usize>,
    n_c: usize,
}

impl ProjectionMatrix {
    pub fn new(assignment: Vec<usize>, n_c: usize) -> Result<ProjectionMatrix> {
        let mut hit = vec![false; n_c];
        for &c in &assignment {
            if c >= n_c {
                return Err(Error::Coarsen(format!("cluster id {c} out of range {n_c}")));
            }
            hit[c] = true;
        }
        if hit.iter().any(|&h| !h) {
            return Err(Error::Coarsen("assignment not surjective".into()));
        }
        Ok(ProjectionMatrix { assignment, n_c })
    }

    pub fn identity(n: usize) -> ProjectionMatrix {
        ProjectionMatrix { assignment: (0..n).collect(), n_c: n }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, u: usize) -> usize {
        self.assignment[u]
    }

    /// Members of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_c];
        for (u, &c) in self.assignment.iter().enumerate() {
            out[c].push(u);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.n_c];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    /// Dense binary matrix, n_c x n.
    pub fn matrix(&self) -> Array2<f64> {
        let mut c = Array2::zeros((self.n_c, self.assignment.len()));
        for (u, &cl) in self.assignment.iter().enumerate() {
            c[[cl, u]] = 1.0;
        }
        c
    }

    /// Composition with a further coarsening of the coarse nodes:
    /// (then o self)(u) = then(self(u)).
    pub fn compose(&self, then: &ProjectionMatrix) -> Result<ProjectionMatrix> {
        if then.n() != self.n_c {
            return Err(Error::Coarsen(format!(
                "composing {}-cluster map with map over {} nodes",
                self.n_c,
                then.n()
            )));
        }
        let assignment = self.assignment.iter().map(|&c| then.assignment[c]).collect();
        ProjectionMatrix::new(assignment, then.n_c)
    }

    /// Renumber clusters by ascending smallest member.
    pub fn canonical(&self) -> ProjectionMatrix {
        let mut first_seen = vec![usize::MAX; self.n_c];
        for (u, &c) in self.assignment.iter().enumerate() {
            if first_seen[c] == usize::MAX {
                first_seen[c] = u;
            }
        }
        let mut order: Vec<usize> = (0..self.n_c).collect();
        order.sort_by_key(|&c| first_seen[c]);
        let mut relabel = vec![0usize; self.n_c];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = new;
        }
        ProjectionMatrix {
            assignment: self.assignment.iter().map(|&c| relabel[c]).collect(),
            n_c: self.n_c,
        }
    }

    /// Fine node -> expanded position: clusters in canonical order occupy
    /// contiguous ranges, members ascending within each range. This is the
    /// relabeling under which expansion reproduces the fine graph.
    pub fn position_map(&self) -> Vec<usize> {
        let canon = self.canonical();
        let clusters = canon.clusters();
        let mut offsets = vec![0usize; canon.n_c];
        let mut acc = 0;
        for (c, members) in clusters.iter().enumerate() {
            offsets[c] = acc;
            acc += members.len();
        }
        let mut pos = vec![0usize; canon.n()];
        for (c, members) in clusters.iter().enumerate() {
            for (rank, &u) in members.iter().enumerate() {
                pos[u] = offsets[c] + rank;
            }
        }
        pos
    }
}

/// Merge node j into node i along an existing edge. Surviving nodes keep
/// their relative order; parallel weights add.
pub fn contract_edge(g: &Graph, i: usize, j: usize) -> Result<(Graph, ProjectionMatrix)> {
    let n = g.n();
    if i >= n || j >= n || i == j {
        return Err(Error::Coarsen(format!("bad contraction pair ({i},{j})")));
    }
    if !g.has_edge(i, j) {
        return Err(Error::Coarsen(format!("({i},{j}) is not an edge")));
    }
    // Fine node -> coarse node: j joins i, everyone after j shifts down.
    let assignment: Vec<usize> = (0..n)
        .map(|u| {
            if u == j {
                if i < j {
                    i
                } else {
                    i - 1
                }
            } else if u < j {
                u
            } else {
                u - 1
            }
        })
        .collect();
    let proj = ProjectionMatrix::new(assignment, n - 1)?;
    Ok((merge_by_assignment(g, &proj), proj))
}

/// Coarse graph whose weight between clusters p != q is the sum of fine
/// weights between their members (intra-cluster weight vanishes with the
/// diagonal).
pub fn merge_by_assignment(g: &Graph, proj: &ProjectionMatrix) -> Graph {
    let n_c = proj.n_c();
    let mut w = Array2::zeros((n_c, n_c));
    for (u, v, wt) in g.edges() {
        let (p, q) = (proj.cluster_of(u), proj.cluster_of(v));
        if p != q {
            w[[p, q]] += wt;
            w[[q, p]] += wt;
        }
    }
    Graph::new(w, None).expect("merged weights are symmetric and non-negative")
}

/// The same coarse Laplacian via the explicit projection product C L C^T.
/// Redundant with `merge_by_assignment` on purpose: the two routes check
/// each other.
pub fn coarse_laplacian_product(g: &Graph, proj: &ProjectionMatrix) -> Array2<f64> {
    let c = proj.matrix();
    c.dot(&g.laplacian()).dot(&c.t())
}

/// One randomized contraction pass. Candidate pool starts as the edges
/// whose endpoint clusters still fit inside `v_max` when merged (`sizes`
/// holds the accumulated cluster size behind each current node), with
/// selection probability w/Phi fixed at pass start; each contraction
/// removes candidates incident to the contracted pair, their probability
/// mass shifting to the null outcome. Stops after `iteration_limit` draws,
/// when the pool empties, or after `max_contractions` merges.
pub fn rec_pass_capped(
    g: &Graph,
    rng: &mut Rng,
    iteration_limit: usize,
    max_contractions: usize,
    sizes: &[usize],
    v_max: usize,
) -> (Graph, ProjectionMatrix) {
    let n = g.n();
    debug_assert_eq!(sizes.len(), n);
    let edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let phi: f64 = edges.iter().map(|&(_, _, w)| w).sum();
    if edges.is_empty() || phi <= 0.0 || max_contractions == 0 {
        return (g.clone(), ProjectionMatrix::identity(n));
    }
    let probs: Vec<f64> = edges.iter().map(|&(_, _, w)| w / phi).collect();
    let mut alive = vec![true; edges.len()];
    let mut alive_mass: f64 = 1.0;
    let mut alive_count = edges.len();
    for (e, &(u, v, _)) in edges.iter().enumerate() {
        if sizes[u].saturating_add(sizes[v]) > v_max {
            alive[e] = false;
            alive_count -= 1;
            alive_mass -= probs[e];
        }
    }
    // Partner in the matching; a pass touches each node at most once.
    let mut matched: Vec<Option<usize>> = vec![None; n];
    let mut contractions = 0;

    let mut t = 0;
    while t < iteration_limit && alive_count > 0 && contractions < max_contractions {
        t += 1;
        let r = rng.random::<f64>();
        if r >= alive_mass {
            continue; // null outcome
        }
        let mut acc = 0.0;
        let mut hit = None;
        for (e, &is_alive) in alive.iter().enumerate() {
            if !is_alive {
                continue;
            }
            acc += probs[e];
            if r < acc {
                hit = Some(e);
                break;
            }
        }
        // Accumulated float mass can fall a hair short of alive_mass; the
        // sliver counts as null.
        let Some(e) = hit else { continue };
        let (i, j, _) = edges[e];
        matched[i] = Some(j);
        matched[j] = Some(i);
        contractions += 1;
        for (f, &(u, v, _)) in edges.iter().enumerate() {
            if alive[f] && (u == i || u == j || v == i || v == j) {
                alive[f] = false;
                alive_count -= 1;
                alive_mass -= probs[f];
            }
        }
    }

    // Matched pairs merge; cluster ids in ascending order of smallest
    // original member, which keeps the composed assignment canonical.
    let mut assignment = vec![usize::MAX; n];
    let mut next = 0;
    for u in 0..n {
        if assignment[u] != usize::MAX {
            continue;
        }
        assignment[u] = next;
        if let Some(p) = matched[u] {
            assignment[p] = next;
        }
        next += 1;
    }
    let proj = ProjectionMatrix::new(assignment, next).expect("matching yields surjection");
    (merge_by_assignment(g, &proj), proj)
}

pub fn rec_pass(g: &Graph, rng: &mut Rng, iteration_limit: usize) -> (Graph, ProjectionMatrix) {
    rec_pass_capped(g, rng, iteration_limit, usize::MAX, &vec![1; g.n()], usize::MAX)
}

/// Rayleigh-quotient distortion of the first k nontrivial fine Laplacian
/// eigenvectors under projection: max_k |(Cx)^T L_c (Cx) / (x^T L x) - 1|.
/// Eigenvectors with (near-)zero Rayleigh quotient are skipped; they carry
/// no spectral information to preserve.
pub fn spectral_epsilon(fine: &Graph, proj: &ProjectionMatrix, k: usize) -> Result<f64> {
    if proj.n() != fine.n() {
        return Err(Error::Coarsen("projection size mismatch".into()));
    }
    if k == 0 {
        return Err(Error::Coarsen("need at least one eigenvector".into()));
    }
    let l = fine.laplacian();
    let decomp = crate::eig::eig_sym(&l)?;
    let l_c = coarse_laplacian_product(fine, proj);
    let c = proj.matrix();

    let n = fine.n();
    let mut eps = 0.0f64;
    let mut used = 0;
    for idx in 0..n {
        if used == k {
            break;
        }
        let lambda = decomp.eigenvalues[idx];
        if lambda <= 1e-12 {
            continue; // trivial / component kernel
        }
        used += 1;
        let x = decomp.eigenvectors.column(idx);
        let x_c = c.dot(&x);
        let num = x_c.dot(&l_c.dot(&x_c));
        let den = x.dot(&l.dot(&x));
        eps = eps.max((num / den - 1.0).abs());
    }
    Ok(eps)
}

#[derive(Debug, Clone)]
pub struct CoarseningResult {
    /// Coarse graph; node labels are cluster-size classes (size - 1).
    pub coarse: Graph,
    /// Canonical fine-to-coarse assignment.
    pub proj: ProjectionMatrix,
    /// Cluster sizes, the expansion supervision target.
    pub v_star: Vec<usize>,
    /// Supervision mask over expand(coarse, v_star) candidates: true where
    /// the relabeled fine graph has an edge.
    pub e_star: Vec<bool>,
    /// Spectral distortion actually achieved.
    pub epsilon: f64,
}

impl CoarseningResult {
    pub fn position_map(&self) -> Vec<usize> {
        self.proj.position_map()
    }
}

const COARSEN_ATTEMPTS: usize = 20;

/// Repeated contraction passes until n_c <= ceil(ratio * n), rejecting and
/// retrying any draw where some cluster exceeds v_max nodes. k_eig caps how
/// many nontrivial eigenvectors enter the distortion report.
pub fn coarsen_to_ratio(
    g: &Graph,
    ratio: f64,
    v_max: usize,
    k_eig: usize,
    rng: &mut Rng,
) -> Result<CoarseningResult> {
    let n = g.n();
    if n == 0 {
        return Err(Error::Coarsen("cannot coarsen the empty graph".into()));
    }
    if !(0.0 < ratio && ratio <= 1.0) {
        return Err(Error::Coarsen(format!("ratio {ratio} outside (0, 1]")));
    }
    if v_max == 0 {
        return Err(Error::Coarsen("v_max must be >= 1".into()));
    }
    let target = ((ratio * n as f64).ceil() as usize).max(1);

    let mut last_failure = String::new();
    for _ in 0..COARSEN_ATTEMPTS {
        let mut proj = ProjectionMatrix::identity(n);
        let mut current = g.clone();
        while current.n() > target {
            let budget = current.n() - target;
            let sizes = proj.cluster_sizes();
            let (next, pass) =
                rec_pass_capped(&current, rng, 10 * current.n(), budget, &sizes, v_max);
            if next.n() == current.n() {
                break; // no admissible contractible edges left
            }
            proj = proj.compose(&pass)?;
            current = next;
        }
        if current.n() > target {
            last_failure = format!(
                "stalled at {} nodes (target {target}); every remaining merge would exceed \
                 v_max={v_max} or the graph is disconnected",
                current.n()
            );
            continue;
        }
        let sizes = proj.cluster_sizes();
        if let Some(&max_size) = sizes.iter().max() {
            if max_size > v_max {
                last_failure = format!("cluster of size {max_size} exceeds v_max={v_max}");
                continue;
            }
        }
        return finish_coarsening(g, proj, k_eig);
    }
    Err(Error::Coarsen(format!(
        "no admissible coarsening in {COARSEN_ATTEMPTS} attempts: {last_failure}"
    )))
}

fn finish_coarsening(
    g: &Graph,
    proj: ProjectionMatrix,
    k_eig: usize,
) -> Result<CoarseningResult> {
    let proj = proj.canonical();
    let v_star = proj.cluster_sizes();
    let labels: Vec<usize> = v_star.iter().map(|&s| s - 1).collect();
    let coarse = merge_by_assignment(g, &proj).with_labels(labels)?;

    let pos = proj.position_map();
    let (_, cands) = expand(&coarse, &ExpansionVector(v_star.clone()))?;
    let mut inv = vec![0usize; g.n()];
    for (u, &p) in pos.iter().enumerate() {
        inv[p] = u;
    }
    let e_star: Vec<bool> =
        cands.pairs.iter().map(|&(a, b)| g.has_edge(inv[a], inv[b])).collect();

    let k = k_eig.min(g.n().saturating_sub(1)).max(1);
    let epsilon = if g.n() == 1 { 0.0 } else { spectral_epsilon(g, &proj, k)? };

    Ok(CoarseningResult { coarse, proj, v_star, e_star, epsilon })
}
