//! Synthetic graph families: uniform random trees, Delaunay triangulations
//! of random points, and a two-community stochastic block model.
//!
//! Generation is embarrassingly parallel and deterministic: graph i of a
//! run draws from its own stream seeded with `seed XOR i` (test-split items
//! continue the index space so the two splits never share a stream).

use rayon::prelude::*;

use crate::graph::Graph;
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Tree,
    Planar,
    Community,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Tree => "tree",
            Family::Planar => "planar",
            Family::Community => "community",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "tree" => Ok(Family::Tree),
            "planar" => Ok(Family::Planar),
            "community" => Ok(Family::Community),
            other => Err(Error::Config(format!(
                "unknown family {other:?} (expected tree, planar or community)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SbmParams {
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams { communities: 2, p_in: 0.3, p_out: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub family: Family,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub sbm: SbmParams,
}

/// Uniform labeled tree by decoding a random Pruefer sequence.
pub fn gen_tree(n: usize, rng: &mut Rng) -> Graph {
    use rand::Rng as _;
    if n <= 1 {
        return Graph::empty(n);
    }
    if n == 2 {
        return Graph::simple_from_edges(2, &[(0, 1)]).expect("valid edge");
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves = std::collections::BinaryHeap::new();
    for (v, &d) in degree.iter().enumerate() {
        if d == 1 {
            leaves.push(std::cmp::Reverse(v));
        }
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("tree decode keeps a leaf");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(std::cmp::Reverse(s));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().expect("two leaves remain");
    let std::cmp::Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a.min(b), a.max(b)));
    Graph::simple_from_edges(n, &edges).expect("Pruefer decode yields a simple tree")
}

/// Delaunay triangulation of n uniform points in the unit square;
/// degenerate point sets are resampled.
pub fn gen_planar(n: usize, rng: &mut Rng) -> Graph {
    use rand::Rng as _;
    loop {
        let pts: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        if let Some(edges) = crate::delaunay::delaunay_edges(&pts) {
            return Graph::simple_from_edges(n, &edges).expect("triangulation is simple");
        }
    }
}

const SBM_CONNECT_ATTEMPTS: usize = 100;

/// Planted-partition graph with near-equal community sizes (nodes blocked
/// by community: community k is a contiguous index range). Resamples until
/// connected.
pub fn gen_community(n: usize, params: &SbmParams, rng: &mut Rng) -> Result<Graph> {
    use rand::Rng as _;
    if params.communities == 0 || params.communities > n.max(1) {
        return Err(Error::Config(format!(
            "{} communities for {} nodes",
            params.communities, n
        )));
    }
    for p in [params.p_in, params.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("edge probability {p} outside [0,1]")));
        }
    }
    let comm = community_assignment(n, params.communities);
    for _ in 0..SBM_CONNECT_ATTEMPTS {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let p = if comm[u] == comm[v] { params.p_in } else { params.p_out };
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::simple_from_edges(n, &edges).expect("Bernoulli edges are simple");
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Config(format!(
        "no connected sample in {SBM_CONNECT_ATTEMPTS} attempts \
         (n={n}, p_in={}, p_out={}); raise the probabilities",
        params.p_in, params.p_out
    )))
}

pub fn community_assignment(n: usize, communities: usize) -> Vec<usize> {
    (0..n).map(|v| v * communities / n.max(1)).collect()
}

/// Newman modularity of a node partition (unweighted support).
pub fn modularity(g: &Graph, comm: &[usize]) -> f64 {
    let m = g.m() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            if comm[i] != comm[j] {
                continue;
            }
            let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
            q += a - (g.degree(i) as f64) * (g.degree(j) as f64) / (2.0 * m);
        }
    }
    q / (2.0 * m)
}

fn gen_one(spec: &DatasetSpec, index: u64) -> Result<Graph> {
    use rand::Rng as _;
    let mut rng = rng::from_seed(rng::item_seed(spec.seed, index));
    let n = rng.random_range(spec.n_min..=spec.n_max);
    match spec.family {
        Family::Tree => Ok(gen_tree(n, &mut rng)),
        Family::Planar => Ok(gen_planar(n, &mut rng)),
        Family::Community => gen_community(n, &spec.sbm, &mut rng),
    }
}

/// `count` graphs with sizes uniform in [n_min, n_max].
pub fn generate(spec: &DatasetSpec) -> Result<Vec<Graph>> {
    if spec.n_min == 0 || spec.n_min > spec.n_max {
        return Err(Error::Config(format!(
            "bad size range [{}, {}]",
            spec.n_min, spec.n_max
        )));
    }
    (0..spec.count as u64)
        .into_par_iter()
        .map(|i| gen_one(spec, i))
        .collect()
}

/// Train/test split; test items use index space [count, count+test_count).
pub fn generate_split(spec: &DatasetSpec, test_count: usize) -> Result<(Vec<Graph>, Vec<Graph>)> {
    let train = generate(spec)?;
    let test: Result<Vec<Graph>> = (spec.count as u64..(spec.count + test_count) as u64)
        .into_par_iter()
        .map(|i| gen_one(spec, i))
        .collect();
    Ok((train, test?))
}

/// Family membership predicate used by the validity score.
pub fn validity_predicate(family: Family) -> fn(&Graph) -> bool {
    match family {
        Family::Tree => |g: &Graph| g.is_tree(),
        Family::Planar => |g: &Graph| g.is_connected() && crate::planarity::is_planar(g),
        Family::Community => |g: &Graph| g.is_connected(),
    }
}
