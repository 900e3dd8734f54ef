//! Weighted undirected graphs on a dense adjacency matrix.
//!
//! Dense storage is deliberate: everything downstream (Laplacians, message
//! passing, eigensolves) is dense anyway, and the working sizes stay small.

use ndarray::Array2;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: Array2<f64>,
    node_labels: Option<Vec<usize>>,
}

impl Graph {
    /// Invariants enforced here and preserved by every operation: exact
    /// symmetry, zero diagonal, non-negative finite weights.
    pub fn new(weights: Array2<f64>, node_labels: Option<Vec<usize>>) -> Result<Graph> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(Error::InvalidGraph(format!("weight matrix is {r}x{c}, not square")));
        }
        for i in 0..r {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..r {
                let w = weights[[i, j]];
                if w != weights[[j, i]] {
                    return Err(Error::InvalidGraph(format!("asymmetric weights at ({i},{j})")));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!("bad weight {w} at ({i},{j})")));
                }
            }
        }
        if let Some(labels) = &node_labels {
            if labels.len() != r {
                return Err(Error::InvalidGraph(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    r
                )));
            }
        }
        Ok(Graph { n: r, weights, node_labels })
    }

    pub fn empty(n: usize) -> Graph {
        Graph { n, weights: Array2::zeros((n, n)), node_labels: None }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph> {
        let mut w = Array2::zeros((n, n));
        for &(u, v, wt) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if w[[u, v]] != 0.0 {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
            w[[u, v]] = wt;
            w[[v, u]] = wt;
        }
        Graph::new(w, None)
    }

    /// Unit-weight graph from a pair list.
    pub fn simple_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let weighted: Vec<(usize, usize, f64)> =
            edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Graph::from_edges(n, &weighted)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Graph> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges in the support.
    pub fn m(&self) -> usize {
        self.edges().count()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[[u, v]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.weights[[u, v]] > 0.0
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    /// Edges as (u, v, w) with u < v, ascending lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            ((u + 1)..self.n).filter_map(move |v| {
                let w = self.weights[[u, v]];
                (w > 0.0).then_some((u, v, w))
            })
        })
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| v != u && self.weights[[u, v]] > 0.0)
    }

    /// Neighbor count (support degree, ignores weights).
    pub fn degree(&self, u: usize) -> usize {
        self.neighbors(u).count()
    }

    /// Sum of incident edge weights.
    pub fn strength(&self, u: usize) -> f64 {
        (0..self.n).map(|v| self.weights[[u, v]]).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// All weights exactly 0 or 1.
    pub fn is_simple(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    /// Combinatorial Laplacian L = D - W.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = -self.weights.clone();
        for i in 0..self.n {
            l[[i, i]] = self.strength(i);
        }
        l
    }

    /// Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}; isolated
    /// nodes contribute a zero row.
    pub fn normalized_laplacian(&self) -> Array2<f64> {
        let inv_sqrt: Vec<f64> = (0..self.n)
            .map(|i| {
                let s = self.strength(i);
                if s > 0.0 {
                    1.0 / s.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut l = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    l[[i, j]] = if self.strength(i) > 0.0 { 1.0 } else { 0.0 };
                } else {
                    l[[i, j]] = -self.weights[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
                }
            }
        }
        l
    }

    /// Connected components in discovery order; each sorted ascending.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.connected_components().len() == 1
    }

    /// Connected with exactly n-1 support edges.
    pub fn is_tree(&self) -> bool {
        self.n >= 1 && self.is_connected() && self.m() == self.n - 1
    }

    /// Hop-count diameter and average shortest path length. For a
    /// disconnected graph both are computed on the largest component
    /// (ties broken by smallest member) and the flag is set.
    pub fn shortest_path_stats(&self) -> Result<PathStats> {
        if self.n == 0 {
            return Err(Error::InvalidGraph("path stats of empty graph".into()));
        }
        let comps = self.connected_components();
        let restricted = comps.len() > 1;
        let comp = comps
            .iter()
            .max_by_key(|c| (c.len(), std::cmp::Reverse(c[0])))
            .expect("at least one component");
        if comp.len() == 1 {
            return Ok(PathStats { diameter: 0, aspl: 0.0, largest_component_only: restricted });
        }
        let in_comp: std::collections::HashSet<usize> = comp.iter().copied().collect();
        let mut diameter = 0usize;
        let mut total = 0u64;
        let mut pairs = 0u64;
        for &src in comp {
            let mut dist = vec![usize::MAX; self.n];
            dist[src] = 0;
            let mut queue = std::collections::VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if in_comp.contains(&v) && dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            for &dst in comp {
                if dst > src {
                    let d = dist[dst];
                    diameter = diameter.max(d);
                    total += d as u64;
                    pairs += 1;
                }
            }
        }
        Ok(PathStats {
            diameter,
            aspl: total as f64 / pairs as f64,
            largest_component_only: restricted,
        })
    }

    /// Minimum number of support edges whose removal disconnects the graph.
    /// Returns 0 for a disconnected graph. Computed as min over sinks of
    /// unit-capacity max-flow from node 0 (Edmonds-Karp).
    pub fn edge_connectivity(&self) -> Result<usize> {
        if self.n < 2 {
            return Err(Error::InvalidGraph("edge connectivity needs at least 2 nodes".into()));
        }
        if !self.is_connected() {
            return Ok(0);
        }
        let adj: Vec<Vec<usize>> = (0..self.n).map(|u| self.neighbors(u).collect()).collect();
        let mut best = adj.iter().map(Vec::len).min().expect("nonempty");
        for sink in 1..self.n {
            best = best.min(max_flow_unit(&adj, 0, sink));
            if best == 0 {
                break;
            }
        }
        Ok(best)
    }

    /// Relabel nodes: node u of the original becomes perm[u].
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidGraph("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut w = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..self.n {
                w[[perm[i], perm[j]]] = self.weights[[i, j]];
            }
        }
        let labels = self.node_labels.as_ref().map(|l| {
            let mut out = vec![0usize; self.n];
            for i in 0..self.n {
                out[perm[i]] = l[i];
            }
            out
        });
        Graph::new(w, labels)
    }

    /// Forget weights: every edge becomes weight 1.
    pub fn support(&self) -> Graph {
        let mut w = Array2::zeros((self.n, self.n));
        for (u, v, _) in self.edges() {
            w[[u, v]] = 1.0;
            w[[v, u]] = 1.0;
        }
        Graph { n: self.n, weights: w, node_labels: self.node_labels.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub diameter: usize,
    pub aspl: f64,
    pub largest_component_only: bool,
}

/// Edmonds-Karp with unit capacities on both arc directions.
fn max_flow_unit(adj: &[Vec<usize>], s: usize, t: usize) -> usize {
    let n = adj.len();
    // cap[u] holds residual capacity to each neighbor, indexed in parallel
    // with adj[u]; the reverse arc lives in the neighbor's list.
    let mut cap: Vec<Vec<u8>> = adj.iter().map(|nb| vec![1u8; nb.len()]).collect();
    let rev_index: Vec<Vec<usize>> = adj
        .iter()
        .enumerate()
        .map(|(u, nb)| {
            nb.iter()
                .map(|&v| adj[v].iter().position(|&x| x == u).expect("symmetric adjacency"))
                .collect()
        })
        .collect();
    let mut flow = 0;
    loop {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut queue = std::collections::VecDeque::from([s]);
        let mut reached = false;
        'bfs: while let Some(u) = queue.pop_front() {
            for (k, &v) in adj[u].iter().enumerate() {
                if cap[u][k] > 0 && parent[v].is_none() && v != s {
                    parent[v] = Some((u, k));
                    if v == t {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        if !reached {
            return flow;
        }
        let mut v = t;
        while v != s {
            let (u, k) = parent[v].expect("path exists");
            cap[u][k] -= 1;
            cap[v][rev_index[u][k]] += 1;
            v = u;
        }
        flow += 1;
    }
}
