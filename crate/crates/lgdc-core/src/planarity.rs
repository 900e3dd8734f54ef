//! Left-right planarity test (decision only, no embedding).
//!
//! Two DFS phases over an oriented copy of the graph. The first computes
//! heights, low-points and nesting depths; the second walks children in
//! nesting order and maintains a stack of conflict pairs of back-edge
//! intervals, rejecting exactly when a same-side constraint is violated.
//! Recursion depth is the DFS tree height, fine for the graph sizes this
//! crate works at.

use crate::graph::Graph;

type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Interval {
    low: Option<EdgeId>,
    high: Option<EdgeId>,
}

impl Interval {
    fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState {
    src: Vec<usize>,
    dst: Vec<usize>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting: Vec<usize>,
    height: Vec<Option<usize>>,
    parent_edge: Vec<Option<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    stack: Vec<ConflictPair>,
    stack_bottom: Vec<usize>,
    lowpt_edge: Vec<Option<EdgeId>>,
    refs: Vec<Option<EdgeId>>,
}

impl LrState {
    fn lowest(&self, p: &ConflictPair) -> Option<usize> {
        match (p.left.low, p.right.low) {
            (None, None) => None,
            (Some(l), None) => Some(self.lowpt[l]),
            (None, Some(r)) => Some(self.lowpt[r]),
            (Some(l), Some(r)) => Some(self.lowpt[l].min(self.lowpt[r])),
        }
    }

    /// Interval has a return edge strictly below lowpt of `edge`.
    fn conflicting(&self, i: &Interval, edge: EdgeId) -> bool {
        match i.high {
            Some(h) => self.lowpt[h] > self.lowpt[edge],
            None => false,
        }
    }
}

pub fn is_planar(g: &Graph) -> bool {
    let n = g.n();
    if n <= 2 {
        return true;
    }
    if n > 2 && g.m() > 3 * n - 6 {
        return false;
    }

    let mut st = LrState {
        src: Vec::new(),
        dst: Vec::new(),
        lowpt: Vec::new(),
        lowpt2: Vec::new(),
        nesting: Vec::new(),
        height: vec![None; n],
        parent_edge: vec![None; n],
        out_edges: vec![Vec::new(); n],
        stack: Vec::new(),
        stack_bottom: Vec::new(),
        lowpt_edge: Vec::new(),
        refs: Vec::new(),
    };

    let mut roots = Vec::new();
    for v in 0..n {
        if st.height[v].is_none() {
            st.height[v] = Some(0);
            roots.push(v);
            orient(g, &mut st, v);
        }
    }

    // Children in nesting-depth order; the edge reaching lowest comes first.
    for v in 0..n {
        st.out_edges[v].sort_by_key(|&e| st.nesting[e]);
    }
    st.stack_bottom = vec![0; st.src.len()];
    st.lowpt_edge = vec![None; st.src.len()];
    st.refs = vec![None; st.src.len()];

    roots.into_iter().all(|r| test(&mut st, r))
}

/// First DFS: orient edges away from the root, compute lowpt/lowpt2 per
/// oriented edge and fold them into the parent edge.
fn orient(g: &Graph, st: &mut LrState, v: usize) {
    let e = st.parent_edge[v];
    let hv = st.height[v].expect("visited");
    for w in g.neighbors(v) {
        // Already oriented (as tree edge into v, or processed back edge).
        if st.parent_edge[v].map(|pe| st.src[pe] == w).unwrap_or(false)
            || st.out_edges[v].iter().any(|&oe| st.dst[oe] == w)
            || st.out_edges[w].iter().any(|&oe| st.dst[oe] == v)
        {
            continue;
        }
        let vw: EdgeId = st.src.len();
        st.src.push(v);
        st.dst.push(w);
        st.lowpt.push(hv);
        st.lowpt2.push(hv);
        st.nesting.push(0);
        st.out_edges[v].push(vw);

        if st.height[w].is_none() {
            st.parent_edge[w] = Some(vw);
            st.height[w] = Some(hv + 1);
            orient(g, st, w);
        } else {
            st.lowpt[vw] = st.height[w].expect("visited");
        }

        st.nesting[vw] = 2 * st.lowpt[vw];
        if st.lowpt2[vw] < hv {
            // Chordal edge: nest one level deeper.
            st.nesting[vw] += 1;
        }
        if let Some(pe) = e {
            if st.lowpt[vw] < st.lowpt[pe] {
                st.lowpt2[pe] = st.lowpt[pe].min(st.lowpt2[vw]);
                st.lowpt[pe] = st.lowpt[vw];
            } else if st.lowpt[vw] > st.lowpt[pe] {
                st.lowpt2[pe] = st.lowpt2[pe].min(st.lowpt[vw]);
            } else {
                st.lowpt2[pe] = st.lowpt2[pe].min(st.lowpt2[vw]);
            }
        }
    }
}

/// Second DFS: true iff the subtree admits a consistent left-right
/// assignment of its back edges.
fn test(st: &mut LrState, v: usize) -> bool {
    let e = st.parent_edge[v];
    let hv = st.height[v].expect("visited");
    let children = st.out_edges[v].clone();
    for (idx, &ei) in children.iter().enumerate() {
        st.stack_bottom[ei] = st.stack.len();
        let w = st.dst[ei];
        if st.parent_edge[w] == Some(ei) {
            if !test(st, w) {
                return false;
            }
        } else {
            st.lowpt_edge[ei] = Some(ei);
            st.stack.push(ConflictPair {
                left: Interval::default(),
                right: Interval { low: Some(ei), high: Some(ei) },
            });
        }
        if st.lowpt[ei] < hv {
            // ei has a return edge below v.
            if idx == 0 {
                if let Some(pe) = e {
                    st.lowpt_edge[pe] = st.lowpt_edge[ei];
                }
            } else if !add_constraints(st, ei, e.expect("non-root has parent edge")) {
                return false;
            }
        }
    }
    if let Some(pe) = e {
        remove_back_edges(st, pe);
    }
    true
}

fn add_constraints(st: &mut LrState, ei: EdgeId, e: EdgeId) -> bool {
    let mut p = ConflictPair::default();
    // Merge return edges of ei into p.right.
    loop {
        let mut q = st.stack.pop().expect("return edge of ei left a pair on the stack");
        if !q.left.is_empty() {
            q.swap();
        }
        if !q.left.is_empty() {
            return false;
        }
        let q_low = q.right.low.expect("nonempty interval has low");
        if st.lowpt[q_low] > st.lowpt[e] {
            // Return edges stay on this side.
            if p.right.is_empty() {
                p.right.high = q.right.high;
            } else {
                st.refs[p.right.low.expect("nonempty")] = q.right.high;
            }
            p.right.low = q.right.low;
        } else {
            // Align: returns exactly to lowpt(e).
            st.refs[q_low] = st.lowpt_edge[e];
        }
        if st.stack.len() == st.stack_bottom[ei] {
            break;
        }
    }
    // Merge conflicting return edges of earlier siblings into p.left.
    while let Some(top) = st.stack.last() {
        if !(st.conflicting(&top.left, ei) || st.conflicting(&top.right, ei)) {
            break;
        }
        let mut q = st.stack.pop().expect("checked nonempty");
        if st.conflicting(&q.right, ei) {
            q.swap();
        }
        if st.conflicting(&q.right, ei) {
            return false;
        }
        // The interval below lowpt(ei) merges into p.right.
        if let Some(pr_low) = p.right.low {
            st.refs[pr_low] = q.right.high;
        }
        if q.right.low.is_some() {
            p.right.low = q.right.low;
        }
        if p.left.is_empty() {
            p.left.high = q.left.high;
        } else {
            st.refs[p.left.low.expect("nonempty")] = q.left.high;
        }
        p.left.low = q.left.low;
    }
    if !(p.left.is_empty() && p.right.is_empty()) {
        st.stack.push(p);
    }
    true
}

fn remove_back_edges(st: &mut LrState, e: EdgeId) {
    let u = st.src[e];
    let hu = st.height[u].expect("visited");
    // Drop pairs whose lowest return edge comes back exactly to u.
    while let Some(top) = st.stack.last() {
        if st.lowest(top) == Some(hu) {
            st.stack.pop();
        } else {
            break;
        }
    }
    if let Some(mut p) = st.stack.pop() {
        // Trim return edges ending at u off both intervals.
        while let Some(h) = p.left.high {
            if st.dst[h] == u {
                p.left.high = st.refs[h];
            } else {
                break;
            }
        }
        if p.left.high.is_none() {
            if let Some(l) = p.left.low {
                st.refs[l] = p.right.low;
                p.left.low = None;
            }
        }
        while let Some(h) = p.right.high {
            if st.dst[h] == u {
                p.right.high = st.refs[h];
            } else {
                break;
            }
        }
        if p.right.high.is_none() {
            if let Some(l) = p.right.low {
                st.refs[l] = p.left.low;
                p.right.low = None;
            }
        }
        st.stack.push(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v));
            }
        }
        Graph::simple_from_edges(n, &edges).unwrap()
    }

    fn complete_bipartite(a: usize, b: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..a {
            for v in 0..b {
                edges.push((u, a + v));
            }
        }
        Graph::simple_from_edges(a + b, &edges).unwrap()
    }

    /// Replace every edge with a path through `extra` fresh nodes.
    fn subdivide(g: &Graph, extra: usize) -> Graph {
        if extra == 0 {
            return g.clone();
        }
        let mut next = g.n();
        let mut edges = Vec::new();
        for (u, v, _) in g.edges() {
            let mut prev = u;
            for _ in 0..extra {
                edges.push((prev, next));
                prev = next;
                next += 1;
            }
            edges.push((prev, v));
        }
        Graph::simple_from_edges(next, &edges).unwrap()
    }

    #[test]
    fn small_and_planar_basics() {
        assert!(is_planar(&Graph::empty(0)));
        assert!(is_planar(&Graph::empty(5)));
        assert!(is_planar(&Graph::simple_from_edges(2, &[(0, 1)]).unwrap()));
        assert!(is_planar(&complete(3)));
        assert!(is_planar(&complete(4)));
        let c6 = Graph::simple_from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])
            .unwrap();
        assert!(is_planar(&c6));
    }

    #[test]
    fn kuratowski_graphs_rejected() {
        assert!(!is_planar(&complete(5)));
        assert!(!is_planar(&complete_bipartite(3, 3)));
        assert!(!is_planar(&complete(6)));
    }

    #[test]
    fn subdivisions_preserve_nonplanarity() {
        for extra in 1..=3 {
            assert!(!is_planar(&subdivide(&complete(5), extra)), "K5 + {extra}");
            assert!(!is_planar(&subdivide(&complete_bipartite(3, 3), extra)), "K33 + {extra}");
        }
        // Subdividing a planar graph keeps it planar.
        for extra in 1..=3 {
            assert!(is_planar(&subdivide(&complete(4), extra)));
        }
    }

    #[test]
    fn k5_minus_edge_and_k33_minus_edge_are_planar() {
        let mut edges: Vec<(usize, usize)> = complete(5).edges().map(|(u, v, _)| (u, v)).collect();
        edges.pop();
        assert!(is_planar(&Graph::simple_from_edges(5, &edges).unwrap()));

        let mut edges: Vec<(usize, usize)> =
            complete_bipartite(3, 3).edges().map(|(u, v, _)| (u, v)).collect();
        edges.pop();
        assert!(is_planar(&Graph::simple_from_edges(6, &edges).unwrap()));
    }

    #[test]
    fn disconnected_graph_planar_iff_all_components_are() {
        // Planar component + K5 component.
        let mut edges = vec![(0, 1), (1, 2)];
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((3 + u, 3 + v));
            }
        }
        assert!(!is_planar(&Graph::simple_from_edges(8, &edges).unwrap()));
        let two_triangles =
            Graph::simple_from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
                .unwrap();
        assert!(is_planar(&two_triangles));
    }

    #[test]
    fn edge_bound_short_circuits() {
        // 3n - 5 edges can't be planar; build any graph that dense.
        let g = complete(8); // 28 > 18 edges
        assert!(!is_planar(&g));
    }

    #[test]
    fn planar_grids_and_wheels() {
        // 4x4 grid.
        let mut edges = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                let id = r * 4 + c;
                if c + 1 < 4 {
                    edges.push((id, id + 1));
                }
                if r + 1 < 4 {
                    edges.push((id, id + 4));
                }
            }
        }
        assert!(is_planar(&Graph::simple_from_edges(16, &edges).unwrap()));
        // Wheel on 8 rim nodes: maximal planar chunks with chords.
        let mut edges = Vec::new();
        for i in 0..8 {
            edges.push((i, (i + 1) % 8));
            edges.push((i, 8));
        }
        assert!(is_planar(&Graph::simple_from_edges(9, &edges).unwrap()));
    }

    /// Removing edges never makes a planar graph nonplanar; adding the two
    /// "crossing" chords of a cycle makes it nonplanar only when they
    /// interleave with a third.
    #[test]
    fn random_planar_graphs_stay_planar_under_deletion() {
        let mut rng = crate::rng::from_seed(3);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> =
                (0..20).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
            let Some(edges) = crate::delaunay::delaunay_edges(&pts) else {
                continue;
            };
            let g = Graph::simple_from_edges(20, &edges).unwrap();
            assert!(is_planar(&g));
            let mut kept: Vec<(usize, usize)> = g.edges().map(|(u, v, _)| (u, v)).collect();
            while kept.len() > 5 {
                kept.remove(rng.random_range(0..kept.len()));
                assert!(is_planar(&Graph::simple_from_edges(20, &kept).unwrap()));
            }
        }
    }
}
