//! Graph isomorphism tooling: a Weisfeiler-Leman canonical digest used as a
//! cheap prefilter, and an exact backtracking matcher to confirm hits.
//!
//! The digest is permutation-invariant by construction. WL cannot separate
//! all graph pairs (e.g. certain regular graphs), so equality of digests is
//! always confirmed with the exact matcher before two graphs are declared
//! isomorphic.

use crate::graph::Graph;

const WL_ROUNDS: usize = 3;

fn mix64(mut h: u64, x: u64) -> u64 {
    h ^= x;
    h = h.wrapping_mul(0x100_0000_01b3);
    h ^= h >> 29;
    h
}

fn hash_list(seed: u64, xs: &[u64]) -> u64 {
    let mut h = mix64(0xcbf2_9ce4_8422_2325, seed);
    for &x in xs {
        h = mix64(h, x);
    }
    mix64(h, xs.len() as u64)
}

/// Weight bucket that feeds the WL relabeling: exact weight bits, so graphs
/// differing only in weights hash differently.
fn weight_token(w: f64) -> u64 {
    w.to_bits()
}

fn wl_colors(g: &Graph, rounds: usize) -> Vec<u64> {
    let n = g.n();
    let mut colors: Vec<u64> = match g.node_labels() {
        Some(labels) => labels.iter().map(|&l| mix64(0x9e37, l as u64)).collect(),
        None => vec![mix64(0x9e37, 0); n],
    };
    for round in 0..rounds {
        let mut next = vec![0u64; n];
        for i in 0..n {
            let mut neigh: Vec<u64> = g
                .neighbors(i)
                .map(|j| mix64(colors[j], weight_token(g.weight(i, j))))
                .collect();
            neigh.sort_unstable();
            neigh.insert(0, colors[i]);
            next[i] = hash_list(round as u64 + 1, &neigh);
        }
        colors = next;
    }
    colors
}

/// Permutation-invariant digest: WL colors, size, edge count and component
/// count folded together.
pub fn canonical_hash(g: &Graph) -> u64 {
    let mut colors = wl_colors(g, WL_ROUNDS);
    colors.sort_unstable();
    let mut h = hash_list(0xfeed, &colors);
    h = mix64(h, g.n() as u64);
    h = mix64(h, g.m() as u64);
    h = mix64(h, g.connected_components().len() as u64);
    h
}

/// Exact isomorphism: weights and node labels must match under the mapping.
pub fn are_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.n() != b.n() || a.m() != b.m() {
        return false;
    }
    let n = a.n();
    if n == 0 {
        return true;
    }
    let mut deg_a: Vec<usize> = (0..n).map(|i| a.degree(i)).collect();
    let mut deg_b: Vec<usize> = (0..n).map(|i| b.degree(i)).collect();
    deg_a.sort_unstable();
    deg_b.sort_unstable();
    if deg_a != deg_b {
        return false;
    }

    // Refined WL colors as matching invariants: a node of A may only map to
    // a node of B with the same color.
    let rounds = n.min(8);
    let ca = wl_colors(a, rounds);
    let cb = wl_colors(b, rounds);
    let mut sa = ca.clone();
    let mut sb = cb.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return false;
    }

    // Order A's nodes by ascending color-class size, then descending degree:
    // most constrained first.
    let class_size = |color: u64| ca.iter().filter(|&&c| c == color).count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (class_size(ca[i]), std::cmp::Reverse(a.degree(i))));

    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    backtrack(a, b, &ca, &cb, &order, 0, &mut mapping, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    a: &Graph,
    b: &Graph,
    ca: &[u64],
    cb: &[u64],
    order: &[usize],
    depth: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    'candidates: for v in 0..b.n() {
        if used[v] || cb[v] != ca[u] || b.degree(v) != a.degree(u) {
            continue;
        }
        // Consistency with already-mapped nodes, including weights.
        for &w in &order[..depth] {
            if a.weight(u, w) != b.weight(v, mapping[w]) {
                continue 'candidates;
            }
        }
        mapping[u] = v;
        used[v] = true;
        if backtrack(a, b, ca, cb, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[u] = usize::MAX;
        used[v] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn cycle(n: usize, offset: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (offset + i, offset + (i + 1) % n)).collect()
    }

    #[test]
    fn digest_is_permutation_invariant() {
        let mut rng = crate::rng::from_seed(21);
        for _ in 0..100 {
            let n = rng.random_range(2..=16);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.4 {
                        edges.push((u, v));
                    }
                }
            }
            let g = crate::Graph::simple_from_edges(n, &edges).unwrap();
            let h = canonical_hash(&g);
            for _ in 0..10 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                assert_eq!(canonical_hash(&g.permuted(&perm).unwrap()), h);
            }
        }
    }

    #[test]
    fn digest_separates_easy_pairs() {
        let p3 = crate::Graph::simple_from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let k3 = crate::Graph::simple_from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_ne!(canonical_hash(&p3), canonical_hash(&k3));
        // Same degree sequence, different component count.
        let c8 = crate::Graph::simple_from_edges(8, &cycle(8, 0)).unwrap();
        let mut e = cycle(4, 0);
        e.extend(cycle(4, 4));
        let two_c4 = crate::Graph::simple_from_edges(8, &e).unwrap();
        assert_ne!(canonical_hash(&c8), canonical_hash(&two_c4));
        assert!(!are_isomorphic(&c8, &two_c4));
    }

    #[test]
    fn digest_sees_weights_and_labels() {
        let a = crate::Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let b = crate::Graph::from_edges(2, &[(0, 1, 2.0)]).unwrap();
        assert_ne!(canonical_hash(&a), canonical_hash(&b));
        assert!(!are_isomorphic(&a, &b));
        let la = a.clone().with_labels(vec![0, 0]).unwrap();
        let lb = a.clone().with_labels(vec![0, 1]).unwrap();
        assert_ne!(canonical_hash(&la), canonical_hash(&lb));
        assert!(!are_isomorphic(&la, &lb));
        // Label permutation consistent with the mapping is accepted.
        let lc = a.with_labels(vec![1, 0]).unwrap();
        assert!(are_isomorphic(&lb, &lc));
    }

    #[test]
    fn exact_matcher_on_permuted_graphs() {
        let mut rng = crate::rng::from_seed(33);
        for _ in 0..50 {
            let n = rng.random_range(1..=12);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.35 {
                        edges.push((u, v));
                    }
                }
            }
            let g = crate::Graph::simple_from_edges(n, &edges).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let p = g.permuted(&perm).unwrap();
            assert!(are_isomorphic(&g, &p));
            assert_eq!(canonical_hash(&g), canonical_hash(&p));
        }
    }

    #[test]
    fn exact_matcher_rejects_near_misses() {
        // Two trees on 7 nodes with the same degree sequence [1,1,1,1,2,3,3]
        // that are not isomorphic: differ in distance between the 3-degree
        // nodes.
        let t1 = crate::Graph::simple_from_edges(
            7,
            &[(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (4, 6)],
        )
        .unwrap();
        let t2 = crate::Graph::simple_from_edges(
            7,
            &[(0, 1), (0, 2), (0, 3), (3, 4), (3, 5), (5, 6)],
        )
        .unwrap();
        assert_eq!(
            {
                let mut d: Vec<usize> = (0..7).map(|i| t1.degree(i)).collect();
                d.sort_unstable();
                d
            },
            {
                let mut d: Vec<usize> = (0..7).map(|i| t2.degree(i)).collect();
                d.sort_unstable();
                d
            }
        );
        assert!(!are_isomorphic(&t1, &t2));
    }

    #[test]
    fn empty_and_single_node_graphs() {
        assert!(are_isomorphic(&crate::Graph::empty(0), &crate::Graph::empty(0)));
        assert!(are_isomorphic(&crate::Graph::empty(1), &crate::Graph::empty(1)));
        assert!(!are_isomorphic(&crate::Graph::empty(1), &crate::Graph::empty(2)));
    }
}
