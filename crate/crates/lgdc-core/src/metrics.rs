//! Evaluation battery: per-graph statistics, kernel MMD, V.U.N. counting,
//! and local/global ratio summaries.
//!
//! Distribution statistics are normalized histograms or per-node mean
//! descriptors; MMD uses a Gaussian kernel over total-variation distance
//! (absolute difference for scalar statistics), sigma 1, the biased
//! estimator with diagonal terms. Orbit and motif counts enumerate
//! connected subgraphs of up to four nodes exactly.

use rayon::prelude::*;

use crate::eig::eig_sym;
use crate::graph::Graph;
use crate::iso::{are_isomorphic, canonical_hash};
use crate::{Error, Result};

pub const CLUSTERING_BINS: usize = 100;
pub const SPECTRE_BINS: usize = 200;
pub const WAVELET_BINS: usize = 100;
pub const HKS_SCALES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
/// Orbits of connected graphlets on 2..=4 nodes, standard numbering.
pub const ORBITS: usize = 15;
/// Connected 4-node subgraph types: path, star, cycle, triangle with a
/// pendant edge, diamond, complete.
pub const MOTIF_TYPES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Degree,
    Clustering,
    Orbit,
    Motif,
    Spectre,
    Wavelet,
    Components,
    EdgeConn,
    Diameter,
    Aspl,
}

pub const ALL_KINDS: [MetricKind; 10] = [
    MetricKind::Degree,
    MetricKind::Clustering,
    MetricKind::Orbit,
    MetricKind::Motif,
    MetricKind::Spectre,
    MetricKind::Wavelet,
    MetricKind::Components,
    MetricKind::EdgeConn,
    MetricKind::Diameter,
    MetricKind::Aspl,
];

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Degree => "degree",
            MetricKind::Clustering => "clustering",
            MetricKind::Orbit => "orbit",
            MetricKind::Motif => "motif",
            MetricKind::Spectre => "spectre",
            MetricKind::Wavelet => "wavelet",
            MetricKind::Components => "components",
            MetricKind::EdgeConn => "edge_conn",
            MetricKind::Diameter => "diameter",
            MetricKind::Aspl => "aspl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricGroup {
    Local,
    Global,
    /// Wavelet mixes both scales; it joins only the overall average.
    CrossScale,
}

pub fn kind_group(kind: MetricKind) -> MetricGroup {
    match kind {
        MetricKind::Degree | MetricKind::Clustering | MetricKind::Orbit | MetricKind::Motif => {
            MetricGroup::Local
        }
        MetricKind::Spectre
        | MetricKind::Components
        | MetricKind::EdgeConn
        | MetricKind::Diameter
        | MetricKind::Aspl => MetricGroup::Global,
        MetricKind::Wavelet => MetricGroup::CrossScale,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    Distribution(Vec<f64>),
    Scalar(f64),
}

fn histogram(values: impl Iterator<Item = f64>, bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut count = 0usize;
    for v in values {
        let frac = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let b = ((frac * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
        count += 1;
    }
    if count > 0 {
        for x in &mut h {
            *x /= count as f64;
        }
    }
    h
}

fn degree_stat(g: &Graph) -> Vec<f64> {
    let max_deg = (0..g.n()).map(|u| g.degree(u)).max().unwrap_or(0);
    let mut h = vec![0.0; max_deg + 1];
    for u in 0..g.n() {
        h[g.degree(u)] += 1.0;
    }
    for x in &mut h {
        *x /= g.n() as f64;
    }
    h
}

fn local_clustering(g: &Graph, u: usize) -> f64 {
    let nbrs: Vec<usize> = g.neighbors(u).collect();
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            if g.has_edge(nbrs[a], nbrs[b]) {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (k * (k - 1)) as f64
}

fn clustering_stat(g: &Graph) -> Vec<f64> {
    histogram(
        (0..g.n()).map(|u| local_clustering(g, u)),
        CLUSTERING_BINS,
        0.0,
        1.0,
    )
}

/// Connected-subgraph enumeration (exclusive-neighborhood extension).
/// Visits every connected induced subgraph on `k` nodes exactly once.
fn enumerate_connected(g: &Graph, k: usize, visit: &mut impl FnMut(&[usize])) {
    let n = g.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|u| g.neighbors(u).collect()).collect();
    // in_sub / near_sub track membership and adjacency to the current
    // subgraph so extensions stay exclusive.
    let mut in_sub = vec![false; n];
    let mut near = vec![0usize; n];
    let mut sub = Vec::with_capacity(k);

    fn extend(
        adj: &[Vec<usize>],
        k: usize,
        root: usize,
        sub: &mut Vec<usize>,
        ext: &[usize],
        in_sub: &mut [bool],
        near: &mut [usize],
        visit: &mut impl FnMut(&[usize]),
    ) {
        if sub.len() == k {
            visit(sub);
            return;
        }
        let mut rest = ext.to_vec();
        while let Some(w) = rest.pop() {
            sub.push(w);
            in_sub[w] = true;
            for &u in &adj[w] {
                near[u] += 1;
            }
            // Extension set for the recursive call: remaining candidates
            // plus exclusive neighbors of w (near == 1 means adjacent to
            // w and to nothing else in the subgraph).
            let mut next_ext = rest.clone();
            for &u in &adj[w] {
                if u > root && !in_sub[u] && near[u] == 1 {
                    next_ext.push(u);
                }
            }
            extend(adj, k, root, sub, &next_ext, in_sub, near, visit);
            for &u in &adj[w] {
                near[u] -= 1;
            }
            in_sub[w] = false;
            sub.pop();
        }
    }

    for v in 0..n {
        sub.push(v);
        in_sub[v] = true;
        for &u in &adj[v] {
            near[u] += 1;
        }
        let ext: Vec<usize> = adj[v].iter().copied().filter(|&u| u > v).collect();
        extend(&adj, k, v, &mut sub, &ext, &mut in_sub, &mut near, visit);
        for &u in &adj[v] {
            near[u] -= 1;
        }
        in_sub[v] = false;
        sub.pop();
    }
}

/// Type index of a connected 4-node subgraph from its edge count and
/// maximum internal degree.
fn motif_type(edges: usize, max_deg: usize) -> usize {
    match (edges, max_deg) {
        (3, 2) => 0, // path
        (3, 3) => 1, // star
        (4, 2) => 2, // cycle
        (4, 3) => 3, // triangle with pendant
        (5, _) => 4, // diamond
        (6, _) => 5, // complete
        _ => unreachable!("connected 4-node subgraph with {edges} edges"),
    }
}

/// Orbit of a node inside a connected graphlet, determined by the
/// graphlet type and the node's internal degree.
fn orbit_of(size: usize, edges: usize, max_deg: usize, deg: usize) -> usize {
    match size {
        2 => 0,
        3 => match (edges, deg) {
            (2, 1) => 1,
            (2, 2) => 2,
            (3, _) => 3,
            _ => unreachable!(),
        },
        4 => match (motif_type(edges, max_deg), deg) {
            (0, 1) => 4,
            (0, 2) => 5,
            (1, 1) => 6,
            (1, 3) => 7,
            (2, _) => 8,
            (3, 1) => 9,
            (3, 2) => 10,
            (3, 3) => 11,
            (4, 2) => 12,
            (4, 3) => 13,
            (5, _) => 14,
            _ => unreachable!(),
        },
        _ => unreachable!(),
    }
}

fn subgraph_shape(g: &Graph, nodes: &[usize]) -> (usize, usize, Vec<usize>) {
    let k = nodes.len();
    let mut degs = vec![0usize; k];
    let mut edges = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            if g.has_edge(nodes[a], nodes[b]) {
                degs[a] += 1;
                degs[b] += 1;
                edges += 1;
            }
        }
    }
    let max_deg = degs.iter().copied().max().unwrap_or(0);
    (edges, max_deg, degs)
}

/// Per-node orbit counts and whole-graph motif-type counts from one
/// enumeration sweep over sizes 2..=4.
pub fn orbit_motif_counts(g: &Graph) -> (Vec<Vec<u64>>, Vec<u64>) {
    let n = g.n();
    let mut orbits = vec![vec![0u64; ORBITS]; n];
    let mut motifs = vec![0u64; MOTIF_TYPES];
    for u in 0..n {
        orbits[u][0] = g.degree(u) as u64;
    }
    for k in [3usize, 4] {
        enumerate_connected(g, k, &mut |nodes| {
            let (edges, max_deg, degs) = subgraph_shape(g, nodes);
            if k == 4 {
                motifs[motif_type(edges, max_deg)] += 1;
            }
            for (idx, &u) in nodes.iter().enumerate() {
                orbits[u][orbit_of(k, edges, max_deg, degs[idx])] += 1;
            }
        });
    }
    (orbits, motifs)
}

fn orbit_stat(orbits: &[Vec<u64>]) -> Vec<f64> {
    let n = orbits.len();
    let mut mean = vec![0.0; ORBITS];
    for row in orbits {
        for (o, &c) in row.iter().enumerate() {
            mean[o] += c as f64;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    mean
}

fn motif_stat(motifs: &[u64]) -> Vec<f64> {
    let total: u64 = motifs.iter().sum();
    if total == 0 {
        return vec![0.0; MOTIF_TYPES];
    }
    motifs.iter().map(|&c| c as f64 / total as f64).collect()
}

fn spectral_stats(g: &Graph) -> Result<(Vec<f64>, Vec<f64>)> {
    let dec = eig_sym(&g.normalized_laplacian())?;
    let spectre = histogram(
        dec.eigenvalues.iter().copied(),
        SPECTRE_BINS,
        0.0,
        2.0,
    );
    let n = g.n();
    let mut hks = Vec::with_capacity(n * HKS_SCALES.len());
    for &s in &HKS_SCALES {
        for i in 0..n {
            let mut v = 0.0;
            for (k, &lam) in dec.eigenvalues.iter().enumerate() {
                v += (-s * lam).exp() * dec.eigenvectors[[i, k]].powi(2);
            }
            hks.push(v);
        }
    }
    let wavelet = histogram(hks.into_iter(), WAVELET_BINS, 0.0, 1.0);
    Ok((spectre, wavelet))
}

pub fn graph_statistic(kind: MetricKind, g: &Graph) -> Result<Statistic> {
    if g.n() == 0 {
        return Err(Error::InvalidGraph("no statistics for an empty graph".into()));
    }
    Ok(match kind {
        MetricKind::Degree => Statistic::Distribution(degree_stat(g)),
        MetricKind::Clustering => Statistic::Distribution(clustering_stat(g)),
        MetricKind::Orbit => {
            let (orbits, _) = orbit_motif_counts(g);
            Statistic::Distribution(orbit_stat(&orbits))
        }
        MetricKind::Motif => {
            let (_, motifs) = orbit_motif_counts(g);
            Statistic::Distribution(motif_stat(&motifs))
        }
        MetricKind::Spectre => Statistic::Distribution(spectral_stats(g)?.0),
        MetricKind::Wavelet => Statistic::Distribution(spectral_stats(g)?.1),
        MetricKind::Components => Statistic::Scalar(g.connected_components().len() as f64),
        MetricKind::EdgeConn => {
            Statistic::Scalar(if g.n() < 2 { 0.0 } else { g.edge_connectivity()? as f64 })
        }
        MetricKind::Diameter => Statistic::Scalar(g.shortest_path_stats()?.diameter as f64),
        MetricKind::Aspl => Statistic::Scalar(g.shortest_path_stats()?.aspl),
    })
}

/// All ten statistics with shared eigendecomposition and subgraph
/// enumeration, aligned with `ALL_KINDS`.
pub fn all_statistics(g: &Graph) -> Result<Vec<Statistic>> {
    if g.n() == 0 {
        return Err(Error::InvalidGraph("no statistics for an empty graph".into()));
    }
    let (orbits, motifs) = orbit_motif_counts(g);
    let (spectre, wavelet) = spectral_stats(g)?;
    let paths = g.shortest_path_stats()?;
    Ok(vec![
        Statistic::Distribution(degree_stat(g)),
        Statistic::Distribution(clustering_stat(g)),
        Statistic::Distribution(orbit_stat(&orbits)),
        Statistic::Distribution(motif_stat(&motifs)),
        Statistic::Distribution(spectre),
        Statistic::Distribution(wavelet),
        Statistic::Scalar(g.connected_components().len() as f64),
        Statistic::Scalar(if g.n() < 2 { 0.0 } else { g.edge_connectivity()? as f64 }),
        Statistic::Scalar(paths.diameter as f64),
        Statistic::Scalar(paths.aspl),
    ])
}

/// Total variation between histograms; the shorter one is zero-padded.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let mut d = 0.0;
    for i in 0..len {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        d += (x - y).abs();
    }
    d / 2.0
}

fn stat_distance(a: &Statistic, b: &Statistic) -> f64 {
    match (a, b) {
        (Statistic::Distribution(x), Statistic::Distribution(y)) => tv_distance(x, y),
        (Statistic::Scalar(x), Statistic::Scalar(y)) => (x - y).abs(),
        _ => unreachable!("mixed statistic kinds"),
    }
}

fn gaussian_kernel(d: f64) -> f64 {
    (-d * d / 2.0).exp()
}

/// Squared MMD between two statistic samples, biased estimator with
/// diagonal terms, clamped at zero against rounding.
pub fn mmd_from_stats(sa: &[Statistic], sb: &[Statistic]) -> f64 {
    let mean_kernel = |xs: &[Statistic], ys: &[Statistic]| {
        let mut sum = 0.0;
        for x in xs {
            for y in ys {
                sum += gaussian_kernel(stat_distance(x, y));
            }
        }
        sum / (xs.len() * ys.len()) as f64
    };
    let v = mean_kernel(sa, sa) + mean_kernel(sb, sb) - 2.0 * mean_kernel(sa, sb);
    v.max(0.0)
}

pub fn mmd(kind: MetricKind, set_a: &[Graph], set_b: &[Graph]) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::InvalidGraph("MMD needs nonempty graph sets".into()));
    }
    let sa: Vec<Statistic> =
        set_a.par_iter().map(|g| graph_statistic(kind, g)).collect::<Result<_>>()?;
    let sb: Vec<Statistic> =
        set_b.par_iter().map(|g| graph_statistic(kind, g)).collect::<Result<_>>()?;
    Ok(mmd_from_stats(&sa, &sb))
}

/// MMD for every kind in `ALL_KINDS`, computing per-graph statistics once.
pub fn mmd_battery(set_a: &[Graph], set_b: &[Graph]) -> Result<Vec<f64>> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::InvalidGraph("MMD needs nonempty graph sets".into()));
    }
    let sa: Vec<Vec<Statistic>> =
        set_a.par_iter().map(all_statistics).collect::<Result<_>>()?;
    let sb: Vec<Vec<Statistic>> =
        set_b.par_iter().map(all_statistics).collect::<Result<_>>()?;
    Ok((0..ALL_KINDS.len())
        .map(|k| {
            let a: Vec<Statistic> = sa.iter().map(|s| s[k].clone()).collect();
            let b: Vec<Statistic> = sb.iter().map(|s| s[k].clone()).collect();
            mmd_from_stats(&a, &b)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vun {
    pub valid: f64,
    pub unique: f64,
    pub novel: f64,
    pub combined: f64,
}

/// Unlabeled, unweighted view used for sample comparison.
fn structure_of(g: &Graph) -> Graph {
    Graph::new(g.support().weights().clone(), None).expect("support stays valid")
}

/// Validity, uniqueness (no isomorphic earlier sample), novelty (no
/// isomorphic training graph), and their conjunction, as percentages.
/// Hash equality only nominates candidates; isomorphism is confirmed
/// exactly.
pub fn vun(
    samples: &[Graph],
    train: &[Graph],
    validity: fn(&Graph) -> bool,
) -> Result<Vun> {
    if samples.is_empty() {
        return Err(Error::InvalidGraph("V.U.N. needs at least one sample".into()));
    }
    let structs: Vec<Graph> = samples.iter().map(structure_of).collect();
    let hashes: Vec<u64> = structs.iter().map(canonical_hash).collect();
    let train_structs: Vec<Graph> = train.iter().map(structure_of).collect();
    let train_hashes: Vec<u64> = train_structs.iter().map(canonical_hash).collect();

    let mut valid_flags = vec![false; samples.len()];
    let mut unique_flags = vec![true; samples.len()];
    let mut novel_flags = vec![true; samples.len()];
    for i in 0..samples.len() {
        valid_flags[i] = validity(&samples[i]);
        for j in 0..i {
            if hashes[i] == hashes[j] && are_isomorphic(&structs[i], &structs[j]) {
                unique_flags[i] = false;
                break;
            }
        }
        for (t, tg) in train_structs.iter().enumerate() {
            if hashes[i] == train_hashes[t] && are_isomorphic(&structs[i], tg) {
                novel_flags[i] = false;
                break;
            }
        }
    }
    let pct = |flags: &[bool]| {
        100.0 * flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
    };
    let combined: Vec<bool> = (0..samples.len())
        .map(|i| valid_flags[i] && unique_flags[i] && novel_flags[i])
        .collect();
    Ok(Vun {
        valid: pct(&valid_flags),
        unique: pct(&unique_flags),
        novel: pct(&novel_flags),
        combined: pct(&combined),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub local: f64,
    pub global: f64,
    pub avg: f64,
    /// Kinds left out because the reference MMD is zero.
    pub excluded: Vec<MetricKind>,
}

/// Per-metric MMD ratios against a reference battery, averaged by group.
/// Inputs align with `ALL_KINDS`.
pub fn ratio_summary(sample_mmds: &[f64], reference_mmds: &[f64]) -> Result<RatioSummary> {
    if sample_mmds.len() != ALL_KINDS.len() || reference_mmds.len() != ALL_KINDS.len() {
        return Err(Error::InvalidGraph(format!(
            "ratio summary expects {} values per battery",
            ALL_KINDS.len()
        )));
    }
    let mut excluded = Vec::new();
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    let mut avg_sum = 0.0;
    let mut avg_count = 0usize;
    for (k, kind) in ALL_KINDS.iter().enumerate() {
        if reference_mmds[k] == 0.0 {
            excluded.push(*kind);
            continue;
        }
        let ratio = sample_mmds[k] / reference_mmds[k];
        let gi = match kind_group(*kind) {
            MetricGroup::Local => 0,
            MetricGroup::Global => 1,
            MetricGroup::CrossScale => 2,
        };
        sums[gi] += ratio;
        counts[gi] += 1;
        avg_sum += ratio;
        avg_count += 1;
    }
    if avg_count == 0 {
        return Err(Error::InvalidGraph("every reference MMD is zero".into()));
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    Ok(RatioSummary {
        local: mean(sums[0], counts[0]),
        global: mean(sums[1], counts[1]),
        avg: avg_sum / avg_count as f64,
        excluded,
    })
}

/// Two MMD batteries: latent samples against the coarsened reference and
/// decoded samples against the fine reference.
pub fn table4_protocol(
    latent_samples: &[Graph],
    decoded_samples: &[Graph],
    coarse_reference: &[Graph],
    fine_reference: &[Graph],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let latent = mmd_battery(latent_samples, coarse_reference)?;
    let decoded = mmd_battery(decoded_samples, fine_reference)?;
    Ok((latent, decoded))
}
