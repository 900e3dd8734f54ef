//! One-shot expansion of a coarse graph back to full resolution.
//!
//! `expand` turns a coarse graph plus per-cluster size vector into a node
//! skeleton and a deterministic candidate edge list; `refine` keeps a
//! boolean-masked subset of the candidates. The candidate order is part of
//! the format (supervision masks index into it): intra-cluster blocks by
//! ascending cluster, then inter-cluster blocks by ascending coarse edge,
//! pairs in ascending lexicographic order within a block.

use ndarray::{Array2, Array3};
use rand::Rng as _;

use crate::diffusion::{coarse_to_latent, latent_to_coarse, weight_bucket, LatentState, EDGE_BUCKETS};
use crate::graph::Graph;
use crate::mpn::{DenoiserOutput, LogitGrads, Mpn, MpnConfig, MpnInput};
use crate::rng::Rng;
use crate::tensor::Adam;
use crate::{Error, Result};

/// Cluster sizes for each coarse node; every entry >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionVector(pub Vec<usize>);

impl ExpansionVector {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|&v| v == 0) {
            return Err(Error::Expansion("expansion sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Both endpoints expand the same coarse node.
    Intra { cluster: usize },
    /// Endpoints expand the two ends of a coarse edge.
    Inter { ci: usize, cj: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateEdgeSet {
    /// (u, v) with u < v in expanded-node indices.
    pub pairs: Vec<(usize, usize)>,
    pub provenance: Vec<Provenance>,
}

impl CandidateEdgeSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Expanded node layout: cluster c owns the contiguous index range
/// [offsets[c], offsets[c] + v[c]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub total: usize,
    pub v: Vec<usize>,
    pub offsets: Vec<usize>,
    pub cluster_of: Vec<usize>,
}

pub fn expand(coarse: &Graph, v: &ExpansionVector) -> Result<(Skeleton, CandidateEdgeSet)> {
    if v.0.len() != coarse.n() {
        return Err(Error::Expansion(format!(
            "expansion vector has {} entries for {} coarse nodes",
            v.0.len(),
            coarse.n()
        )));
    }
    v.validate()?;

    let n_c = coarse.n();
    let mut offsets = Vec::with_capacity(n_c);
    let mut total = 0usize;
    for &size in &v.0 {
        offsets.push(total);
        total += size;
    }
    let mut cluster_of = vec![0usize; total];
    for c in 0..n_c {
        for k in 0..v.0[c] {
            cluster_of[offsets[c] + k] = c;
        }
    }

    let mut pairs = Vec::new();
    let mut provenance = Vec::new();
    for c in 0..n_c {
        let base = offsets[c];
        for a in 0..v.0[c] {
            for b in (a + 1)..v.0[c] {
                pairs.push((base + a, base + b));
                provenance.push(Provenance::Intra { cluster: c });
            }
        }
    }
    for (ci, cj, _) in coarse.edges() {
        for a in 0..v.0[ci] {
            for b in 0..v.0[cj] {
                pairs.push((offsets[ci] + a, offsets[cj] + b));
                provenance.push(Provenance::Inter { ci, cj });
            }
        }
    }

    Ok((Skeleton { total, v: v.0.clone(), offsets, cluster_of }, CandidateEdgeSet {
        pairs,
        provenance,
    }))
}

/// Unit-weight graph over the expanded nodes keeping exactly the candidates
/// where the mask is true.
pub fn refine(skeleton: &Skeleton, cands: &CandidateEdgeSet, mask: &[bool]) -> Result<Graph> {
    if mask.len() != cands.len() {
        return Err(Error::Expansion(format!(
            "mask has {} entries for {} candidates",
            mask.len(),
            cands.len()
        )));
    }
    let kept: Vec<(usize, usize)> = cands
        .pairs
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(&p, _)| p)
        .collect();
    Graph::simple_from_edges(skeleton.total, &kept)
}

/// Edge-keeper input categories: 0 for non-candidate pairs, 1 for pairs
/// inside one cluster, 2..=4 for pairs across a coarse edge, bucketed by
/// that edge's weight.
pub const PROVENANCE_CATS: usize = 5;

fn provenance_cat(coarse: &Graph, p: Provenance) -> usize {
    match p {
        Provenance::Intra { .. } => 1,
        Provenance::Inter { ci, cj } => 1 + weight_bucket(coarse.weight(ci, cj)).max(1),
    }
}

/// Size predictor plus edge keeper. The size predictor reads the sampled
/// coarse latent state; the edge keeper reads the expanded skeleton with
/// per-node uniform scalars so symmetric candidates can be told apart.
#[derive(Debug, Clone)]
pub struct ExpanderNets {
    pub v_net: Mpn,
    pub e_net: Mpn,
    pub v_max: usize,
    /// Mean positive-class weight the edge keeper was trained with; decode
    /// inverts it so sampled keep rates match the unweighted conditionals.
    pub pos_weight: f64,
}

impl ExpanderNets {
    pub fn init(v_max: usize, hidden: usize, layers: usize, rng: &mut Rng) -> ExpanderNets {
        assert!(v_max >= 1);
        let v_cfg = MpnConfig {
            node_cats: v_max,
            edge_cats: EDGE_BUCKETS,
            hidden,
            layers,
            node_out: v_max,
            edge_out: 2,
            time_feats: 0,
            node_scalar: false,
        };
        let e_cfg = MpnConfig {
            node_cats: v_max,
            edge_cats: PROVENANCE_CATS,
            hidden,
            layers,
            node_out: 2,
            edge_out: 2,
            time_feats: 0,
            node_scalar: true,
        };
        ExpanderNets {
            v_net: Mpn::init(v_cfg, rng),
            e_net: Mpn::init(e_cfg, rng),
            v_max,
            pos_weight: 1.0,
        }
    }
}

/// Edge-keeper inputs for one skeleton: fine nodes carry their cluster's
/// size class, candidate pairs carry provenance categories.
pub fn e_net_input(
    coarse: &Graph,
    skeleton: &Skeleton,
    cands: &CandidateEdgeSet,
    v_max: usize,
) -> (Vec<usize>, Array2<usize>) {
    let n = skeleton.total;
    let node_cats: Vec<usize> = skeleton
        .cluster_of
        .iter()
        .map(|&c| (skeleton.v[c] - 1).min(v_max - 1))
        .collect();
    let mut edge_cats = Array2::zeros((n, n));
    for (k, &(a, b)) in cands.pairs.iter().enumerate() {
        let cat = provenance_cat(coarse, cands.provenance[k]);
        edge_cats[[a, b]] = cat;
        edge_cats[[b, a]] = cat;
    }
    (node_cats, edge_cats)
}

/// Cross-entropy of predicted size classes against true cluster sizes.
pub fn v_loss_at(
    out: &DenoiserOutput,
    v_star: &[usize],
    v_max: usize,
) -> Result<(f64, LogitGrads)> {
    let n = v_star.len();
    if let Some(&bad) = v_star.iter().find(|&&v| v == 0 || v > v_max) {
        return Err(Error::Expansion(format!("cluster size {bad} outside 1..={v_max}")));
    }
    let mut loss = 0.0;
    let mut node = out.node_probs.clone();
    for (i, &v) in v_star.iter().enumerate() {
        loss -= out.node_probs[[i, v - 1]].max(1e-300).ln();
        node[[i, v - 1]] -= 1.0;
    }
    loss /= n as f64;
    node.mapv_inplace(|g| g / n as f64);
    let edge = Array3::zeros((out.edge_probs.dim().0, out.edge_probs.dim().1, 2));
    Ok((loss, LogitGrads { node, edge }))
}

/// Class-weighted cross-entropy over candidate pairs. Kept edges get
/// weight |candidates| / (2 * positives) so both classes contribute half
/// the loss mass when predictions are uniform.
pub fn e_loss_at(
    out: &DenoiserOutput,
    cands: &CandidateEdgeSet,
    mask: &[bool],
) -> Result<(f64, LogitGrads)> {
    if mask.len() != cands.len() {
        return Err(Error::Expansion(format!(
            "mask has {} entries for {} candidates",
            mask.len(),
            cands.len()
        )));
    }
    let (n, _, edge_out) = out.edge_probs.dim();
    let total = cands.len();
    let positives = mask.iter().filter(|&&b| b).count();
    let w_pos = if positives == 0 { 1.0 } else { total as f64 / (2.0 * positives as f64) };
    let mut loss = 0.0;
    let mut edge = Array3::zeros((n, n, edge_out));
    for (k, &(a, b)) in cands.pairs.iter().enumerate() {
        let (y, w) = if mask[k] { (1, w_pos) } else { (0, 1.0) };
        loss -= w * out.edge_probs[[a, b, y]].max(1e-300).ln();
        let scale = w / total as f64;
        for o in 0..edge_out {
            edge[[a, b, o]] = out.edge_probs[[a, b, o]] * scale;
        }
        edge[[a, b, y]] -= scale;
    }
    loss /= total.max(1) as f64;
    let node = Array2::zeros((n, out.node_probs.dim().1));
    Ok((loss, LogitGrads { node, edge }))
}

/// Per-node cluster sizes sampled from the size head. Temperature 0 takes
/// the argmax; otherwise probabilities are sharpened in log space.
pub fn predict_v(
    nets: &ExpanderNets,
    x: &[usize],
    e: &Array2<usize>,
    temperature: f64,
    rng: &mut Rng,
) -> Result<ExpansionVector> {
    let input = MpnInput { node_cats: x, edge_cats: e, node_scalars: None, t_frac: 0.0 };
    let (out, _) = nets.v_net.forward(&input)?;
    let mut v = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let row: Vec<f64> = (0..nets.v_max).map(|k| out.node_probs[[i, k]]).collect();
        let cls = if temperature == 0.0 {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
                .expect("nonempty")
                .0
        } else {
            let logs: Vec<f64> = row.iter().map(|&p| p.max(1e-300).ln() / temperature).collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sharp: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
            sample_index(&sharp, rng)
        };
        v.push(cls + 1);
    }
    Ok(ExpansionVector(v))
}

fn sample_index(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Bernoulli keep decisions over the candidate set, with fresh uniform
/// symmetry-breaking scalars. Head outputs are optima of the class-weighted
/// training loss, q = w p / (w p + 1 - p); sampling inverts the weight so
/// keep rates follow the unweighted conditional p.
pub fn predict_e(
    nets: &ExpanderNets,
    coarse: &Graph,
    skeleton: &Skeleton,
    cands: &CandidateEdgeSet,
    rng: &mut Rng,
) -> Result<Vec<bool>> {
    let (node_cats, edge_cats) = e_net_input(coarse, skeleton, cands, nets.v_max);
    let scalars: Vec<f64> = (0..skeleton.total).map(|_| rng.random::<f64>()).collect();
    let input = MpnInput {
        node_cats: &node_cats,
        edge_cats: &edge_cats,
        node_scalars: Some(&scalars),
        t_frac: 0.0,
    };
    let (out, _) = nets.e_net.forward(&input)?;
    let w = nets.pos_weight;
    Ok(cands
        .pairs
        .iter()
        .map(|&(a, b)| {
            let q = out.edge_probs[[a, b, 1]];
            rng.random::<f64>() < q / (w * (1.0 - q) + q)
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeStats {
    pub n_fine: usize,
    pub candidates: usize,
    pub kept: usize,
    /// Candidate set much larger than a sparse graph of this size needs;
    /// decoding still proceeds, callers may want to log it.
    pub dense_warning: bool,
}

/// One-shot decode of a sampled latent state into a fine graph.
pub fn decode(
    nets: &ExpanderNets,
    state: &LatentState,
    temperature: f64,
    rng: &mut Rng,
) -> Result<(Graph, DecodeStats)> {
    let coarse = latent_to_coarse(state)?;
    let v = predict_v(nets, &state.x, &state.e, temperature, rng)?;
    let (skeleton, cands) = expand(&coarse, &v)?;
    let mask = predict_e(nets, &coarse, &skeleton, &cands, rng)?;
    let fine = refine(&skeleton, &cands, &mask)?;
    let kept = mask.iter().filter(|&&b| b).count();
    let stats = DecodeStats {
        n_fine: skeleton.total,
        candidates: cands.len(),
        kept,
        dense_warning: cands.len() > 12 * skeleton.total,
    };
    Ok((fine, stats))
}

/// One supervised example: a labeled coarse graph with the true sizes and
/// the true keep mask over its candidate edges.
#[derive(Debug, Clone)]
pub struct ExpanderExample {
    pub coarse: Graph,
    pub v_star: Vec<usize>,
    pub e_star: Vec<bool>,
}

/// Joint training loop; both nets take independent Adam steps on batches
/// drawn with replacement. Returns per-step (size loss, edge loss).
pub fn train_expander(
    nets: &mut ExpanderNets,
    examples: &[ExpanderExample],
    steps: usize,
    batch: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<Vec<(f64, f64)>> {
    if examples.is_empty() {
        return Err(Error::Expansion("no training examples".into()));
    }
    if batch == 0 {
        return Err(Error::Expansion("batch size must be positive".into()));
    }
    // Record the mean positive-class weight the edge loss will apply, so
    // decoding can invert it (see predict_e).
    nets.pos_weight = examples
        .iter()
        .map(|ex| {
            let positives = ex.e_star.iter().filter(|&&b| b).count();
            if positives == 0 { 1.0 } else { ex.e_star.len() as f64 / (2.0 * positives as f64) }
        })
        .sum::<f64>()
        / examples.len() as f64;
    let mut adam_v = Adam::new(&nets.v_net.params);
    let mut adam_e = Adam::new(&nets.e_net.params);
    let mut curve = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut gv = nets.v_net.params.zeros_like();
        let mut ge = nets.e_net.params.zeros_like();
        let mut lv_sum = 0.0;
        let mut le_sum = 0.0;
        for _ in 0..batch {
            let ex = &examples[rng.random_range(0..examples.len())];
            let (x, e) = coarse_to_latent(&ex.coarse)?;

            let v_input =
                MpnInput { node_cats: &x, edge_cats: &e, node_scalars: None, t_frac: 0.0 };
            let (v_out, v_cache) = nets.v_net.forward(&v_input)?;
            let (lv, v_lg) = v_loss_at(&v_out, &ex.v_star, nets.v_max)?;
            let g = nets.v_net.backward(&v_input, &v_cache, &v_lg)?;
            gv.add_scaled(&g, 1.0 / batch as f64);
            lv_sum += lv;

            let (skeleton, cands) = expand(&ex.coarse, &ExpansionVector(ex.v_star.clone()))?;
            let (node_cats, edge_cats) = e_net_input(&ex.coarse, &skeleton, &cands, nets.v_max);
            let scalars: Vec<f64> = (0..skeleton.total).map(|_| rng.random::<f64>()).collect();
            let e_input = MpnInput {
                node_cats: &node_cats,
                edge_cats: &edge_cats,
                node_scalars: Some(&scalars),
                t_frac: 0.0,
            };
            let (e_out, e_cache) = nets.e_net.forward(&e_input)?;
            let (le, e_lg) = e_loss_at(&e_out, &cands, &ex.e_star)?;
            let g = nets.e_net.backward(&e_input, &e_cache, &e_lg)?;
            ge.add_scaled(&g, 1.0 / batch as f64);
            le_sum += le;
        }
        adam_v.step(&mut nets.v_net.params, &gv, lr);
        adam_e.step(&mut nets.e_net.params, &ge, lr);
        curve.push((lv_sum / batch as f64, le_sum / batch as f64));
    }
    Ok(curve)
}
