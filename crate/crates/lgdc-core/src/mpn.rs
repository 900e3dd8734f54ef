//! Gated message-passing network over dense categorical graphs, with a
//! hand-written backward pass.
//!
//! One architecture serves three roles: the latent denoiser (node + edge
//! category heads, time conditioning), the size predictor and the edge
//! keeper of the expander (the latter with a per-node symmetry-breaking
//! scalar input). Layer l updates
//!
//!   m_i = mean_{j != i} sigma(Wg ee[e_ij]) * (Wm h_j)
//!   h_i <- h_i + tanh(Wu m_i)
//!
//! so everything is permutation-equivariant. Heads are zero-initialized:
//! an untrained net outputs exactly uniform distributions, which the
//! diffusion sampler's prior tests rely on.

use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::Rng;
use crate::tensor::{CkptMeta, Tensor, TensorStore};
use crate::{Error, Result};

pub const TIME_FEATURES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpnConfig {
    /// Input node categories (a).
    pub node_cats: usize,
    /// Input edge categories including "none" at index 0 (b).
    pub edge_cats: usize,
    /// Hidden width (d).
    pub hidden: usize,
    /// Message-passing rounds (L).
    pub layers: usize,
    /// Output classes of the node head.
    pub node_out: usize,
    /// Output classes of the edge head.
    pub edge_out: usize,
    /// Sinusoidal time features; 0 disables time conditioning.
    pub time_feats: usize,
    /// Extra scalar input per node (symmetry breaking for the edge keeper).
    pub node_scalar: bool,
}

#[derive(Debug, Clone)]
pub struct Mpn {
    pub cfg: MpnConfig,
    pub params: TensorStore,
}

/// One evaluation's inputs. `edge_cats` is symmetric; the diagonal is
/// ignored.
pub struct MpnInput<'a> {
    pub node_cats: &'a [usize],
    pub edge_cats: &'a Array2<usize>,
    pub node_scalars: Option<&'a [f64]>,
    /// t/T in [0, 1]; ignored when the net has no time features.
    pub t_frac: f64,
}

/// Row-stochastic outputs. `edge_probs` is symmetric in its first two
/// indices; diagonal slots hold a one-hot at category 0 and carry no
/// information.
#[derive(Debug, Clone)]
pub struct DenoiserOutput {
    pub node_probs: Array2<f64>,
    pub edge_probs: Array3<f64>,
}

/// Activations needed by the backward pass.
pub struct MpnCache {
    h: Vec<Array2<f64>>,
    msg: Vec<Array2<f64>>,
    m: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    gates: Vec<Array2<f64>>,
    s_time: Vec<f64>,
}

/// Loss gradients with respect to the pre-softmax logits. Only the upper
/// triangle (i < j) of `edge` is read.
pub struct LogitGrads {
    pub node: Array2<f64>,
    pub edge: Array3<f64>,
}

fn view2(t: &Tensor) -> ArrayView2<'_, f64> {
    let d = t.dims();
    debug_assert_eq!(d.len(), 2);
    ArrayView2::from_shape((d[0], d[1]), t.data()).expect("tensor shape matches data")
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn param_names(cfg: &MpnConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.hidden;
    let mut names = vec![
        ("node_emb".to_string(), vec![cfg.node_cats, d]),
        ("edge_emb".to_string(), vec![cfg.edge_cats, d]),
    ];
    if cfg.time_feats > 0 {
        names.push(("time_w".to_string(), vec![cfg.time_feats, d]));
    }
    if cfg.node_scalar {
        names.push(("sym_w".to_string(), vec![d]));
    }
    for l in 0..cfg.layers {
        names.push((format!("layer{l}_gate"), vec![d, d]));
        names.push((format!("layer{l}_msg"), vec![d, d]));
        names.push((format!("layer{l}_upd"), vec![d, d]));
    }
    names.push(("head_node".to_string(), vec![d, cfg.node_out]));
    // Blocks: rows 0..d read h_i, d..2d read h_j, 2d..3d read the pair's
    // own input edge embedding, so edge outputs can condition on the pair
    // category directly instead of only through node aggregates.
    names.push(("head_edge".to_string(), vec![3 * d, cfg.edge_out]));
    names
}

impl Mpn {
    pub fn init(cfg: MpnConfig, rng: &mut Rng) -> Mpn {
        assert!(cfg.node_cats > 0 && cfg.edge_cats > 0 && cfg.hidden > 0);
        assert!(cfg.node_out > 0 && cfg.edge_out > 0);
        let d = cfg.hidden as f64;
        let emb = Normal::new(0.0, 0.02).expect("valid normal");
        let lim = 1.0 / d.sqrt();
        let mut params = TensorStore::new();
        for (name, dims) in param_names(&cfg) {
            let numel: usize = dims.iter().product();
            let data: Vec<f64> = if name.starts_with("head_") {
                vec![0.0; numel]
            } else if name == "node_emb" || name == "edge_emb" {
                (0..numel).map(|_| emb.sample(rng)).collect()
            } else {
                (0..numel).map(|_| rng.random_range(-lim..lim)).collect()
            };
            params.insert(&name, Tensor::from_vec(&dims, data).expect("consistent dims"));
        }
        Mpn { cfg, params }
    }

    pub fn meta(&self) -> CkptMeta {
        CkptMeta {
            node_cats: self.cfg.node_cats,
            edge_cats: self.cfg.edge_cats,
            hidden: self.cfg.hidden,
            layers: self.cfg.layers,
        }
    }

    /// Rebuild from a checkpoint; head shapes and optional inputs are
    /// recovered from the stored tensors, everything is shape-checked.
    pub fn from_store(meta: &CkptMeta, params: TensorStore) -> Result<Mpn> {
        let head_node = params.expect("head_node")?;
        let head_edge = params.expect("head_edge")?;
        if head_node.dims().len() != 2 || head_edge.dims().len() != 2 {
            return Err(Error::Checkpoint("heads must be rank 2".into()));
        }
        let cfg = MpnConfig {
            node_cats: meta.node_cats,
            edge_cats: meta.edge_cats,
            hidden: meta.hidden,
            layers: meta.layers,
            node_out: head_node.dims()[1],
            edge_out: head_edge.dims()[1],
            time_feats: params.get("time_w").map(|t| t.dims()[0]).unwrap_or(0),
            node_scalar: params.get("sym_w").is_some(),
        };
        let expected = param_names(&cfg);
        if params.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "{} tensors, expected {}",
                params.len(),
                expected.len()
            )));
        }
        for (name, dims) in &expected {
            let t = params.expect(name)?;
            if t.dims() != dims.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?} has shape {:?}, expected {dims:?}",
                    t.dims()
                )));
            }
        }
        Ok(Mpn { cfg, params })
    }

    fn validate_input(&self, input: &MpnInput) -> Result<usize> {
        let n = input.node_cats.len();
        if input.edge_cats.dim() != (n, n) {
            return Err(Error::Diffusion(format!(
                "edge category matrix is {:?} for {n} nodes",
                input.edge_cats.dim()
            )));
        }
        if let Some(&bad) = input.node_cats.iter().find(|&&c| c >= self.cfg.node_cats) {
            return Err(Error::Diffusion(format!(
                "node category {bad} out of range {}",
                self.cfg.node_cats
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let c = input.edge_cats[[i, j]];
                if c >= self.cfg.edge_cats {
                    return Err(Error::Diffusion(format!(
                        "edge category {c} out of range {}",
                        self.cfg.edge_cats
                    )));
                }
                if input.edge_cats[[i, j]] != input.edge_cats[[j, i]] {
                    return Err(Error::Diffusion(format!(
                        "edge categories asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        match (self.cfg.node_scalar, input.node_scalars) {
            (true, Some(u)) if u.len() == n => {}
            (true, _) => {
                return Err(Error::Diffusion("missing per-node scalars".into()));
            }
            (false, Some(_)) => {
                return Err(Error::Diffusion("unexpected per-node scalars".into()));
            }
            (false, None) => {}
        }
        Ok(n)
    }

    fn time_features(&self, t_frac: f64) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.cfg.time_feats);
        for k in 0..self.cfg.time_feats / 2 {
            let omega = std::f64::consts::PI * (1 << k) as f64;
            s.push((omega * t_frac).sin());
            s.push((omega * t_frac).cos());
        }
        s.resize(self.cfg.time_feats, 0.0);
        s
    }

    pub fn forward(&self, input: &MpnInput) -> Result<(DenoiserOutput, MpnCache)> {
        let n = self.validate_input(input)?;
        let d = self.cfg.hidden;
        let cfg = &self.cfg;

        let node_emb = view2(self.params.expect("node_emb")?);
        let edge_emb = view2(self.params.expect("edge_emb")?);

        let s_time = self.time_features(input.t_frac);
        let mut h = Array2::zeros((n, d));
        for i in 0..n {
            let row = node_emb.row(input.node_cats[i]);
            for k in 0..d {
                h[[i, k]] = row[k];
            }
        }
        if cfg.time_feats > 0 {
            let tw = view2(self.params.expect("time_w")?);
            for i in 0..n {
                for (f, &sf) in s_time.iter().enumerate() {
                    for k in 0..d {
                        h[[i, k]] += sf * tw[[f, k]];
                    }
                }
            }
        }
        if cfg.node_scalar {
            let sym = self.params.expect("sym_w")?;
            let u = input.node_scalars.expect("validated");
            for i in 0..n {
                for k in 0..d {
                    h[[i, k]] += u[i] * sym.data()[k];
                }
            }
        }

        let norm = 1.0 / (n.max(2) - 1) as f64;
        let mut cache = MpnCache {
            h: vec![h.clone()],
            msg: Vec::new(),
            m: Vec::new(),
            act: Vec::new(),
            gates: Vec::new(),
            s_time,
        };

        for l in 0..cfg.layers {
            let wg = view2(self.params.expect(&format!("layer{l}_gate"))?);
            let wm = view2(self.params.expect(&format!("layer{l}_msg"))?);
            let wu = view2(self.params.expect(&format!("layer{l}_upd"))?);

            let mut gates = edge_emb.dot(&wg.t());
            gates.mapv_inplace(|x| 1.0 / (1.0 + (-x).exp()));
            let msg = h.dot(&wm.t());

            let mut m = Array2::zeros((n, d));
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let c = input.edge_cats[[i, j]];
                    for k in 0..d {
                        m[[i, k]] += gates[[c, k]] * msg[[j, k]];
                    }
                }
            }
            m.mapv_inplace(|x| x * norm);

            let act = m.dot(&wu.t()).mapv(f64::tanh);
            h = &h + &act;

            cache.msg.push(msg);
            cache.m.push(m);
            cache.act.push(act);
            cache.gates.push(gates);
            cache.h.push(h.clone());
        }

        let head_node = view2(self.params.expect("head_node")?);
        let mut node_probs = h.dot(&head_node);
        softmax_rows(&mut node_probs);

        let head_edge = self.params.expect("head_edge")?;
        let he = view2(head_edge);
        // z_ij = (f(h_i,h_j,p_ij) + f(h_j,h_i,p_ij)) / 2 with f reading
        // [x; y; p] rows and p_ij the pair's input edge embedding; the
        // symmetrization collapses the node part to
        // (h_i + h_j) . (top + bot) / 2.
        let he_eff = {
            let mut eff = Array2::zeros((d, cfg.edge_out));
            for k in 0..d {
                for o in 0..cfg.edge_out {
                    eff[[k, o]] = he[[k, o]] + he[[d + k, o]];
                }
            }
            eff
        };
        let s_edge = h.dot(&he_eff);
        let pair_scores = {
            let pair_rows = he.slice(ndarray::s![2 * d..3 * d, ..]);
            edge_emb.dot(&pair_rows)
        };
        let mut edge_probs = Array3::zeros((n, n, cfg.edge_out));
        for i in 0..n {
            edge_probs[[i, i, 0]] = 1.0;
            for j in (i + 1)..n {
                let c = input.edge_cats[[i, j]];
                let mut z: Vec<f64> = (0..cfg.edge_out)
                    .map(|o| 0.5 * (s_edge[[i, o]] + s_edge[[j, o]]) + pair_scores[[c, o]])
                    .collect();
                let max = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut sum = 0.0;
                for v in &mut z {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for (o, v) in z.iter().enumerate() {
                    let p = v / sum;
                    edge_probs[[i, j, o]] = p;
                    edge_probs[[j, i, o]] = p;
                }
            }
        }

        Ok((DenoiserOutput { node_probs, edge_probs }, cache))
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// the loss gradients at the output logits.
    pub fn backward(
        &self,
        input: &MpnInput,
        cache: &MpnCache,
        lg: &LogitGrads,
    ) -> Result<TensorStore> {
        let n = self.validate_input(input)?;
        let d = self.cfg.hidden;
        let cfg = &self.cfg;
        if lg.node.dim() != (n, cfg.node_out) || lg.edge.dim() != (n, n, cfg.edge_out) {
            return Err(Error::Diffusion("logit gradient shape mismatch".into()));
        }

        let mut grads = self.params.zeros_like();
        let h_last = &cache.h[cfg.layers];

        // Node head: z = h . head_node.
        let head_node = view2(self.params.expect("head_node")?);
        let mut dh = lg.node.dot(&head_node.t());
        {
            let g = grads.get_mut("head_node").expect("exists");
            let dhn = h_last.t().dot(&lg.node);
            g.data_mut().copy_from_slice(dhn.as_slice().expect("contiguous"));
        }

        // Edge head: z_ij = (S_i + S_j) / 2 + P[e_ij] with
        // S = h . (top + bot) and P = edge_emb . pair_rows.
        let he = view2(self.params.expect("head_edge")?);
        let edge_emb = view2(self.params.expect("edge_emb")?);
        let mut he_eff = Array2::zeros((d, cfg.edge_out));
        for k in 0..d {
            for o in 0..cfg.edge_out {
                he_eff[[k, o]] = he[[k, o]] + he[[d + k, o]];
            }
        }
        let mut ds = Array2::zeros((n, cfg.edge_out));
        let mut dp = Array2::zeros((cfg.edge_cats, cfg.edge_out));
        for i in 0..n {
            for j in (i + 1)..n {
                let c = input.edge_cats[[i, j]];
                for o in 0..cfg.edge_out {
                    let g = lg.edge[[i, j, o]];
                    ds[[i, o]] += 0.5 * g;
                    ds[[j, o]] += 0.5 * g;
                    dp[[c, o]] += g;
                }
            }
        }
        dh = &dh + &ds.dot(&he_eff.t());
        {
            let dhe_eff = h_last.t().dot(&ds);
            let dhe_pair = edge_emb.t().dot(&dp);
            let g = grads.get_mut("head_edge").expect("exists");
            let gd = g.data_mut();
            for k in 0..d {
                for o in 0..cfg.edge_out {
                    // Top and bottom blocks receive identical gradients.
                    gd[k * cfg.edge_out + o] = dhe_eff[[k, o]];
                    gd[(d + k) * cfg.edge_out + o] = dhe_eff[[k, o]];
                    gd[(2 * d + k) * cfg.edge_out + o] = dhe_pair[[k, o]];
                }
            }
        }

        let norm = 1.0 / (n.max(2) - 1) as f64;
        // Head pair block feeds the edge embeddings directly; gate paths
        // accumulate on top inside the layer loop.
        let pair_rows = he.slice(ndarray::s![2 * d..3 * d, ..]);
        let mut dee_total = dp.dot(&pair_rows.t());

        for l in (0..cfg.layers).rev() {
            let wm = view2(self.params.expect(&format!("layer{l}_msg"))?);
            let wu = view2(self.params.expect(&format!("layer{l}_upd"))?);
            let wg = view2(self.params.expect(&format!("layer{l}_gate"))?);
            let act = &cache.act[l];
            let m = &cache.m[l];
            let msg = &cache.msg[l];
            let gates = &cache.gates[l];
            let h_l = &cache.h[l];

            // h_{l+1} = h_l + tanh(U), U = M Wu^T.
            let mut da = dh.clone();
            for i in 0..n {
                for k in 0..d {
                    da[[i, k]] *= 1.0 - act[[i, k]] * act[[i, k]];
                }
            }
            {
                let dwu = da.t().dot(m);
                let g = grads.get_mut(&format!("layer{l}_upd")).expect("exists");
                g.data_mut().copy_from_slice(dwu.as_slice().expect("contiguous"));
            }
            let dm = da.dot(&wu);

            // M_i = norm * sum_{j != i} G[e_ij] * MSG_j.
            let mut dmsg = Array2::zeros((n, d));
            let mut dg = Array2::zeros((cfg.edge_cats, d));
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let c = input.edge_cats[[i, j]];
                    for k in 0..d {
                        let dmk = norm * dm[[i, k]];
                        dmsg[[j, k]] += gates[[c, k]] * dmk;
                        dg[[c, k]] += msg[[j, k]] * dmk;
                    }
                }
            }

            // MSG = H_l Wm^T.
            {
                let dwm = dmsg.t().dot(h_l);
                let g = grads.get_mut(&format!("layer{l}_msg")).expect("exists");
                g.data_mut().copy_from_slice(dwm.as_slice().expect("contiguous"));
            }
            dh = &dh + &dmsg.dot(&wm);

            // G = sigmoid(EE Wg^T).
            let mut dgp = dg;
            for c in 0..cfg.edge_cats {
                for k in 0..d {
                    let s = gates[[c, k]];
                    dgp[[c, k]] *= s * (1.0 - s);
                }
            }
            {
                let dwg = dgp.t().dot(&edge_emb);
                let g = grads.get_mut(&format!("layer{l}_gate")).expect("exists");
                g.data_mut().copy_from_slice(dwg.as_slice().expect("contiguous"));
            }
            dee_total = &dee_total + &dgp.dot(&wg);
        }

        // Input embeddings: dh now holds dL/dh_0.
        {
            let g = grads.get_mut("node_emb").expect("exists");
            let cols = d;
            for i in 0..n {
                let row = &mut g.data_mut()
                    [input.node_cats[i] * cols..(input.node_cats[i] + 1) * cols];
                for k in 0..d {
                    row[k] += dh[[i, k]];
                }
            }
        }
        if cfg.time_feats > 0 {
            let col_sum: Vec<f64> = (0..d).map(|k| (0..n).map(|i| dh[[i, k]]).sum()).collect();
            let g = grads.get_mut("time_w").expect("exists");
            let gd = g.data_mut();
            for (f, &sf) in cache.s_time.iter().enumerate() {
                for k in 0..d {
                    gd[f * d + k] = sf * col_sum[k];
                }
            }
        }
        if cfg.node_scalar {
            let u = input.node_scalars.expect("validated");
            let g = grads.get_mut("sym_w").expect("exists");
            let gd = g.data_mut();
            for i in 0..n {
                for k in 0..d {
                    gd[k] += u[i] * dh[[i, k]];
                }
            }
        }
        {
            let g = grads.get_mut("edge_emb").expect("exists");
            g.data_mut().copy_from_slice(dee_total.as_slice().expect("contiguous"));
        }

        Ok(grads)
    }
}
