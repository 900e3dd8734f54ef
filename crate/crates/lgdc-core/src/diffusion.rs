//! Discrete denoising diffusion over categorical node and edge states.
//!
//! The forward process multiplies per-step transition matrices
//! Q_step[t] = a_t I + (1 - a_t) 1 m^T (a_t from a cosine schedule, m the
//! target marginal), so cumulative transitions stay in the same family.
//! Cumulative matrices are built by explicit products; tests compare them
//! against the closed form. Sampling runs the exact categorical posterior
//! q(s_{t-1} | s_0, s_t) mixed over the denoiser's s_0 prediction.

use ndarray::{Array2, Array3};
use rand::Rng as _;

use crate::mpn::{DenoiserOutput, LogitGrads, Mpn, MpnInput};
use crate::rng::Rng;
use crate::tensor::TensorStore;
use crate::{Error, Graph, Result};

const SCHEDULE_OFFSET: f64 = 0.008;
const ALPHA_BAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Uniform,
    Marginal,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Marginal => "marginal",
        }
    }

    pub fn parse(s: &str) -> Result<NoiseKind> {
        match s {
            "uniform" => Ok(NoiseKind::Uniform),
            "marginal" => Ok(NoiseKind::Marginal),
            other => Err(Error::Config(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// Precomputed schedule and transition matrices for one category space
/// pair (nodes and edges).
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    pub steps: usize,
    /// alpha_bar[t] for t in 0..=T; alpha_bar[0] = 1.
    pub alpha_bar: Vec<f64>,
    pub q_x_step: Vec<Array2<f64>>,
    pub q_e_step: Vec<Array2<f64>>,
    pub q_x_cum: Vec<Array2<f64>>,
    pub q_e_cum: Vec<Array2<f64>>,
    pub m_x: Vec<f64>,
    pub m_e: Vec<f64>,
}

/// Cosine schedule normalized so alpha_bar[0] = 1.
pub fn cosine_alpha_bar(steps: usize) -> Vec<f64> {
    let f = |t: f64| {
        let arg = (t / steps as f64 + SCHEDULE_OFFSET) / (1.0 + SCHEDULE_OFFSET);
        (std::f64::consts::FRAC_PI_2 * arg).cos().powi(2)
    };
    let f0 = f(0.0);
    (0..=steps)
        .map(|t| (f(t as f64) / f0).clamp(ALPHA_BAR_FLOOR, 1.0))
        .collect()
}

pub fn uniform_marginal(cats: usize) -> Vec<f64> {
    vec![1.0 / cats as f64; cats]
}

fn validate_marginal(m: &[f64]) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::Diffusion("empty marginal".into()));
    }
    let sum: f64 = m.iter().sum();
    if !(sum.is_finite() && (sum - 1.0).abs() < 1e-6) {
        return Err(Error::Diffusion(format!("marginal sums to {sum}")));
    }
    if m.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Diffusion("marginal entries must be positive".into()));
    }
    Ok(m.iter().map(|&p| p / sum).collect())
}

fn step_matrix(alpha: f64, m: &[f64]) -> Array2<f64> {
    let k = m.len();
    let mut q = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            q[[i, j]] = (1.0 - alpha) * m[j] + if i == j { alpha } else { 0.0 };
        }
    }
    q
}

/// Builds schedule and transition matrices. Marginals must be strictly
/// positive; smooth empirical counts before calling.
pub fn build_noise(steps: usize, m_x: &[f64], m_e: &[f64]) -> Result<NoiseProcess> {
    if steps == 0 {
        return Err(Error::Diffusion("diffusion needs at least one step".into()));
    }
    let m_x = validate_marginal(m_x)?;
    let m_e = validate_marginal(m_e)?;
    let alpha_bar = cosine_alpha_bar(steps);

    let build = |m: &[f64]| -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let k = m.len();
        let mut q_step = vec![Array2::eye(k)];
        let mut q_cum = vec![Array2::eye(k)];
        for t in 1..=steps {
            let a_t = alpha_bar[t] / alpha_bar[t - 1];
            let step = step_matrix(a_t, m);
            q_cum.push(q_cum[t - 1].dot(&step));
            q_step.push(step);
        }
        (q_step, q_cum)
    };
    let (q_x_step, q_x_cum) = build(&m_x);
    let (q_e_step, q_e_cum) = build(&m_e);

    Ok(NoiseProcess { steps, alpha_bar, q_x_step, q_e_step, q_x_cum, q_e_cum, m_x, m_e })
}

/// Categorical latent graph at diffusion time `t`. `e` is symmetric with
/// zero (no-edge) diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentState {
    pub t: usize,
    pub x: Vec<usize>,
    pub e: Array2<usize>,
}

impl LatentState {
    pub fn new(t: usize, x: Vec<usize>, e: Array2<usize>) -> Result<LatentState> {
        let n = x.len();
        if e.dim() != (n, n) {
            return Err(Error::Diffusion("edge matrix shape mismatch".into()));
        }
        for i in 0..n {
            if e[[i, i]] != 0 {
                return Err(Error::Diffusion("diagonal edge state must be 0".into()));
            }
            for j in 0..n {
                if e[[i, j]] != e[[j, i]] {
                    return Err(Error::Diffusion("edge states must be symmetric".into()));
                }
            }
        }
        Ok(LatentState { t, x, e })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

fn sample_cat(probs: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return k;
        }
    }
    // Floating-point sliver: fall back to the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draws q(s_t | s_0) for every node and pair.
pub fn forward_sample(
    noise: &NoiseProcess,
    x0: &[usize],
    e0: &Array2<usize>,
    t: usize,
    rng: &mut Rng,
) -> Result<LatentState> {
    if t > noise.steps {
        return Err(Error::Diffusion(format!("t={t} beyond {} steps", noise.steps)));
    }
    let n = x0.len();
    let qx = &noise.q_x_cum[t];
    let qe = &noise.q_e_cum[t];
    let x: Vec<usize> = x0
        .iter()
        .map(|&c| sample_cat(qx.row(c).as_slice().expect("contiguous"), rng))
        .collect();
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sample_cat(qe.row(e0[[i, j]]).as_slice().expect("contiguous"), rng);
            e[[i, j]] = c;
            e[[j, i]] = c;
        }
    }
    LatentState::new(t, x, e)
}

/// Posterior q(s_{t-1} = k | s_0, s_t) mixed over a predicted s_0
/// distribution:
///
///   post[k] = sum_x0 p(x0) Q_step[t][k][xt] Q_cum[t-1][x0][k]
///                          / Q_cum[t][x0][xt]
pub fn reverse_posterior(
    q_step_t: &Array2<f64>,
    q_cum_prev: &Array2<f64>,
    q_cum_t: &Array2<f64>,
    x0_prob: &[f64],
    xt: usize,
) -> Vec<f64> {
    let k_cats = q_step_t.dim().0;
    let mut post = vec![0.0; k_cats];
    for (x0, &w) in x0_prob.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let den = q_cum_t[[x0, xt]].max(1e-300);
        for (k, p) in post.iter_mut().enumerate() {
            *p += w * q_step_t[[k, xt]] * q_cum_prev[[x0, k]] / den;
        }
    }
    post
}

/// Anything that predicts clean node and edge distributions from a noisy
/// latent state.
pub trait Denoiser {
    fn denoise(&self, x: &[usize], e: &Array2<usize>, t_frac: f64) -> Result<DenoiserOutput>;
}

impl Denoiser for Mpn {
    fn denoise(&self, x: &[usize], e: &Array2<usize>, t_frac: f64) -> Result<DenoiserOutput> {
        let input = MpnInput { node_cats: x, edge_cats: e, node_scalars: None, t_frac };
        Ok(self.forward(&input)?.0)
    }
}

/// Ancestral sampling from the prior down to t = 0. Adds n^2 work slots
/// per reverse step to `slots`, the denoiser-evaluation count that the
/// complexity model charges for one latent step.
pub fn sample_latent_counted(
    net: &dyn Denoiser,
    noise: &NoiseProcess,
    n: usize,
    rng: &mut Rng,
    slots: &mut u128,
) -> Result<LatentState> {
    if n == 0 {
        return Err(Error::Diffusion("cannot sample an empty latent graph".into()));
    }
    let t_total = noise.steps;
    let mut x: Vec<usize> = (0..n).map(|_| sample_cat(&noise.m_x, rng)).collect();
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sample_cat(&noise.m_e, rng);
            e[[i, j]] = c;
            e[[j, i]] = c;
        }
    }

    for t in (1..=t_total).rev() {
        let out = net.denoise(&x, &e, t as f64 / t_total as f64)?;
        *slots += (n as u128) * (n as u128);

        let mut x_new = vec![0usize; n];
        for i in 0..n {
            let post = reverse_posterior(
                &noise.q_x_step[t],
                &noise.q_x_cum[t - 1],
                &noise.q_x_cum[t],
                out.node_probs.row(i).as_slice().expect("contiguous"),
                x[i],
            );
            x_new[i] = sample_cat(&post, rng);
        }
        let mut e_new = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let x0_prob: Vec<f64> =
                    (0..noise.m_e.len()).map(|o| out.edge_probs[[i, j, o]]).collect();
                let post = reverse_posterior(
                    &noise.q_e_step[t],
                    &noise.q_e_cum[t - 1],
                    &noise.q_e_cum[t],
                    &x0_prob,
                    e[[i, j]],
                );
                let c = sample_cat(&post, rng);
                e_new[[i, j]] = c;
                e_new[[j, i]] = c;
            }
        }
        x = x_new;
        e = e_new;
    }
    LatentState::new(0, x, e)
}

pub fn sample_latent(
    net: &dyn Denoiser,
    noise: &NoiseProcess,
    n: usize,
    rng: &mut Rng,
) -> Result<LatentState> {
    let mut slots = 0u128;
    sample_latent_counted(net, noise, n, rng, &mut slots)
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub loss: f64,
    pub node_ce: f64,
    pub edge_ce: f64,
}

/// Cross-entropy of the denoiser output against the clean state, plus the
/// matching logit gradients: mean over nodes + lambda_e * mean over pairs.
pub fn denoise_loss_at(
    out: &DenoiserOutput,
    x0: &[usize],
    e0: &Array2<usize>,
    lambda_e: f64,
) -> (LossParts, LogitGrads) {
    let n = x0.len();
    let edge_out = out.edge_probs.dim().2;
    let mut node_ce = 0.0;
    let mut node_grad = out.node_probs.clone();
    for i in 0..n {
        node_ce -= out.node_probs[[i, x0[i]]].max(1e-300).ln();
        node_grad[[i, x0[i]]] -= 1.0;
    }
    node_ce /= n as f64;
    node_grad.mapv_inplace(|g| g / n as f64);

    let pairs = n * (n - 1) / 2;
    let mut edge_ce = 0.0;
    let mut edge_grad = Array3::zeros((n, n, edge_out));
    if pairs > 0 {
        let scale = lambda_e / pairs as f64;
        for i in 0..n {
            for j in (i + 1)..n {
                edge_ce -= out.edge_probs[[i, j, e0[[i, j]]]].max(1e-300).ln();
                for o in 0..edge_out {
                    edge_grad[[i, j, o]] = out.edge_probs[[i, j, o]] * scale;
                }
                edge_grad[[i, j, e0[[i, j]]]] -= scale;
            }
        }
        edge_ce /= pairs as f64;
    }

    let parts = LossParts { loss: node_ce + lambda_e * edge_ce, node_ce, edge_ce };
    (parts, LogitGrads { node: node_grad, edge: edge_grad })
}

/// One training example: noise the clean latent graph to a random t,
/// denoise, and return loss plus parameter gradients.
pub fn diffusion_loss(
    net: &Mpn,
    noise: &NoiseProcess,
    x0: &[usize],
    e0: &Array2<usize>,
    lambda_e: f64,
    rng: &mut Rng,
) -> Result<(LossParts, TensorStore)> {
    let t = rng.random_range(1..=noise.steps);
    let noisy = forward_sample(noise, x0, e0, t, rng)?;
    let input = MpnInput {
        node_cats: &noisy.x,
        edge_cats: &noisy.e,
        node_scalars: None,
        t_frac: t as f64 / noise.steps as f64,
    };
    let (out, cache) = net.forward(&input)?;
    let (parts, lg) = denoise_loss_at(&out, x0, e0, lambda_e);
    let grads = net.backward(&input, &cache, &lg)?;
    Ok((parts, grads))
}

/// Edge categories of the latent representation: 0 = no edge, then three
/// merged-weight buckets.
pub const EDGE_BUCKETS: usize = 4;

/// Bucket index for a coarse edge weight; 0 is reserved for "no edge".
pub fn weight_bucket(w: f64) -> usize {
    if w <= 0.0 {
        0
    } else if w < 1.5 {
        1
    } else if w < 2.5 {
        2
    } else {
        3
    }
}

/// Latent representation of a labeled coarse graph: node categories are
/// the stored size classes, edge categories are weight buckets.
pub fn coarse_to_latent(g: &Graph) -> Result<(Vec<usize>, Array2<usize>)> {
    let labels = g
        .node_labels()
        .ok_or_else(|| Error::Diffusion("coarse graph has no size labels".into()))?;
    let n = g.n();
    let mut e = Array2::zeros((n, n));
    for (u, v, w) in g.edges() {
        let c = weight_bucket(w);
        e[[u, v]] = c;
        e[[v, u]] = c;
    }
    Ok((labels.to_vec(), e))
}

/// Inverse of `coarse_to_latent` up to weight bucketing: bucket c maps to
/// weight c, which buckets back to c.
pub fn latent_to_coarse(state: &LatentState) -> Result<Graph> {
    let n = state.n();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let c = state.e[[i, j]];
            if c > 0 {
                w[[i, j]] = c as f64;
                w[[j, i]] = c as f64;
            }
        }
    }
    Graph::new(w, Some(state.x.clone()))
}

/// Per-category frequencies over a latent dataset with Laplace smoothing,
/// so every category stays reachable by the noise process. Edge counts
/// include the no-edge category over all unordered pairs.
pub fn empirical_marginals(
    states: &[(Vec<usize>, Array2<usize>)],
    node_cats: usize,
    edge_cats: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut cx = vec![1.0f64; node_cats];
    let mut ce = vec![1.0f64; edge_cats];
    for (x, e) in states {
        for &c in x {
            cx[c] += 1.0;
        }
        let n = x.len();
        for i in 0..n {
            for j in (i + 1)..n {
                ce[e[[i, j]]] += 1.0;
            }
        }
    }
    let sx: f64 = cx.iter().sum();
    let se: f64 = ce.iter().sum();
    (cx.iter().map(|c| c / sx).collect(), ce.iter().map(|c| c / se).collect())
}
