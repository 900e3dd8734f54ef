//! Denoiser-evaluation cost model for the three sampling regimes.
//!
//! Counts are in units of n^2-slot work per diffusion step; width and
//! depth enter as one shared multiplier so the regimes stay comparable.
//! The autoregressive estimate grows the graph from 1 to n nodes in T
//! equal increments and runs full-graph work at each size:
//!
//!   S = sum_{t=0}^{T} (1 + t (n-1)/T)^2 = (T+1)/(6T) (6Tn + (2T+1)(n-1)^2)

use crate::{Error, Result};

/// One-shot diffusion on the full graph: T steps of n^2 work.
pub fn flops_oneshot(n: u64, t: u64) -> u128 {
    t as u128 * (n as u128) * (n as u128)
}

/// Latent-space pipeline: one coarsen/expand pass at n^2 plus T diffusion
/// steps at n_c^2.
pub fn flops_lgdc(n: u64, n_c: u64, t: u64) -> Result<u128> {
    if n_c > n {
        return Err(Error::Config(format!("latent size {n_c} exceeds graph size {n}")));
    }
    Ok((n as u128) * (n as u128) + t as u128 * (n_c as u128) * (n_c as u128))
}

/// Closed-form autoregressive cost. Exact for any (n, T); the step size
/// (n-1)/T enters as a real number when it is not integral.
pub fn flops_autoregressive(n: u64, t: u64) -> f64 {
    let n = n as f64;
    let t = t as f64;
    (t + 1.0) / (6.0 * t) * (6.0 * t * n + (2.0 * t + 1.0) * (n - 1.0) * (n - 1.0))
}

/// Numerator of the closed form after clearing 1/(6T):
/// 6T * S = (T+1)(6Tn + (2T+1)(n-1)^2), exact in integers.
pub fn autoregressive_numerator(n: u64, t: u64) -> u128 {
    let n = n as u128;
    let t = t as u128;
    (t + 1) * (6 * t * n + (2 * t + 1) * (n - 1) * (n - 1))
}

/// Shared width/depth multiplier applied uniformly to every estimator.
pub fn arch_multiplier(d: u64, l: u64) -> u128 {
    d as u128 * d as u128 * l as u128
}

/// Symbols of the cost comparison for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsModel {
    pub n: u64,
    pub n_c: u64,
    pub t: u64,
    pub d: u64,
    pub l: u64,
}

impl FlopsModel {
    pub fn new(n: u64, n_c: u64, t: u64, d: u64, l: u64) -> Result<FlopsModel> {
        if n == 0 || n_c == 0 || t == 0 || d == 0 || l == 0 {
            return Err(Error::Config("all cost-model symbols must be positive".into()));
        }
        if n_c > n {
            return Err(Error::Config(format!("latent size {n_c} exceeds graph size {n}")));
        }
        Ok(FlopsModel { n, n_c, t, d, l })
    }

    pub fn multiplier(&self) -> u128 {
        arch_multiplier(self.d, self.l)
    }

    pub fn oneshot(&self) -> u128 {
        flops_oneshot(self.n, self.t)
    }

    pub fn autoregressive(&self) -> f64 {
        flops_autoregressive(self.n, self.t)
    }

    pub fn lgdc(&self) -> u128 {
        flops_lgdc(self.n, self.n_c, self.t).expect("validated at construction")
    }

    /// Speedup of the latent pipeline over one-shot diffusion.
    pub fn speedup(&self) -> f64 {
        self.oneshot() as f64 / self.lgdc() as f64
    }
}
