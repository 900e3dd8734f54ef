//! Hybrid graph generation at desk scale.
//!
//! The pipeline factors graph generation into three stages: a randomized
//! edge-contraction coarsener that preserves the low end of the Laplacian
//! spectrum, a discrete denoising diffusion model over the resulting small
//! latent graphs, and a one-shot expansion network that lifts a sampled
//! latent graph back to full resolution. Everything runs on the CPU with
//! deterministic seeding so that artifacts are byte-reproducible.

pub mod coarsen;
pub mod config;
pub mod datasets;
pub mod delaunay;
pub mod diffusion;
pub mod eig;
pub mod expansion;
pub mod flops;
pub mod graph;
pub mod io;
pub mod iso;
pub mod metrics;
pub mod mpn;
pub mod pipeline;
pub mod planarity;
pub mod rng;
pub mod tensor;

mod error;

pub use error::{Error, Result};
pub use graph::Graph;
