use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("eigensolver did not converge: off-diagonal residual {residual:.3e} after {sweeps} sweeps")]
    EigNonConvergence { residual: f64, sweeps: usize },

    #[error("coarsening failed: {0}")]
    Coarsen(String),

    #[error("diffusion: {0}")]
    Diffusion(String),

    #[error("expansion: {0}")]
    Expansion(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
