use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("axis pair ({axis_a}, {axis_b}) has mismatched extents {extent_a} != {extent_b}")]
    DimensionMismatch {
        axis_a: usize,
        axis_b: usize,
        extent_a: usize,
        extent_b: usize,
    },

    #[error("invalid tensor shape: {0}")]
    Shape(String),

    #[error("SVD failed to converge on a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("cannot decompose an empty matrix")]
    EmptyMatrix,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("bond {bond} out of range for a chain with {n_bonds} bonds")]
    InvalidBond { bond: usize, n_bonds: usize },

    #[error("site {site} out of range for a chain of {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },

    #[error("jump threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("no jump channel has positive weight")]
    NoJumpChannel,

    #[error("state norm {0:e} vanished after a local operation")]
    VanishingNorm(f64),

    #[error(
        "transfer operator has no isolated dominant eigenvalue (residual {residual:e} after \
         {iterations} iterations); try a smaller time step"
    )]
    DegenerateTransfer { residual: f64, iterations: usize },

    #[error("trace drifted by {drift:e} at t = {time}")]
    TraceDrift { drift: f64, time: f64 },

    #[error("dense reference limited to {max} sites, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("ensemble inputs are inconsistent: {0}")]
    Ensemble(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
