use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dealias cutoff {cutoff:.3} leaves no retained modes on a {n_grid}^3 grid")]
    DealiasTooCoarse { n_grid: usize, cutoff: f64 },

    #[error("observed-mode cutoff N={n_obs} exceeds the grid Nyquist limit {nyquist}")]
    ObservationCutoff { n_obs: u32, nyquist: u32 },

    #[error("time step {dt:e} violates the advective CFL bound {bound:e} (max |u| = {umax:e})")]
    Cfl { dt: f64, bound: f64, umax: f64 },

    #[error("nudging guard violated: eta * dt = {product:.4} > 0.5")]
    NudgingGuard { product: f64 },

    #[error("solution blew up at t = {time:e}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error(
        "window [{start:e}, {end:e}] is not covered by the observation stream (last time {last:e})"
    )]
    WindowOutsideStream { start: f64, end: f64, last: f64 },

    #[error("time grids do not match: {0}")]
    TimeGridMismatch(String),

    #[error("degenerate window: delta = {delta:e} is below threshold {threshold:e}")]
    Degenerate { delta: f64, threshold: f64 },

    #[error("iteration {n}: updated beta^2 = {value:e} is not positive (outside the convergence regime)")]
    NonPositiveBeta { n: usize, value: f64 },

    #[error("iteration {n}: {source}")]
    Iteration {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fit needs at least {needed} usable values, got {got}")]
    FitTooShort { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(self, n: usize) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            e => Error::Iteration {
                n,
                source: Box::new(e),
            },
        }
    }
}
