use thiserror::Error;

/// Errors surfaced by the fitting library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("optimization diverged at iteration {iter} (loss = {loss})")]
    Diverged { iter: usize, loss: f64 },
}
