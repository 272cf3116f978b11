//! 2D Gaussian-splatting image fitting with direction-aware adaptive
//! density control.
//!
//! The crate fits a set of anisotropic 2D Gaussians to a target raster by
//! Adam gradient descent, growing and shrinking the set with an adaptive
//! density controller. Besides the usual magnitude-based split criteria,
//! the controller can weight the criterion by the directional consistency
//! of the per-pixel positional gradients (their circular-mean
//! concentration), and can place split children at the cost-minimizing
//! position along the principal axis instead of randomly.
//!
//! Everything lives directly in raster pixel coordinates; there is no
//! camera, so a primitive's "projected center" is just its center `mu`.
//! Compositing is additive and the loss is per-pixel squared error, which
//! keeps the positional gradients exact and attributable pixel by pixel.

pub mod adc;
pub mod error;
pub mod gaussian;
pub mod grad;
pub mod metrics;
pub mod optim;
pub mod raster;
pub mod render;

pub use error::CoreError;
pub use gaussian::{
    footprint, footprint_with_cutoff, Footprint, Gaussian2D, GaussianSet, Vec2,
    INFLUENCE_CUTOFF_SIGMA,
};
pub use raster::Raster;
