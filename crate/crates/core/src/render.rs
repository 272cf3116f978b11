//! Forward rendering (additive compositing) and the squared-error loss.
//!
//! Compositing is additive: there is no depth ordering in 2D, and
//! linearity keeps the per-pixel positional gradients exact and cheap.
//! The forward pass never clamps (that would zero gradients in
//! saturated regions); metrics clamp on their own.

use crate::error::CoreError;
use crate::gaussian::{footprint, GaussianSet};
use crate::raster::Raster;

/// A rendered image plus, per primitive, its footprint pixels with the
/// density weight each contributed (cached for the gradient pass).
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Raster,
    /// `contribs[i]` lists `(pixel index, density)` over primitive i's
    /// footprint, in raster scan order.
    pub contribs: Vec<Vec<(usize, f64)>>,
}

/// Renders the set onto a fresh raster:
/// `image(j,k) = Σ_i opacity_i · color_i[k] · density_i(x_j)`,
/// each primitive restricted to its footprint. Values may exceed 1.
///
/// Primitives are accumulated in set order, so the result is
/// bit-reproducible.
pub fn render(set: &GaussianSet, width: usize, height: usize, channels: usize) -> RenderOutput {
    let mut image = Raster::zeros(width, height, channels);
    let mut contribs = Vec::with_capacity(set.len());
    for g in set.iter() {
        let fp = footprint(g, width, height);
        let probe = g.probe();
        let mut list = Vec::with_capacity(fp.len());
        for &j in &fp.pixels {
            let rho = probe.density(Raster::pixel_center(j, width));
            list.push((j, rho));
            let w = g.opacity() * rho;
            for k in 0..channels {
                image.add_at(j, k, w * g.color()[k]);
            }
        }
        contribs.push(list);
    }
    RenderOutput { image, contribs }
}

/// Squared-error loss. Returns the total and the per-pixel map
/// (channel-summed, single-channel raster).
pub fn loss(image: &Raster, target: &Raster) -> Result<(f64, Raster), CoreError> {
    if !image.same_dims(target) {
        return Err(CoreError::DimensionMismatch(format!(
            "image {}x{}x{} vs target {}x{}x{}",
            image.width(),
            image.height(),
            image.channels(),
            target.width(),
            target.height(),
            target.channels()
        )));
    }
    let mut per_pixel = Raster::zeros(image.width(), image.height(), 1);
    let mut total = 0.0;
    for j in 0..image.pixel_count() {
        let mut pj = 0.0;
        for k in 0..image.channels() {
            let r = image.at(j, k) - target.at(j, k);
            pj += r * r;
        }
        per_pixel.add_at(j, 0, pj);
        total += pj;
    }
    Ok((total, per_pixel))
}
