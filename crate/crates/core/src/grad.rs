//! Analytic gradients of the squared-error loss, per pixel and per
//! parameter, plus a central-difference oracle for tests.
//!
//! With additive compositing the loss is pixel-separable, so the per-pixel
//! positional gradient of primitive i at footprint pixel j is exact:
//!
//!   g_{i,j} = ∂L_j/∂mu_i = w_j · Σ⁻¹ (x_j − mu_i),
//!   w_j = 2 · opacity · density(x_j) · Σ_k residual_{j,k} · color_k.
//!
//! All derivatives are evaluated in the primitive's local frame
//! (e = Rᵀ(x − mu)), where Σ⁻¹ is diagonal.

use crate::error::CoreError;
use crate::gaussian::{Gaussian2D, GaussianSet, Vec2};
use crate::raster::Raster;
use crate::render::{loss, render, RenderOutput};

/// Gradients of every parameter group for one primitive.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamGrads {
    pub mu: Vec2,
    pub scales: Vec2,
    pub theta: f64,
    pub color: [f64; 3],
    pub opacity: f64,
}

/// Per-pixel positional gradients (restricted to each primitive's
/// footprint) plus dense per-parameter gradients.
///
/// `dense[i].mu` is the sum of `per_pixel[i]` taken in list order, so the
/// per-pixel decomposition reproduces the total bit-exactly.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    pub per_pixel: Vec<Vec<(usize, Vec2)>>,
    pub dense: Vec<ParamGrads>,
}

/// Computes per-pixel positional gradients and dense parameter gradients
/// for the render `out` (which must have been produced from `set`).
pub fn positional_gradients(out: &RenderOutput, target: &Raster, set: &GaussianSet) -> GradBuffer {
    assert!(
        out.image.same_dims(target),
        "render/target dimension mismatch"
    );
    assert_eq!(out.contribs.len(), set.len(), "render/set mismatch");

    let width = target.width();
    let channels = target.channels();
    let mut per_pixel = Vec::with_capacity(set.len());
    let mut dense = Vec::with_capacity(set.len());

    for (i, list) in out.contribs.iter().enumerate() {
        let g = set.get(i);
        let (sin_t, cos_t) = g.theta().sin_cos();
        let (s0, s1) = (g.scales().x, g.scales().y);
        let (inv_s0_sq, inv_s1_sq) = (1.0 / (s0 * s0), 1.0 / (s1 * s1));
        let o = g.opacity();
        let c = g.color();

        let mut pix = Vec::with_capacity(list.len());
        let mut pg = ParamGrads::default();

        for &(j, rho) in list {
            let x = Raster::pixel_center(j, width);
            let d = x - g.mu();
            let e = Vec2::new(cos_t * d.x + sin_t * d.y, -sin_t * d.x + cos_t * d.y);

            // Channel-weighted residual at this pixel.
            let mut rc = 0.0;
            for (k, &ck) in c.iter().enumerate().take(channels) {
                let r = out.image.at(j, k) - target.at(j, k);
                rc += r * ck;
                pg.color[k] += 2.0 * r * o * rho;
            }
            let w = 2.0 * o * rho * rc;
            pg.opacity += 2.0 * rc * rho;

            // Σ⁻¹ d, rotated back to world coordinates.
            let f = Vec2::new(e.x * inv_s0_sq, e.y * inv_s1_sq);
            let sig_inv_d = Vec2::new(cos_t * f.x - sin_t * f.y, sin_t * f.x + cos_t * f.y);
            pix.push((j, sig_inv_d * w));

            pg.scales.x += w * e.x * e.x / (s0 * s0 * s0);
            pg.scales.y += w * e.y * e.y / (s1 * s1 * s1);
            pg.theta += -w * e.x * e.y * (inv_s0_sq - inv_s1_sq);
        }

        // The dense mu gradient is the per-pixel sum in list order.
        let mut mu = Vec2::zeros();
        for &(_, gij) in &pix {
            mu += gij;
        }
        pg.mu = mu;

        per_pixel.push(pix);
        dense.push(pg);
    }

    GradBuffer { per_pixel, dense }
}

/// Selects a single scalar parameter of one primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSelector {
    Mu(usize),
    Scale(usize),
    Theta,
    Color(usize),
    Opacity,
}

impl ParamSelector {
    /// All selectors relevant for a raster with `channels` channels.
    pub fn all(channels: usize) -> Vec<ParamSelector> {
        let mut v = vec![
            ParamSelector::Mu(0),
            ParamSelector::Mu(1),
            ParamSelector::Scale(0),
            ParamSelector::Scale(1),
            ParamSelector::Theta,
            ParamSelector::Opacity,
        ];
        for k in 0..channels {
            v.push(ParamSelector::Color(k));
        }
        v
    }
}

fn perturbed(g: &Gaussian2D, sel: ParamSelector, delta: f64) -> Gaussian2D {
    let mut mu = g.mu();
    let mut scales = g.scales();
    let mut theta = g.theta();
    let mut color = g.color();
    let mut opacity = g.opacity();
    match sel {
        ParamSelector::Mu(a) => mu[a] += delta,
        ParamSelector::Scale(a) => scales[a] += delta,
        ParamSelector::Theta => theta += delta,
        ParamSelector::Color(k) => color[k] += delta,
        ParamSelector::Opacity => opacity += delta,
    }
    Gaussian2D::new(mu, scales, theta, color, opacity)
}

/// Central-difference estimate of ∂L/∂param. Renders with the same
/// footprint cutoff as the analytic path, so truncation is consistent.
/// Test-support code; keep `h` well clear of parameter bounds.
pub fn fd_oracle(
    set: &GaussianSet,
    target: &Raster,
    prim: usize,
    sel: ParamSelector,
    h: f64,
) -> Result<f64, CoreError> {
    assert!(h > 0.0, "step must be positive");
    let eval = |delta: f64| -> Result<f64, CoreError> {
        let mut probe = set.clone();
        probe.set_item(prim, perturbed(set.get(prim), sel, delta));
        let out = render(&probe, target.width(), target.height(), target.channels());
        loss(&out.image, target).map(|(t, _)| t)
    };
    Ok((eval(h)? - eval(-h)?) / (2.0 * h))
}
