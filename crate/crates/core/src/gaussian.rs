//! Anisotropic 2D Gaussian primitives, the sets they form, and footprint
//! (influenced-pixel) computation.

use nalgebra::Vector2;
use std::f64::consts::PI;

pub type Vec2 = Vector2<f64>;

/// Mahalanobis cutoff, in standard deviations, defining which pixels a
/// primitive influences. 3σ matches the 6·S(a) principal-axis diameter
/// used by split placement, so footprints and split geometry agree.
pub const INFLUENCE_CUTOFF_SIGMA: f64 = 3.0;

/// One anisotropic primitive: center, per-axis standard deviations,
/// rotation, per-channel intensity and opacity.
///
/// Invariants enforced on construction: scales strictly positive, opacity
/// in (0, 1], theta canonicalized to [0, π). Rotating by π maps an
/// ellipse onto itself, so the canonical angle loses nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2D {
    mu: Vec2,
    scales: Vec2,
    theta: f64,
    color: [f64; 3],
    opacity: f64,
}

impl Gaussian2D {
    pub fn new(mu: Vec2, scales: Vec2, theta: f64, color: [f64; 3], opacity: f64) -> Self {
        assert!(
            mu.x.is_finite() && mu.y.is_finite(),
            "center must be finite"
        );
        assert!(
            scales.x > 0.0 && scales.y > 0.0 && scales.x.is_finite() && scales.y.is_finite(),
            "scales must be strictly positive, got {scales:?}"
        );
        assert!(
            opacity > 0.0 && opacity <= 1.0,
            "opacity must be in (0, 1], got {opacity}"
        );
        assert!(
            color.iter().all(|c| (0.0..=1.0).contains(c)),
            "intensity channels must be in [0, 1], got {color:?}"
        );
        Self {
            mu,
            scales,
            theta: canonicalize_theta(theta),
            color,
            opacity,
        }
    }

    /// Grayscale convenience constructor (all three channels equal).
    pub fn new_gray(mu: Vec2, scales: Vec2, theta: f64, intensity: f64, opacity: f64) -> Self {
        Self::new(mu, scales, theta, [intensity; 3], opacity)
    }

    pub fn mu(&self) -> Vec2 {
        self.mu
    }

    pub fn scales(&self) -> Vec2 {
        self.scales
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn color(&self) -> [f64; 3] {
        self.color
    }

    pub fn opacity(&self) -> f64 {
        self.opacity
    }

    /// Largest per-axis standard deviation (the ‖S‖∞ the split/clone rule
    /// compares against τ_S).
    pub fn max_scale(&self) -> f64 {
        self.scales.x.max(self.scales.y)
    }

    /// Index of the principal axis (largest scale; ties pick the lowest
    /// index so the choice is deterministic and order-free).
    pub fn principal_axis(&self) -> usize {
        if self.scales.y > self.scales.x {
            1
        } else {
            0
        }
    }

    /// Unit direction of axis `a` rotated into world coordinates.
    pub fn axis_dir(&self, a: usize) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        if a == 0 {
            Vec2::new(c, s)
        } else {
            Vec2::new(-s, c)
        }
    }

    /// Coordinates of `x - mu` in the primitive's local (rotated) frame.
    #[inline]
    pub fn to_local(&self, x: Vec2) -> Vec2 {
        let d = x - self.mu;
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Squared Mahalanobis distance of `x` from the center. Delegates to
    /// [`DensityProbe`] so one-off and bulk evaluation are bit-identical.
    #[inline]
    pub fn mahalanobis_sq(&self, x: Vec2) -> f64 {
        self.probe().mahalanobis_sq(x)
    }

    /// Unnormalized density exp(−½·dᵀΣ⁻¹d) with Σ = R·diag(s²)·Rᵀ.
    /// Equals 1 at the center and decays along every ray from it.
    #[inline]
    pub fn density(&self, x: Vec2) -> f64 {
        (-0.5 * self.mahalanobis_sq(x)).exp()
    }

    /// Precomputed evaluator for per-pixel loops (hoists the rotation
    /// trigonometry out of the inner loop).
    pub fn probe(&self) -> DensityProbe {
        let (sin_t, cos_t) = self.theta.sin_cos();
        DensityProbe {
            mu: self.mu,
            sin_t,
            cos_t,
            inv_s0_sq: 1.0 / (self.scales.x * self.scales.x),
            inv_s1_sq: 1.0 / (self.scales.y * self.scales.y),
        }
    }
}

/// Frozen frame of one primitive for bulk density evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DensityProbe {
    mu: Vec2,
    sin_t: f64,
    cos_t: f64,
    inv_s0_sq: f64,
    inv_s1_sq: f64,
}

impl DensityProbe {
    #[inline]
    pub fn mahalanobis_sq(&self, x: Vec2) -> f64 {
        let d = x - self.mu;
        let e0 = self.cos_t * d.x + self.sin_t * d.y;
        let e1 = -self.sin_t * d.x + self.cos_t * d.y;
        e0 * e0 * self.inv_s0_sq + e1 * e1 * self.inv_s1_sq
    }

    #[inline]
    pub fn density(&self, x: Vec2) -> f64 {
        (-0.5 * self.mahalanobis_sq(x)).exp()
    }
}

fn canonicalize_theta(theta: f64) -> f64 {
    assert!(theta.is_finite(), "theta must be finite");
    let t = theta.rem_euclid(PI);
    // rem_euclid can return exactly PI when theta is a tiny negative number.
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// The raster pixels a primitive influences: exactly those whose center
/// lies within the Mahalanobis cutoff, clipped to the raster bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    pub pixels: Vec<usize>,
}

impl Footprint {
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }
}

/// Footprint at the default 3σ cutoff.
pub fn footprint(g: &Gaussian2D, width: usize, height: usize) -> Footprint {
    footprint_with_cutoff(g, width, height, INFLUENCE_CUTOFF_SIGMA)
}

/// Footprint at an arbitrary cutoff (in standard deviations). The
/// membership predicate is `mahalanobis_sq(center) <= cutoff²`, so every
/// listed pixel can be re-checked exactly.
pub fn footprint_with_cutoff(
    g: &Gaussian2D,
    width: usize,
    height: usize,
    cutoff_sigma: f64,
) -> Footprint {
    assert!(width > 0 && height > 0, "raster dims must be positive");
    let cutoff_sq = cutoff_sigma * cutoff_sigma;

    // Conservative axis-aligned bounds of the cutoff ellipse.
    let (s, c) = g.theta.sin_cos();
    let (sx2, sy2) = (g.scales.x * g.scales.x, g.scales.y * g.scales.y);
    let hx = cutoff_sigma * (c * c * sx2 + s * s * sy2).sqrt();
    let hy = cutoff_sigma * (s * s * sx2 + c * c * sy2).sqrt();

    // Pixel x has its center at x + 0.5.
    let x_lo = ((g.mu.x - hx - 0.5).ceil() as i64).max(0);
    let x_hi = ((g.mu.x + hx - 0.5).floor() as i64).min(width as i64 - 1);
    let y_lo = ((g.mu.y - hy - 0.5).ceil() as i64).max(0);
    let y_hi = ((g.mu.y + hy - 0.5).floor() as i64).min(height as i64 - 1);

    let probe = g.probe();
    let mut pixels = Vec::new();
    let mut y = y_lo;
    while y <= y_hi {
        let mut x = x_lo;
        while x <= x_hi {
            let center = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            if probe.mahalanobis_sq(center) <= cutoff_sq {
                pixels.push(y as usize * width + x as usize);
            }
            x += 1;
        }
        y += 1;
    }
    Footprint { pixels }
}

/// Ordered collection of primitives. Each carries a stable id so that
/// accumulators and reports can be joined across refinement rounds; ids
/// of surviving primitives never change.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    pub(crate) items: Vec<Gaussian2D>,
    pub(crate) ids: Vec<u64>,
    pub(crate) next_id: u64,
}

impl GaussianSet {
    pub fn new() -> Self {
        Self {
            items: Vec::new(),
            ids: Vec::new(),
            next_id: 0,
        }
    }

    pub fn from_gaussians(items: Vec<Gaussian2D>) -> Self {
        let n = items.len() as u64;
        Self {
            items,
            ids: (0..n).collect(),
            next_id: n,
        }
    }

    pub fn push(&mut self, g: Gaussian2D) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.items.push(g);
        self.ids.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Gaussian2D {
        &self.items[i]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gaussian2D> {
        self.items.iter()
    }

    /// Replaces the primitive at `i`, keeping its id (used by the
    /// optimizer to update parameters in place).
    pub fn set_item(&mut self, i: usize, g: Gaussian2D) {
        self.items[i] = g;
    }
}

impl Default for GaussianSet {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn iso(mu: Vec2) -> Gaussian2D {
        Gaussian2D::new_gray(mu, Vec2::new(1.0, 1.0), 0.0, 1.0, 1.0)
    }

    #[test]
    fn density_peak_is_one() {
        let g = Gaussian2D::new_gray(Vec2::new(3.2, -1.7), Vec2::new(2.0, 0.5), 1.1, 0.7, 0.9);
        assert_eq!(g.density(g.mu()), 1.0);
    }

    #[test]
    fn density_isotropic_unit_offset() {
        let g = iso(Vec2::new(0.0, 0.0));
        assert_relative_eq!(
            g.density(Vec2::new(1.0, 0.0)),
            (-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn density_anisotropic_mahalanobis_one() {
        // s=(2,1), theta=0: x = mu + (2,0) is one Mahalanobis unit away.
        let g = Gaussian2D::new_gray(Vec2::new(5.0, 5.0), Vec2::new(2.0, 1.0), 0.0, 1.0, 1.0);
        assert_relative_eq!(
            g.density(Vec2::new(7.0, 5.0)),
            (-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn density_decreases_along_rays() {
        let g = Gaussian2D::new_gray(Vec2::new(0.0, 0.0), Vec2::new(1.5, 0.4), 0.7, 1.0, 1.0);
        let dir = Vec2::new(0.3, -0.8).normalize();
        let mut prev = g.density(g.mu());
        for k in 1..20 {
            let v = g.density(g.mu() + dir * (0.25 * k as f64));
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn theta_canonicalized() {
        let g = Gaussian2D::new_gray(Vec2::zeros(), Vec2::new(1.0, 1.0), PI + 0.3, 1.0, 1.0);
        assert_relative_eq!(g.theta(), 0.3, epsilon = 1e-12);
        let g2 = Gaussian2D::new_gray(Vec2::zeros(), Vec2::new(1.0, 1.0), -0.3, 1.0, 1.0);
        assert_relative_eq!(g2.theta(), PI - 0.3, epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "scales")]
    fn rejects_nonpositive_scale() {
        Gaussian2D::new_gray(Vec2::zeros(), Vec2::new(0.0, 1.0), 0.0, 1.0, 1.0);
    }

    #[test]
    #[should_panic(expected = "opacity")]
    fn rejects_zero_opacity() {
        Gaussian2D::new_gray(Vec2::zeros(), Vec2::new(1.0, 1.0), 0.0, 1.0, 0.0);
    }

    #[test]
    fn footprint_is_discrete_disk() {
        // Center of a 16x16 raster; every in-disk pixel satisfies the
        // predicate, everything else does not.
        let g = iso(Vec2::new(8.0, 8.0));
        let fp = footprint(&g, 16, 16);
        let mut expect = Vec::new();
        for y in 0..16usize {
            for x in 0..16usize {
                let c = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                if g.mahalanobis_sq(c) <= 9.0 {
                    expect.push(y * 16 + x);
                }
            }
        }
        assert_eq!(fp.pixels, expect);
        assert!(!fp.is_empty());
    }

    #[test]
    fn footprint_off_raster_is_empty() {
        let g = iso(Vec2::new(-50.0, -50.0));
        assert!(footprint(&g, 16, 16).is_empty());
    }

    #[test]
    fn footprint_elongated_vertically_under_rotation() {
        // s=(5,0.5) rotated by pi/2 puts the long axis on y.
        let g = Gaussian2D::new_gray(
            Vec2::new(16.0, 16.0),
            Vec2::new(5.0, 0.5),
            PI / 2.0,
            1.0,
            1.0,
        );
        let fp = footprint(&g, 32, 32);
        let (mut min_x, mut max_x, mut min_y, mut max_y) = (usize::MAX, 0, usize::MAX, 0);
        for &j in &fp.pixels {
            let (x, y) = (j % 32, j / 32);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        assert!(max_y - min_y > max_x - min_x);
    }

    #[test]
    fn footprint_boundary_ring() {
        let g = iso(Vec2::new(8.0, 8.0));
        let fp = footprint(&g, 16, 16);
        let thresh = (-4.5f64).exp();
        for &j in &fp.pixels {
            assert!(g.density(crate::raster::Raster::pixel_center(j, 16)) >= thresh * (1.0 - 1e-12));
        }
        // Sample a ring just outside 3σ.
        for k in 0..32 {
            let ang = k as f64 * PI / 16.0;
            let p = g.mu() + Vec2::new(ang.cos(), ang.sin()) * 3.05;
            assert!(g.density(p) < thresh);
        }
    }

    #[test]
    fn set_ids_are_stable() {
        let mut set = GaussianSet::from_gaussians(vec![iso(Vec2::zeros()), iso(Vec2::new(1.0, 1.0))]);
        assert_eq!(set.id(0), 0);
        let id = set.push(iso(Vec2::new(2.0, 2.0)));
        assert_eq!(id, 2);
        assert_eq!(set.len(), 3);
    }
}
