//! Synthetic target scenes and initial-set construction.

use crate::CliError;
use dcsplat_core::render::render;
use dcsplat_core::{Gaussian2D, GaussianSet, Raster, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    TwoPeak,
    KPeak,
    Composite,
}

/// A reproducible synthetic scene: identical specs render identical
/// targets, bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Peak count for `KPeak` (TwoPeak always uses 2).
    pub peaks: usize,
    /// Per-axis σ range for the peaks, in pixels.
    pub sigma: (f64, f64),
    /// Peak amplitude range.
    pub amplitude: (f64, f64),
    /// Minimum distance of peak centers from the raster edge, in pixels.
    pub margin: f64,
    /// Peak centers must sit at least this multiple of the largest σ
    /// apart (at least 2).
    pub min_sep_factor: f64,
    /// Upper bound on center separation, as a multiple of the largest σ
    /// (keeps single-primitive warm fits from degenerating into extreme
    /// pancakes). Non-finite disables the cap.
    pub max_sep_factor: f64,
}

impl SceneSpec {
    pub fn two_peak(width: usize, height: usize, seed: u64) -> Self {
        Self {
            kind: SceneKind::TwoPeak,
            width,
            height,
            seed,
            peaks: 2,
            sigma: (1.2, 2.6),
            amplitude: (0.7, 1.0),
            margin: 7.0,
            min_sep_factor: 3.0,
            max_sep_factor: 4.0,
        }
    }

    pub fn composite(width: usize, height: usize, seed: u64) -> Self {
        Self {
            kind: SceneKind::Composite,
            width,
            height,
            seed,
            peaks: 0,
            sigma: (0.0, 0.0),
            amplitude: (0.0, 0.0),
            margin: 0.0,
            min_sep_factor: 2.0,
            max_sep_factor: f64::INFINITY,
        }
    }
}

/// Renders the target raster for a spec.
pub fn gen_target(spec: &SceneSpec) -> Result<Raster, CliError> {
    match spec.kind {
        SceneKind::TwoPeak => peaks_target(spec, 2),
        SceneKind::KPeak => peaks_target(spec, spec.peaks.max(1)),
        SceneKind::Composite => Ok(composite_target(spec)),
    }
}

/// `k` random anisotropic peaks. Pairwise center separation stays at or
/// above `min_sep_factor`·σ_max (never below 2·σ_max), and each new peak
/// lands within `max_sep_factor`·σ_max of an existing one when the cap
/// is finite.
fn peaks_target(spec: &SceneSpec, k: usize) -> Result<Raster, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    if spec.margin * 2.0 >= w || spec.margin * 2.0 >= h {
        return Err(CliError::Usage(format!(
            "scene margin {} leaves no room on a {}x{} raster",
            spec.margin, spec.width, spec.height
        )));
    }

    // Shapes first; the separation radius depends on every σ drawn.
    let mut shapes = Vec::with_capacity(k);
    let mut sigma_max: f64 = 0.0;
    for _ in 0..k {
        let s0 = rng.gen_range(spec.sigma.0..=spec.sigma.1);
        let s1 = rng.gen_range(spec.sigma.0..=spec.sigma.1);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let amp = rng.gen_range(spec.amplitude.0..=spec.amplitude.1);
        sigma_max = sigma_max.max(s0).max(s1);
        shapes.push((Vec2::new(s0, s1), theta, amp));
    }
    let min_sep = spec.min_sep_factor.max(2.0) * sigma_max;
    let max_sep = spec.max_sep_factor * sigma_max;

    let mut centers: Vec<Vec2> = Vec::with_capacity(k);
    for i in 0..k {
        let mut attempts = 0;
        let c = loop {
            let c = Vec2::new(
                rng.gen_range(spec.margin..=(w - spec.margin)),
                rng.gen_range(spec.margin..=(h - spec.margin)),
            );
            let far_enough = centers.iter().all(|o| (c - o).norm() >= min_sep);
            let close_enough =
                centers.is_empty() || centers.iter().any(|o| (c - o).norm() <= max_sep);
            if far_enough && close_enough {
                break c;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(CliError::Usage(format!(
                    "cannot place peak {i} with separation in [{min_sep:.1}, {max_sep:.1}] on a {}x{} raster; widen the raster or adjust the sigma range",
                    spec.width, spec.height
                )));
            }
        };
        centers.push(c);
    }

    let gaussians = centers
        .into_iter()
        .zip(shapes)
        .map(|(mu, (scales, theta, amp))| Gaussian2D::new_gray(mu, scales, theta, amp, 1.0))
        .collect();
    Ok(render(&GaussianSet::from_gaussians(gaussians), spec.width, spec.height, 1).image)
}

/// Three vertical bands: flat, horizontal ramp, and band-limited noise
/// (seeded, box-blurred twice so it stays fittable).
fn composite_target(spec: &SceneSpec) -> Raster {
    let (w, h) = (spec.width, spec.height);
    let b1 = w / 3;
    let b2 = 2 * w / 3;
    let mut img = Raster::zeros(w, h, 1);

    for y in 0..h {
        for x in 0..b1 {
            img.set(x, y, 0, 0.25);
        }
        for x in b1..b2 {
            let t = (x - b1) as f64 / (b2 - b1).max(1) as f64;
            img.set(x, y, 0, 0.05 + 0.9 * t);
        }
    }

    // Textured band: blurred noise, normalized to [0.05, 0.95].
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tw = w - b2;
    let mut noise = vec![0.0f64; tw * h];
    for v in &mut noise {
        *v = rng.gen::<f64>();
    }
    for _ in 0..2 {
        noise = box_blur(&noise, tw, h);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &noise {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-12);
    for y in 0..h {
        for x in 0..tw {
            let v = (noise[y * tw + x] - lo) / span;
            img.set(b2 + x, y, 0, 0.05 + 0.9 * v);
        }
    }
    img
}

fn box_blur(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (qx, qy) = (x + dx, y + dy);
                    if qx >= 0 && qx < w as i64 && qy >= 0 && qy < h as i64 {
                        sum += data[(qy * w as i64 + qx) as usize];
                        n += 1.0;
                    }
                }
            }
            out[(y * w as i64 + x) as usize] = sum / n;
        }
    }
    out
}

/// One Gaussian matched to the target's intensity moments: centered at
/// the center of mass, axes/scales from the intensity covariance. The
/// usual starting point for single-primitive fits.
pub fn moment_init_gaussian(target: &Raster) -> Gaussian2D {
    let lum = target.luminance();
    let (w, h) = (lum.width(), lum.height());
    let mut mass = 0.0;
    let mut mean = Vec2::zeros();
    for j in 0..lum.pixel_count() {
        let v = lum.at(j, 0).max(0.0);
        mass += v;
        mean += Raster::pixel_center(j, w) * v;
    }
    if mass <= 1e-12 {
        return Gaussian2D::new_gray(
            Vec2::new(w as f64 / 2.0, h as f64 / 2.0),
            Vec2::new(w as f64 / 6.0, h as f64 / 6.0),
            0.0,
            0.5,
            0.8,
        );
    }
    mean /= mass;

    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for j in 0..lum.pixel_count() {
        let v = lum.at(j, 0).max(0.0);
        let d = Raster::pixel_center(j, w) - mean;
        cxx += v * d.x * d.x;
        cxy += v * d.x * d.y;
        cyy += v * d.y * d.y;
    }
    cxx /= mass;
    cxy /= mass;
    cyy /= mass;

    // Eigendecomposition of the 2x2 covariance.
    let tr = cxx + cyy;
    let disc = ((cxx - cyy).powi(2) + 4.0 * cxy * cxy).sqrt();
    let l_max = (tr + disc) / 2.0;
    let l_min = (tr - disc) / 2.0;
    let theta = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    let s_major = l_max.max(0.0).sqrt().max(0.8);
    let s_minor = l_min.max(0.0).sqrt().max(0.8);

    let mut peak: f64 = 0.0;
    for j in 0..lum.pixel_count() {
        peak = peak.max(lum.at(j, 0));
    }

    Gaussian2D::new_gray(
        mean,
        Vec2::new(s_major, s_minor),
        theta,
        peak.clamp(0.05, 1.0),
        0.8,
    )
}

/// An nx × ny lattice of identical isotropic primitives.
pub fn grid_init(
    width: usize,
    height: usize,
    nx: usize,
    ny: usize,
    sigma: f64,
    intensity: f64,
    opacity: f64,
) -> GaussianSet {
    let mut items = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let mu = Vec2::new(
                (gx as f64 + 0.5) * width as f64 / nx as f64,
                (gy as f64 + 0.5) * height as f64 / ny as f64,
            );
            items.push(Gaussian2D::new_gray(
                mu,
                Vec2::new(sigma, sigma),
                0.0,
                intensity,
                opacity,
            ));
        }
    }
    GaussianSet::from_gaussians(items)
}

/// `count` primitives at seeded uniform positions.
pub fn random_init(
    width: usize,
    height: usize,
    count: usize,
    sigma: f64,
    intensity: f64,
    opacity: f64,
    seed: u64,
) -> GaussianSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..count)
        .map(|_| {
            let mu = Vec2::new(
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
            );
            Gaussian2D::new_gray(mu, Vec2::new(sigma, sigma), 0.0, intensity, opacity)
        })
        .collect();
    GaussianSet::from_gaussians(items)
}

/// Half-ramp / half-noise image for directional-consistency separation
/// checks: the left half is a horizontal ramp (fully coherent gradients),
/// the right half is seeded i.i.d. noise.
pub fn ramp_noise_image(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = width / 2;
    let mut img = Raster::zeros(width, height, 1);
    for y in 0..height {
        for x in 0..width {
            let v = if x < half {
                0.05 + 0.9 * (x as f64 / half.max(1) as f64)
            } else {
                rng.gen::<f64>()
            };
            img.set(x, y, 0, v);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_are_reproducible() {
        let spec = SceneSpec::two_peak(48, 48, 123);
        let a = gen_target(&spec).unwrap();
        let b = gen_target(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_target(&SceneSpec::two_peak(48, 48, 124)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_peak_has_exactly_two_local_maxima() {
        for seed in 0..60 {
            let spec = SceneSpec::two_peak(48, 48, seed);
            let img = gen_target(&spec).unwrap();
            // 1px box smoothing, then count strict local maxima above
            // half the peak amplitude.
            let smooth = {
                let mut s = Raster::zeros(48, 48, 1);
                for y in 0..48usize {
                    for x in 0..48usize {
                        let mut sum = 0.0;
                        let mut n = 0.0;
                        for dy in -1..=1i64 {
                            for dx in -1..=1i64 {
                                let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                                if (0..48).contains(&qx) && (0..48).contains(&qy) {
                                    sum += img.get(qx as usize, qy as usize, 0);
                                    n += 1.0;
                                }
                            }
                        }
                        s.set(x, y, 0, sum / n);
                    }
                }
                s
            };
            let mut peak: f64 = 0.0;
            for j in 0..smooth.pixel_count() {
                peak = peak.max(smooth.at(j, 0));
            }
            let mut maxima = 0;
            for y in 1..47usize {
                for x in 1..47usize {
                    let v = smooth.get(x, y, 0);
                    if v < peak / 2.0 {
                        continue;
                    }
                    let mut is_max = true;
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            if smooth.get((x as i64 + dx) as usize, (y as i64 + dy) as usize, 0)
                                >= v
                            {
                                is_max = false;
                            }
                        }
                    }
                    if is_max {
                        maxima += 1;
                    }
                }
            }
            if maxima != 2 {
                eprintln!("seed {seed}: found {maxima} maxima");
            }
            assert_eq!(maxima, 2, "seed {seed}");
        }
    }

    #[test]
    fn k_peak_generalizes() {
        let mut spec = SceneSpec::two_peak(64, 64, 9);
        spec.kind = SceneKind::KPeak;
        spec.peaks = 4;
        spec.max_sep_factor = f64::INFINITY;
        let a = gen_target(&spec).unwrap();
        assert_eq!(a, gen_target(&spec).unwrap());
        // Mass well above a two-peak render of the same ranges.
        assert!(a.data().iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn infeasible_separation_is_a_config_error() {
        let mut spec = SceneSpec::two_peak(20, 20, 0);
        spec.sigma = (6.0, 6.0);
        spec.margin = 9.0; // centers confined to a 2x2 box, sep >= 24 impossible
        assert!(gen_target(&spec).is_err());
    }

    #[test]
    fn composite_flat_region_is_constant() {
        let spec = SceneSpec::composite(96, 48, 5);
        let img = gen_target(&spec).unwrap();
        for y in 0..48 {
            for x in 0..32 {
                assert_eq!(img.get(x, y, 0), 0.25);
            }
        }
        // Texture band actually varies.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in 0..48 {
            for x in 64..96 {
                lo = lo.min(img.get(x, y, 0));
                hi = hi.max(img.get(x, y, 0));
            }
        }
        assert!(hi - lo > 0.5);
    }

    #[test]
    fn moment_init_covers_the_mass() {
        let spec = SceneSpec::two_peak(48, 48, 3);
        let img = gen_target(&spec).unwrap();
        let g = moment_init_gaussian(&img);
        assert!(g.mu().x > 9.0 && g.mu().x < 39.0);
        assert!(g.max_scale() >= 0.8);
        // The principal axis should stretch toward both peaks, i.e. the
        // major scale should exceed the minor.
        assert!(g.scales().x >= g.scales().y);
    }

    #[test]
    fn grid_init_counts() {
        let set = grid_init(48, 24, 4, 2, 3.0, 0.5, 0.8);
        assert_eq!(set.len(), 8);
    }
}
