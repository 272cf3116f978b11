//! Image-quality metrics (PSNR, SSIM) and the per-pixel directional
//! consistency map.

use crate::adc::directional_consistency;
use crate::gaussian::Vec2;
use crate::raster::Raster;

/// PSNR ceiling reported for (near-)identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB. Inputs are clamped to [0, 1] first;
/// identical images report the cap instead of infinity.
pub fn psnr(a: &Raster, b: &Raster) -> f64 {
    assert!(a.same_dims(b), "psnr dimension mismatch");
    let (a, b) = (a.clamped01(), b.clamped01());
    let n = a.data().len() as f64;
    let mut se = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        se += d * d;
    }
    let mse = se / n;
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (-10.0 * mse.log10()).min(PSNR_CAP_DB)
}

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - half;
            let dy = y as f64 - half;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[y * SSIM_WINDOW + x] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean structural similarity with the reference configuration: 11×11
/// Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1,
/// averaged over all fully interior window positions (and channels).
/// Inputs are clamped to [0, 1]. Rasters smaller than the window fall
/// back to a single uniform window over the whole image.
pub fn ssim(a: &Raster, b: &Raster) -> f64 {
    assert!(a.same_dims(b), "ssim dimension mismatch");
    let (a, b) = (a.clamped01(), b.clamped01());
    let c1 = (SSIM_K1) * (SSIM_K1);
    let c2 = (SSIM_K2) * (SSIM_K2);
    let (w, h) = (a.width(), a.height());

    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        // Single global window with uniform weights.
        let mut total = 0.0;
        for k in 0..a.channels() {
            let n = (w * h) as f64;
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..w * h {
                ma += a.at(j, k);
                mb += b.at(j, k);
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..w * h {
                let da = a.at(j, k) - ma;
                let db = b.at(j, k) - mb;
                va += da * da;
                vb += db * db;
                cov += da * db;
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        return total / a.channels() as f64;
    }

    let win = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..a.channels() {
        for wy in 0..=(h - SSIM_WINDOW) {
            for wx in 0..=(w - SSIM_WINDOW) {
                let (mut ma, mut mb) = (0.0, 0.0);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let wt = win[dy * SSIM_WINDOW + dx];
                        ma += wt * a.get(wx + dx, wy + dy, k);
                        mb += wt * b.get(wx + dx, wy + dy, k);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let wt = win[dy * SSIM_WINDOW + dx];
                        let da = a.get(wx + dx, wy + dy, k) - ma;
                        let db = b.get(wx + dx, wy + dy, k) - mb;
                        va += wt * da * da;
                        vb += wt * db * db;
                        cov += wt * (da * db);
                    }
                }
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Per-pixel directional-consistency map: κ of the finite-difference
/// image gradients gathered in a window around each pixel, masked where
/// fewer than four gradients survive the magnitude floor.
#[derive(Debug, Clone)]
pub struct DcMap {
    pub width: usize,
    pub height: usize,
    /// κ per pixel; masked pixels hold NaN.
    pub kappa: Vec<f64>,
    pub mask: Vec<bool>,
}

impl DcMap {
    /// Mean κ over unmasked pixels inside the given rectangle
    /// (half-open bounds). NaN if the region is fully masked.
    pub fn region_mean(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let j = y * self.width + x;
                if !self.mask[j] {
                    sum += self.kappa[j];
                    n += 1;
                }
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

/// Builds the DC map of an image. RGB inputs are reduced to luminance.
/// Gradients are central differences, defined on interior pixels only;
/// entries weaker than `mag_floor` carry no reliable direction and are
/// dropped before the circular mean.
pub fn dc_map(image: &Raster, window_radius: usize, mag_floor: f64) -> DcMap {
    let lum = image.luminance();
    let (w, h) = (lum.width(), lum.height());

    // Central-difference gradient field on interior pixels.
    let mut grads = vec![None; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let gx = (lum.get(x + 1, y, 0) - lum.get(x - 1, y, 0)) / 2.0;
            let gy = (lum.get(x, y + 1, 0) - lum.get(x, y - 1, 0)) / 2.0;
            grads[y * w + x] = Some(Vec2::new(gx, gy));
        }
    }

    let r = window_radius as i64;
    let mut kappa = vec![f64::NAN; w * h];
    let mut mask = vec![true; w * h];
    let mut window = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            window.clear();
            for qy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                for qx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                    if let Some(g) = grads[qy as usize * w + qx as usize] {
                        if g.norm() >= mag_floor {
                            window.push(g);
                        }
                    }
                }
            }
            if window.len() >= 4 {
                let (_, k) = directional_consistency(&window);
                kappa[(y * w as i64 + x) as usize] = k;
                mask[(y * w as i64 + x) as usize] = false;
            }
        }
    }
    DcMap {
        width: w,
        height: h,
        kappa,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(w: usize, h: usize, v: f64) -> Raster {
        Raster::from_data(w, h, 1, vec![v; w * h]).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = uniform(16, 16, 0.5);
        assert_eq!(psnr(&a, &a), PSNR_CAP_DB);

        let b = uniform(16, 16, 0.6);
        let p = psnr(&a, &b);
        assert!((p - 20.0).abs() < 1e-9, "uniform 0.1 difference: {p}");

        let z = uniform(16, 16, 0.0);
        let o = uniform(16, 16, 1.0);
        assert!(psnr(&z, &o).abs() < 1e-12);
    }

    #[test]
    fn psnr_symmetric() {
        let mut a = uniform(16, 16, 0.2);
        let mut b = uniform(16, 16, 0.7);
        a.set(3, 4, 0, 0.9);
        b.set(8, 2, 0, 0.1);
        assert_eq!(psnr(&a, &b), psnr(&b, &a));
    }

    #[test]
    fn ssim_identical_is_one() {
        let mut a = uniform(24, 24, 0.3);
        for j in 0..a.pixel_count() {
            a.add_at(j, 0, ((j % 9) as f64) * 0.05);
        }
        assert!((ssim(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(ssim(&a, &a), ssim(&a, &a));
    }

    #[test]
    fn ssim_negative_on_inverted_content() {
        let mut a = Raster::zeros(32, 32, 1);
        for y in 0..32 {
            for x in 0..32 {
                a.set(x, y, 0, (x as f64) / 31.0);
            }
        }
        let mut b = Raster::zeros(32, 32, 1);
        for y in 0..32 {
            for x in 0..32 {
                b.set(x, y, 0, 1.0 - (x as f64) / 31.0);
            }
        }
        assert!(ssim(&a, &b) < 0.0);
    }

    #[test]
    fn ssim_constant_images_reduce_to_luminance_term() {
        let a = uniform(24, 24, 0.4);
        let b = uniform(24, 24, 0.6);
        let c1 = 0.01f64 * 0.01;
        let expect = (2.0 * 0.4 * 0.6 + c1) / (0.4 * 0.4 + 0.6 * 0.6 + c1);
        assert!((ssim(&a, &b) - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_small_raster_falls_back_to_global_window() {
        let a = uniform(6, 6, 0.4);
        let b = uniform(6, 6, 0.4);
        assert!((ssim(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric() {
        let mut a = uniform(20, 20, 0.2);
        let mut b = uniform(20, 20, 0.5);
        for j in 0..a.pixel_count() {
            a.add_at(j, 0, ((j % 5) as f64) * 0.1);
            b.add_at(j, 0, ((j % 3) as f64) * 0.1);
        }
        assert_eq!(ssim(&a, &b), ssim(&b, &a));
    }

    #[test]
    fn dc_map_ramp_is_fully_coherent() {
        let mut img = Raster::zeros(32, 32, 1);
        for y in 0..32 {
            for x in 0..32 {
                img.set(x, y, 0, (x as f64) / 31.0);
            }
        }
        let map = dc_map(&img, 3, 1e-3);
        for j in 0..map.kappa.len() {
            assert!(!map.mask[j]);
            assert!((map.kappa[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_map_noise_is_incoherent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut img = Raster::zeros(48, 48, 1);
        for j in 0..img.pixel_count() {
            img.add_at(j, 0, rng.gen::<f64>());
        }
        let map = dc_map(&img, 7, 1e-3);
        let mean = map.region_mean(0, 48, 0, 48);
        // ~225 directions per window; even with stencil correlation the
        // resultant stays far from coherent.
        assert!(mean < 0.3, "noise mean kappa {mean}");
    }

    #[test]
    fn dc_map_affine_invariance() {
        let mut img = Raster::zeros(24, 24, 1);
        for y in 0..24 {
            for x in 0..24 {
                img.set(x, y, 0, ((x + 2 * y) as f64) / 72.0 + ((x * y % 7) as f64) / 21.0);
            }
        }
        let mut scaled = Raster::zeros(24, 24, 1);
        for y in 0..24 {
            for x in 0..24 {
                scaled.set(x, y, 0, 2.0 * img.get(x, y, 0) + 0.1);
            }
        }
        // Gradient directions are preserved under a·I+b (a>0); use a tiny
        // floor so the same entries survive on both sides.
        let m1 = dc_map(&img, 3, 1e-9);
        let m2 = dc_map(&scaled, 3, 1e-9);
        for j in 0..m1.kappa.len() {
            if !m1.mask[j] && !m2.mask[j] {
                assert!((m1.kappa[j] - m2.kappa[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dc_map_masks_flat_regions() {
        let img = uniform(16, 16, 0.5);
        let map = dc_map(&img, 2, 1e-3);
        assert!(map.mask.iter().all(|&m| m));
        assert!(map.kappa.iter().all(|k| k.is_nan()));
    }
}
