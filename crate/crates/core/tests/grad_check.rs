//! Analytic gradients vs the central-difference oracle on random scenes.
//!
//! Scene generation keeps every raster pixel clear of the 3σ footprint
//! boundary of every primitive: with a truncated kernel the loss is
//! discontinuous exactly where footprint membership flips, so a pixel
//! sitting on the cutoff would make the finite difference measure the
//! jump instead of the derivative. Parameters also stay away from the
//! projection clamps so perturbed primitives remain constructible.

use dcsplat_core::gaussian::{Gaussian2D, GaussianSet, Vec2};
use dcsplat_core::grad::{fd_oracle, positional_gradients, ParamSelector};
use dcsplat_core::render::render;
use dcsplat_core::Raster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_H: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;
/// Minimum |mahalanobis² − 9| a pixel may have w.r.t. any primitive.
const BOUNDARY_MARGIN: f64 = 5e-3;

fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian2D {
    Gaussian2D::new_gray(
        Vec2::new(rng.gen_range(1.5..6.5), rng.gen_range(1.5..6.5)),
        Vec2::new(rng.gen_range(0.6..2.2), rng.gen_range(0.6..2.2)),
        rng.gen_range(0.0..std::f64::consts::PI),
        rng.gen_range(0.15..0.85),
        rng.gen_range(0.3..0.9),
    )
}

fn boundary_safe(set: &GaussianSet, w: usize, h: usize) -> bool {
    for g in set.iter() {
        for y in 0..h {
            for x in 0..w {
                let c = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                if (g.mahalanobis_sq(c) - 9.0).abs() < BOUNDARY_MARGIN {
                    return false;
                }
            }
        }
    }
    true
}

fn random_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (GaussianSet, Raster) {
    let set = loop {
        let candidate =
            GaussianSet::from_gaussians((0..3).map(|_| random_gaussian(rng)).collect());
        if boundary_safe(&candidate, w, h) {
            break candidate;
        }
    };
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        data.push(rng.gen_range(0.0..1.0));
    }
    (set, Raster::from_data(w, h, 1, data).unwrap())
}

#[test]
fn analytic_matches_central_difference_on_random_scenes() {
    let (w, h) = (8, 8);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (set, target) = random_scene(&mut rng, w, h);
        let out = render(&set, w, h, 1);
        let gbuf = positional_gradients(&out, &target, &set);

        for prim in 0..set.len() {
            for sel in ParamSelector::all(1) {
                let analytic = match sel {
                    ParamSelector::Mu(a) => gbuf.dense[prim].mu[a],
                    ParamSelector::Scale(a) => gbuf.dense[prim].scales[a],
                    ParamSelector::Theta => gbuf.dense[prim].theta,
                    ParamSelector::Color(k) => gbuf.dense[prim].color[k],
                    ParamSelector::Opacity => gbuf.dense[prim].opacity,
                };
                let fd = fd_oracle(&set, &target, prim, sel, FD_H).unwrap();
                let rel = (analytic - fd).abs() / fd.abs().max(1.0);
                assert!(
                    rel < REL_TOL,
                    "seed {seed} prim {prim} {sel:?}: analytic {analytic} vs fd {fd} (rel {rel})"
                );
            }
        }
    }
}

#[test]
fn zero_residual_finite_difference_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (set, _) = random_scene(&mut rng, 8, 8);
    let target = render(&set, 8, 8, 1).image;
    for sel in [ParamSelector::Mu(0), ParamSelector::Opacity, ParamSelector::Theta] {
        let fd = fd_oracle(&set, &target, 0, sel, FD_H).unwrap();
        assert!(fd.abs() < 1e-8, "{sel:?} fd {fd}");
    }
}
