//! Adam training loop wiring render → loss → gradients → density control
//! on a fixed iteration budget.
//!
//! Parameters are kept in their natural domains by projection after each
//! Adam step (no log/sigmoid reparameterization), which keeps the
//! analytic gradients directly checkable against finite differences.
//! Runs are bit-reproducible given (target, init, config, seed); nothing
//! inside a fit is threaded.

use crate::adc::{accumulate_step, refine, AdcConfig, DensifyAccumulator};
use crate::error::CoreError;
use crate::gaussian::{Gaussian2D, GaussianSet, Vec2};
use crate::grad::positional_gradients;
use crate::metrics::{psnr, ssim};
use crate::raster::Raster;
use crate::render::{loss, render};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Scalars per primitive: mu(2) + scales(2) + theta + color(3) + opacity.
const PARAMS_PER_PRIMITIVE: usize = 9;

/// Projection floors keeping parameters inside their invariant domains.
const MIN_SCALE: f64 = 1e-3;
const MIN_OPACITY: f64 = 1e-4;

/// Per-parameter-group learning rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupLrs {
    pub mu: f64,
    pub scales: f64,
    pub theta: f64,
    pub color: f64,
    pub opacity: f64,
}

impl Default for GroupLrs {
    fn default() -> Self {
        Self {
            mu: 2e-2,
            scales: 5e-3,
            theta: 1e-3,
            color: 1e-2,
            opacity: 5e-2,
        }
    }
}

impl GroupLrs {
    fn validate(&self) -> Result<(), CoreError> {
        let all = [self.mu, self.scales, self.theta, self.color, self.opacity];
        if all.iter().any(|lr| !lr.is_finite() || *lr <= 0.0) {
            return Err(CoreError::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        Ok(())
    }

    fn per_scalar(&self) -> [f64; PARAMS_PER_PRIMITIVE] {
        [
            self.mu,
            self.mu,
            self.scales,
            self.scales,
            self.theta,
            self.color,
            self.color,
            self.color,
            self.opacity,
        ]
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lrs: GroupLrs,
    /// Density control; `None` trains with a fixed set.
    pub adc: Option<AdcConfig>,
    pub seed: u64,
    /// Checkpoint cadence for the report (0 = final iteration only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iters: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lrs: GroupLrs::default(),
            adc: Some(AdcConfig::default()),
            seed: 0,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.total_iters == 0 {
            return Err(CoreError::InvalidConfig("total_iters must be >= 1".into()));
        }
        self.lrs.validate()?;
        if let Some(adc) = &self.adc {
            adc.validate()?;
        }
        Ok(())
    }
}

/// Metrics snapshot at one iteration. Loss/PSNR/SSIM describe the state
/// entering the iteration; the primitive count is post-refinement, so the
/// count trajectory only moves at refinement iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub primitives: usize,
}

/// Fit result. `wall_time_s` is the only field excluded from
/// reproducibility comparisons.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub checkpoints: Vec<Checkpoint>,
    pub final_set: GaussianSet,
    pub final_loss: f64,
    pub wall_time_s: f64,
}

/// One Adam update of a single scalar. `t` is the 1-based step count.
/// Returns the updated parameter; moments are updated in place.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    param: f64,
    grad: f64,
    m: &mut f64,
    v: &mut f64,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> f64 {
    *m = beta1 * *m + (1.0 - beta1) * grad;
    *v = beta2 * *v + (1.0 - beta2) * grad * grad;
    let m_hat = *m / (1.0 - beta1.powi(t as i32));
    let v_hat = *v / (1.0 - beta2.powi(t as i32));
    param - lr * m_hat / (v_hat.sqrt() + epsilon)
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<[f64; PARAMS_PER_PRIMITIVE]>,
    v: Vec<[f64; PARAMS_PER_PRIMITIVE]>,
    t: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![[0.0; PARAMS_PER_PRIMITIVE]; n],
            v: vec![[0.0; PARAMS_PER_PRIMITIVE]; n],
            t: 0,
        }
    }

    /// After refinement, survivors keep their moments and new primitives
    /// start cold; the global step counter is retained.
    fn remap(&mut self, origins: &[Option<usize>]) {
        let mut m = Vec::with_capacity(origins.len());
        let mut v = Vec::with_capacity(origins.len());
        for origin in origins {
            match origin {
                Some(i) => {
                    m.push(self.m[*i]);
                    v.push(self.v[*i]);
                }
                None => {
                    m.push([0.0; PARAMS_PER_PRIMITIVE]);
                    v.push([0.0; PARAMS_PER_PRIMITIVE]);
                }
            }
        }
        self.m = m;
        self.v = v;
    }
}

fn pack(g: &Gaussian2D) -> [f64; PARAMS_PER_PRIMITIVE] {
    [
        g.mu().x,
        g.mu().y,
        g.scales().x,
        g.scales().y,
        g.theta(),
        g.color()[0],
        g.color()[1],
        g.color()[2],
        g.opacity(),
    ]
}

/// Rebuilds a primitive from raw parameters, projecting each group back
/// into its domain (scales and opacity floored, intensity clamped to
/// [0,1]; theta is canonicalized by construction).
fn unpack_projected(p: [f64; PARAMS_PER_PRIMITIVE]) -> Gaussian2D {
    Gaussian2D::new(
        Vec2::new(p[0], p[1]),
        Vec2::new(p[2].max(MIN_SCALE), p[3].max(MIN_SCALE)),
        p[4],
        [
            p[5].clamp(0.0, 1.0),
            p[6].clamp(0.0, 1.0),
            p[7].clamp(0.0, 1.0),
        ],
        p[8].clamp(MIN_OPACITY, 1.0),
    )
}

/// Runs the training loop. See [`fit_with_observer`] for the refinement
/// hook variant.
pub fn fit(target: &Raster, init: &GaussianSet, cfg: &TrainConfig) -> Result<FitReport, CoreError> {
    fit_with_observer(target, init, cfg, |_, _| {})
}

/// Like [`fit`], but calls `observer(iteration, accumulator)` right
/// before every refinement round, while the window sums are still intact.
pub fn fit_with_observer(
    target: &Raster,
    init: &GaussianSet,
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &DensifyAccumulator),
) -> Result<FitReport, CoreError> {
    cfg.validate()?;
    if init.is_empty() {
        return Err(CoreError::InvalidConfig("initial set is empty".into()));
    }
    let start = Instant::now();
    let (w, h, c) = (target.width(), target.height(), target.channels());
    let mut set = init.clone();
    let mut adam = AdamState::new(set.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_candidates = cfg.adc.as_ref().map(|a| a.candidate_count()).unwrap_or(3);
    let mut acc = DensifyAccumulator::new(set.len(), n_candidates);
    let lrs = cfg.lrs.per_scalar();
    let mut checkpoints = Vec::new();
    let mut final_loss = f64::NAN;

    for k in 1..=cfg.total_iters {
        let out = render(&set, w, h, c);
        let (total_loss, _) = loss(&out.image, target)?;
        if !total_loss.is_finite() {
            return Err(CoreError::Diverged {
                iter: k,
                loss: total_loss,
            });
        }
        final_loss = total_loss;
        let gbuf = positional_gradients(&out, target, &set);

        if cfg.adc.is_some() {
            accumulate_step(&mut acc, &gbuf, &set, w);
        }

        // Adam update with projection.
        adam.t += 1;
        for i in 0..set.len() {
            let d = &gbuf.dense[i];
            let grads = [
                d.mu.x,
                d.mu.y,
                d.scales.x,
                d.scales.y,
                d.theta,
                d.color[0],
                d.color[1],
                d.color[2],
                d.opacity,
            ];
            let mut params = pack(set.get(i));
            for s in 0..PARAMS_PER_PRIMITIVE {
                params[s] = adam_step(
                    params[s],
                    grads[s],
                    &mut adam.m[i][s],
                    &mut adam.v[i][s],
                    adam.t,
                    lrs[s],
                    cfg.beta1,
                    cfg.beta2,
                    cfg.epsilon,
                );
            }
            set.set_item(i, unpack_projected(params));
        }

        if let Some(adc) = &cfg.adc {
            let within_densify =
                k as f64 <= adc.densify_until_frac * cfg.total_iters as f64;
            if within_densify && k % adc.refine_period == 0 && !set.is_empty() {
                observer(k, &acc);
                let outcome = refine(&mut set, &mut acc, adc, &mut rng);
                adam.remap(&outcome.origins);
            }
        }

        let due = cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0;
        if due || k == cfg.total_iters {
            checkpoints.push(Checkpoint {
                iteration: k,
                loss: total_loss,
                psnr: psnr(&out.image, target),
                ssim: ssim(&out.image, target),
                primitives: set.len(),
            });
        }
    }

    Ok(FitReport {
        checkpoints,
        final_set: set,
        final_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adc::SplitCriterion;

    fn single_gaussian_set() -> GaussianSet {
        GaussianSet::from_gaussians(vec![Gaussian2D::new_gray(
            Vec2::new(12.0, 12.0),
            Vec2::new(2.5, 1.5),
            0.4,
            0.8,
            0.8,
        )])
    }

    #[test]
    fn adam_zero_gradient_keeps_parameter() {
        // From rest: no gradient, no movement.
        let (mut m, mut v) = (0.0, 0.0);
        let p = adam_step(1.5, 0.0, &mut m, &mut v, 1, 1e-2, 0.9, 0.999, 1e-8);
        assert_eq!(p, 1.5);
        // Stale moments decay under zero gradients.
        let (mut m, mut v) = (0.3, 0.2);
        adam_step(1.5, 0.0, &mut m, &mut v, 5, 1e-2, 0.9, 0.999, 1e-8);
        assert!(m < 0.3 && v < 0.2);
    }

    #[test]
    fn adam_constant_gradient_update_approaches_lr() {
        let lr = 1e-2;
        let (mut m, mut v) = (0.0, 0.0);
        let mut p = 0.0;
        let mut last_delta = 0.0;
        for t in 1..=1000u64 {
            let next = adam_step(p, 3.7, &mut m, &mut v, t, lr, 0.9, 0.999, 1e-8);
            last_delta = p - next;
            p = next;
        }
        assert!(
            (last_delta - lr).abs() / lr < 0.01,
            "step magnitude {last_delta} vs lr {lr}"
        );
    }

    #[test]
    fn projection_floors_opacity() {
        let g = unpack_projected([0.0, 0.0, 1.0, 1.0, 0.0, 0.5, 0.5, 0.5, -3.0]);
        assert_eq!(g.opacity(), 1e-4);
        let g = unpack_projected([0.0, 0.0, -1.0, 1.0, 0.0, 2.0, 0.5, 0.5, 0.7]);
        assert_eq!(g.scales().x, 1e-3);
        assert_eq!(g.color()[0], 1.0);
    }

    #[test]
    fn fixed_point_stays_put() {
        let set = single_gaussian_set();
        let target = render(&set, 24, 24, 1).image;
        let cfg = TrainConfig {
            total_iters: 250,
            adc: Some(AdcConfig {
                tau_p: 1e-9,
                ..AdcConfig::default()
            }),
            checkpoint_every: 50,
            ..TrainConfig::default()
        };
        let rep = fit(&target, &set, &cfg).unwrap();
        assert_eq!(rep.final_set.len(), 1);
        assert!(rep.final_loss < 1e-20);
        // Loss non-increasing across checkpoints on the fixed point.
        for w in rep.checkpoints.windows(2) {
            assert!(w[1].loss <= w[0].loss);
        }
    }

    #[test]
    fn bit_reproducible() {
        let set = single_gaussian_set();
        let mut target = render(&set, 24, 24, 1).image;
        for j in 0..target.pixel_count() {
            target.add_at(j, 0, ((j % 7) as f64) * 0.01);
        }
        let cfg = TrainConfig {
            total_iters: 120,
            checkpoint_every: 40,
            ..TrainConfig::default()
        };
        let a = fit(&target, &set, &cfg).unwrap();
        let b = fit(&target, &set, &cfg).unwrap();
        assert_eq!(a.checkpoints, b.checkpoints);
        assert_eq!(a.final_set, b.final_set);
        assert_eq!(a.final_loss, b.final_loss);
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostics() {
        // A finite but enormous target overflows the squared loss on the
        // first forward pass.
        let set = single_gaussian_set();
        let target = Raster::from_data(24, 24, 1, vec![1e200; 24 * 24]).unwrap();
        let err = fit(&target, &set, &TrainConfig::default()).unwrap_err();
        match err {
            crate::CoreError::Diverged { iter, .. } => assert_eq!(iter, 1),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn no_refinement_after_densify_budget() {
        let set = single_gaussian_set();
        let mut target = Raster::zeros(24, 24, 1);
        for j in 0..target.pixel_count() {
            target.add_at(j, 0, ((j * 13 % 11) as f64) / 11.0);
        }
        let cfg = TrainConfig {
            total_iters: 400,
            adc: Some(AdcConfig {
                tau_p: 1e-9, // refine aggressively while allowed
                refine_period: 50,
                densify_until_frac: 0.5,
                criterion: SplitCriterion::AbsGrad,
                ..AdcConfig::default()
            }),
            checkpoint_every: 1,
            ..TrainConfig::default()
        };
        let rep = fit(&target, &set, &cfg).unwrap();
        let mut last = rep.checkpoints[0].primitives;
        for cp in &rep.checkpoints {
            if cp.iteration > 200 {
                assert_eq!(cp.primitives, last, "count changed after budget");
            }
            last = cp.primitives;
        }
        // And the count must only ever change at refinement iterations.
        let mut prev = rep.checkpoints[0].primitives;
        for cp in &rep.checkpoints[1..] {
            if cp.primitives != prev {
                assert_eq!(cp.iteration % 50, 0);
            }
            prev = cp.primitives;
        }
    }
}
