//! Adaptive density control: criterion accumulation over the refinement
//! window, split/clone/prune decisions, and split placement.
//!
//! Three split criteria are supported, all averaged over the visibility
//! count ν of the window:
//!   * `GradNorm`: mean ‖Σ_j g_{i,j}‖, the norm of the summed positional
//!     gradient (cancels under symmetric residuals);
//!   * `AbsGrad`: mean ‖ĝ_i‖ with ĝ_i = Σ_j |g_{i,j}| componentwise, the
//!     homodirectional accumulation immune to such cancellation;
//!   * `DcWeighted`: mean (1 − κ_i)·‖ĝ_i‖, where κ_i is the directional
//!     consistency of the per-pixel gradients. Directionally coherent
//!     primitives (κ ≈ 1) are cheap to fix by moving, so they are kept
//!     whole.
//!
//! Split placement either samples candidate cut positions along the
//! principal axis and minimizes the per-side (1 − κ)·‖ĝ‖ cost (argmin at
//! sparse or dense resolution, or a quadratic regression through the
//! sparse samples), or falls back to the classic random placement.

use crate::error::CoreError;
use crate::gaussian::{Gaussian2D, GaussianSet, Vec2};
use crate::grad::GradBuffer;
use crate::raster::Raster;
use rand::Rng;
use rand_distr::StandardNormal;

/// Which running sum drives the split/clone decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    GradNorm,
    AbsGrad,
    DcWeighted,
}

/// How split children are placed along the principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Random,
    SparseArgmin,
    DenseArgmin,
    Regression,
}

/// Density-control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    /// Criterion threshold above which a primitive is refined.
    pub tau_p: f64,
    /// Max-scale threshold (pixels): larger splits, smaller clones.
    pub tau_s: f64,
    /// Primitives below this opacity are pruned at refinement time.
    pub prune_opacity: f64,
    /// Refine every this many steps.
    pub refine_period: usize,
    /// Fraction of the total iterations after which densification halts.
    pub densify_until_frac: f64,
    /// Candidate split positions for sparse argmin / regression (odd).
    pub n_candidates: usize,
    /// Candidate count for dense argmin (rounded up to odd at use).
    pub dense_n: usize,
    pub criterion: SplitCriterion,
    pub placement: Placement,
    /// Scale divisor for randomly placed children.
    pub random_scale_div: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            tau_p: 0.05,
            tau_s: 3.0,
            prune_opacity: 0.005,
            refine_period: 100,
            densify_until_frac: 0.5,
            n_candidates: 5,
            dense_n: 60,
            criterion: SplitCriterion::DcWeighted,
            placement: Placement::Regression,
            random_scale_div: 1.6,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.n_candidates < 3 || self.n_candidates.is_multiple_of(2) {
            return Err(CoreError::InvalidConfig(format!(
                "n_candidates must be odd and >= 3, got {}",
                self.n_candidates
            )));
        }
        if self.dense_n < 3 {
            return Err(CoreError::InvalidConfig("dense_n must be >= 3".into()));
        }
        if !(self.tau_p > 0.0 && self.tau_s > 0.0) {
            return Err(CoreError::InvalidConfig("thresholds must be positive".into()));
        }
        if !(self.densify_until_frac > 0.0 && self.densify_until_frac <= 1.0) {
            return Err(CoreError::InvalidConfig(
                "densify_until_frac must be in (0, 1]".into(),
            ));
        }
        if self.refine_period == 0 {
            return Err(CoreError::InvalidConfig("refine_period must be >= 1".into()));
        }
        if self.random_scale_div <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "random_scale_div must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Effective candidate count for the configured placement. The dense
    /// count is rounded up to odd so candidates stay symmetric around the
    /// center.
    pub fn candidate_count(&self) -> usize {
        match self.placement {
            Placement::DenseArgmin => self.dense_n | 1,
            _ => self.n_candidates,
        }
    }
}

/// Per-primitive running window sums.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumEntry {
    /// Steps in which the primitive's footprint was nonempty.
    pub nu: u64,
    /// Σ (1 − κ)·‖ĝ‖ over visible steps.
    pub dcc_sum: f64,
    /// Σ ‖ĝ‖ over visible steps.
    pub abs_sum: f64,
    /// Σ ‖Σ_j g_{i,j}‖ over visible steps.
    pub mag_sum: f64,
    /// Per-candidate split-cost sums, ascending along the principal axis.
    pub split_costs: Vec<f64>,
}

impl AccumEntry {
    fn new(n_candidates: usize) -> Self {
        Self {
            nu: 0,
            dcc_sum: 0.0,
            abs_sum: 0.0,
            mag_sum: 0.0,
            split_costs: vec![0.0; n_candidates],
        }
    }
}

/// Window accumulator, aligned with the set order. Must be reset whenever
/// set membership changes; `refine` does this itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DensifyAccumulator {
    pub entries: Vec<AccumEntry>,
    n_candidates: usize,
}

impl DensifyAccumulator {
    pub fn new(n_primitives: usize, n_candidates: usize) -> Self {
        Self {
            entries: (0..n_primitives)
                .map(|_| AccumEntry::new(n_candidates))
                .collect(),
            n_candidates,
        }
    }

    pub fn reset(&mut self, n_primitives: usize) {
        self.entries = (0..n_primitives)
            .map(|_| AccumEntry::new(self.n_candidates))
            .collect();
    }
}

/// Circular mean C of the given direction-bearing 2-vectors and its norm
/// κ = ‖C‖ ∈ [0, 1]. Callers exclude zero-magnitude vectors (a zero
/// gradient carries no direction). An empty input yields κ = 1: a region
/// with no directional evidence exerts no split pressure.
pub fn directional_consistency(grads: &[Vec2]) -> (Vec2, f64) {
    if grads.is_empty() {
        return (Vec2::zeros(), 1.0);
    }
    let mut sum = Vec2::zeros();
    for g in grads {
        sum += g / g.norm();
    }
    let c = sum / grads.len() as f64;
    (c, c.norm().min(1.0))
}

/// The window value a criterion compares against τ_p: the selected
/// running sum divided by the visibility count (0 if never visible).
pub fn criterion_value(entry: &AccumEntry, criterion: SplitCriterion) -> f64 {
    if entry.nu == 0 {
        return 0.0;
    }
    let sum = match criterion {
        SplitCriterion::GradNorm => entry.mag_sum,
        SplitCriterion::AbsGrad => entry.abs_sum,
        SplitCriterion::DcWeighted => entry.dcc_sum,
    };
    sum / entry.nu as f64
}

/// Folds one step's gradients into the window sums. Primitives with an
/// empty footprint are untouched.
pub fn accumulate_step(
    acc: &mut DensifyAccumulator,
    gbuf: &GradBuffer,
    set: &GaussianSet,
    width: usize,
) {
    assert_eq!(acc.entries.len(), set.len(), "accumulator out of sync");
    let n_candidates = acc.n_candidates;
    for i in 0..set.len() {
        let pix = &gbuf.per_pixel[i];
        if pix.is_empty() {
            continue;
        }
        let entry = &mut acc.entries[i];
        entry.nu += 1;

        let dirs: Vec<Vec2> = pix
            .iter()
            .map(|&(_, g)| g)
            .filter(|g| g.norm() > 0.0)
            .collect();
        let (_, kappa) = directional_consistency(&dirs);

        let mut ghat = Vec2::zeros();
        let mut gsum = Vec2::zeros();
        for &(_, g) in pix {
            ghat += g.abs();
            gsum += g;
        }
        let ghat_norm = ghat.norm();
        entry.dcc_sum += (1.0 - kappa) * ghat_norm;
        entry.abs_sum += ghat_norm;
        entry.mag_sum += gsum.norm();

        let costs = eval_split_costs(set.get(i), n_candidates, pix, width);
        for (slot, c) in entry.split_costs.iter_mut().zip(costs) {
            *slot += c;
        }
    }
}

/// Normalized candidate positions along the 3σ principal segment:
/// x_i = 0.5 + i/(N+1) for i = −⌊N/2⌋..⌊N/2⌋, in ascending order.
pub fn candidate_positions(n: usize) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "candidate count must be odd and >= 3");
    let k = (n / 2) as i64;
    (-k..=k)
        .map(|i| 0.5 + i as f64 / (n as f64 + 1.0))
        .collect()
}

/// Evaluates the split cost at `n` candidate cut positions sampled
/// symmetrically along the primitive's principal axis (diameter 6·S(a),
/// spacing d/(N+1)). Returns costs in ascending candidate order; an empty
/// gradient entry yields all zeros.
pub fn eval_split_costs(
    g: &Gaussian2D,
    n: usize,
    pix_grads: &[(usize, Vec2)],
    width: usize,
) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "candidate count must be odd and >= 3");
    let a = g.principal_axis();
    let p = g.axis_dir(a);
    let d = 6.0 * g.scales()[a];
    let x_end = g.mu() + p * (0.5 * d);
    let delta = d / (n as f64 + 1.0);
    let k = (n / 2) as i64;
    (-k..=k)
        .map(|i| cost_at(g.mu() + p * (i as f64 * delta), x_end, pix_grads, width))
        .collect()
}

/// Cost of cutting at `x_k`: pixels are partitioned by the sign of
/// (x_end − x_k)·(x_pixel − x_k) (boundary pixels go right), and each
/// side contributes (1 − κ_side)·‖ĝ_side‖. Zero-magnitude gradients
/// carry neither direction nor weight and are skipped.
pub fn cost_at(x_k: Vec2, x_end: Vec2, pix_grads: &[(usize, Vec2)], width: usize) -> f64 {
    let v_axis = x_end - x_k;
    let mut left: Vec<Vec2> = Vec::new();
    let mut right: Vec<Vec2> = Vec::new();
    let mut ghat_l = Vec2::zeros();
    let mut ghat_r = Vec2::zeros();
    for &(j, g) in pix_grads {
        if g.norm() == 0.0 {
            continue;
        }
        let v_pix = Raster::pixel_center(j, width) - x_k;
        if v_axis.dot(&v_pix) < 0.0 {
            left.push(g);
            ghat_l += g.abs();
        } else {
            right.push(g);
            ghat_r += g.abs();
        }
    }
    let (_, kappa_l) = directional_consistency(&left);
    let (_, kappa_r) = directional_consistency(&right);
    (1.0 - kappa_l) * ghat_l.norm() + (1.0 - kappa_r) * ghat_r.norm()
}

/// Selects the normalized split position from window-accumulated
/// candidate costs.
///
/// Argmin modes return the minimal-cost candidate position (ties prefer
/// the candidate closest to 0.5, then the lower index). Regression fits a
/// least-squares quadratic through (x_i, J_i) and returns its vertex when
/// it opens upward and lies within the sampled range, else falls back to
/// the discrete argmin. `Random` placement never reaches this function;
/// it is treated as argmin for completeness.
pub fn select_x_opt(costs: &[f64], placement: Placement) -> f64 {
    let n = costs.len();
    let xs = candidate_positions(n);
    match placement {
        Placement::Regression => {
            regression_vertex(&xs, costs).unwrap_or_else(|| xs[argmin_centered(costs, &xs)])
        }
        _ => xs[argmin_centered(costs, &xs)],
    }
}

fn argmin_centered(costs: &[f64], xs: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..costs.len() {
        let better = costs[i] < costs[best]
            || (costs[i] == costs[best]
                && (xs[i] - 0.5).abs() < (xs[best] - 0.5).abs());
        if better {
            best = i;
        }
    }
    best
}

/// Vertex of the least-squares parabola through (x_i, J_i), if it is a
/// minimum inside the sampled range. Solved in coordinates centered on
/// 0.5 where the symmetric design makes the normal equations decouple
/// (odd moments vanish).
fn regression_vertex(xs: &[f64], costs: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let (mut m2, mut m4) = (0.0, 0.0);
    let (mut sj, mut stj, mut st2j) = (0.0, 0.0, 0.0);
    for (&x, &j) in xs.iter().zip(costs) {
        let t = x - 0.5;
        let t2 = t * t;
        m2 += t2;
        m4 += t2 * t2;
        sj += j;
        stj += t * j;
        st2j += t2 * j;
    }
    let b = stj / m2;
    let det = m4 * n - m2 * m2;
    let a = (n * st2j - m2 * sj) / det;
    if a.is_nan() || a <= 0.0 {
        return None;
    }
    let t_vertex = -b / (2.0 * a);
    let half_range = (xs[xs.len() - 1] - xs[0]) / 2.0;
    if t_vertex.abs() <= half_range {
        Some(0.5 + t_vertex)
    } else {
        None
    }
}

/// Splits the primitive at normalized position `x_opt` along its 3σ
/// principal segment. The segment [−d/2, +d/2] is cut at fraction x_opt
/// from the negative end; each child sits at its sub-segment's centroid
/// with principal scale matching the sub-segment half-length. Opacity and
/// principal scale are redistributed in the same ratio, so both are
/// conserved exactly; rotation and color are inherited.
pub fn split_gaussian(x_opt: f64, g: &Gaussian2D) -> (Gaussian2D, Gaussian2D) {
    assert!(x_opt > 0.0 && x_opt < 1.0, "x_opt must be in (0, 1)");
    let a = g.principal_axis();
    let p = g.axis_dir(a);
    let d = 6.0 * g.scales()[a];
    let d_l = d * (1.0 - x_opt);
    let d_r = d * x_opt;
    let mu_l = g.mu() - p * (d_l / 2.0);
    let mu_r = g.mu() + p * (d_r / 2.0);
    let mut scales_l = g.scales();
    let mut scales_r = g.scales();
    scales_l[a] *= x_opt;
    scales_r[a] *= 1.0 - x_opt;
    let g_l = Gaussian2D::new(mu_l, scales_l, g.theta(), g.color(), g.opacity() * x_opt);
    let g_r = Gaussian2D::new(
        mu_r,
        scales_r,
        g.theta(),
        g.color(),
        g.opacity() * (1.0 - x_opt),
    );
    (g_l, g_r)
}

/// Classic random placement: child centers are drawn from the parent's
/// own density, scales shrink by the configured divisor, opacity is
/// copied.
pub fn random_split<R: Rng>(g: &Gaussian2D, scale_div: f64, rng: &mut R) -> (Gaussian2D, Gaussian2D) {
    let child = |rng: &mut R| {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let local = Vec2::new(g.scales().x * z0, g.scales().y * z1);
        let (sin_t, cos_t) = g.theta().sin_cos();
        let world = Vec2::new(
            cos_t * local.x - sin_t * local.y,
            sin_t * local.x + cos_t * local.y,
        );
        Gaussian2D::new(
            g.mu() + world,
            g.scales() / scale_div,
            g.theta(),
            g.color(),
            g.opacity(),
        )
    };
    (child(rng), child(rng))
}

/// Where each post-refinement primitive came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    /// `origins[new_index] = Some(old_index)` for survivors, `None` for
    /// newly created children and clone copies.
    pub origins: Vec<Option<usize>>,
    pub splits: usize,
    pub clones: usize,
    pub pruned: usize,
}

/// One refinement round: split or clone every primitive whose criterion
/// exceeds τ_p (split if its max scale exceeds τ_S, clone in place
/// otherwise), then prune low-opacity primitives, then reset the window.
pub fn refine<R: Rng>(
    set: &mut GaussianSet,
    acc: &mut DensifyAccumulator,
    cfg: &AdcConfig,
    rng: &mut R,
) -> RefineOutcome {
    assert_eq!(acc.entries.len(), set.len(), "accumulator out of sync");
    let mut staged: Vec<(Gaussian2D, Option<u64>, Option<usize>)> =
        Vec::with_capacity(set.len() + 8);
    let mut splits = 0;
    let mut clones = 0;

    for i in 0..set.len() {
        let g = *set.get(i);
        let id = set.id(i);
        let value = criterion_value(&acc.entries[i], cfg.criterion);
        if value > cfg.tau_p {
            if g.max_scale() > cfg.tau_s {
                let (g_l, g_r) = match cfg.placement {
                    Placement::Random => random_split(&g, cfg.random_scale_div, rng),
                    _ => {
                        let x_opt = select_x_opt(&acc.entries[i].split_costs, cfg.placement);
                        split_gaussian(x_opt, &g)
                    }
                };
                staged.push((g_l, None, None));
                staged.push((g_r, None, None));
                splits += 1;
            } else {
                staged.push((g, Some(id), Some(i)));
                staged.push((g, None, None)); // exact in-place duplicate
                clones += 1;
            }
        } else {
            staged.push((g, Some(id), Some(i)));
        }
    }

    let before = staged.len();
    staged.retain(|(g, _, _)| g.opacity() >= cfg.prune_opacity);
    let pruned = before - staged.len();

    let mut items = Vec::with_capacity(staged.len());
    let mut ids = Vec::with_capacity(staged.len());
    let mut origins = Vec::with_capacity(staged.len());
    for (g, id, origin) in staged {
        items.push(g);
        ids.push(id.unwrap_or_else(|| {
            let id = set.next_id;
            set.next_id += 1;
            id
        }));
        origins.push(origin);
    }
    set.items = items;
    set.ids = ids;

    acc.reset(set.len());
    RefineOutcome {
        origins,
        splits,
        clones,
        pruned,
    }
}
