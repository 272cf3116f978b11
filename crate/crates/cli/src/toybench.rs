//! Randomized split-placement benchmark.
//!
//! Per-sample protocol: render a random two-peak target, warm up a single
//! moment-matched Gaussian with Adam while accumulating candidate split
//! costs over the trailing window of warmup steps (exactly as the
//! training loop accumulates them between refinements). From that shared
//! state, force one split per placement mode and let each variant refine
//! for a fixed budget. The final SSIM isolates placement quality;
//! every mode sees the identical init, target, warmup and cost window.
//!
//! Samples are independent: seeds derive from (master seed, sample
//! index), so results are identical whatever the worker count, and rows
//! can be flushed as they complete and resumed later.

use crate::scene::{gen_target, moment_init_gaussian, SceneSpec};
use crate::{derive_seed, CliError};
use dcsplat_core::adc::{
    random_split, select_x_opt, split_gaussian, AdcConfig, Placement, SplitCriterion,
};
use dcsplat_core::metrics::{psnr, ssim};
use dcsplat_core::optim::{fit, fit_with_observer, GroupLrs, TrainConfig};
use dcsplat_core::render::render;
use dcsplat_core::{Gaussian2D, GaussianSet, Raster};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

/// Canonical mode order for CSV columns and summaries.
pub const ALL_MODES: [Placement; 4] = [
    Placement::Random,
    Placement::SparseArgmin,
    Placement::DenseArgmin,
    Placement::Regression,
];

pub fn mode_name(p: Placement) -> &'static str {
    match p {
        Placement::Random => "random",
        Placement::SparseArgmin => "argmin",
        Placement::DenseArgmin => "dense",
        Placement::Regression => "regression",
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub samples: usize,
    pub jobs: usize,
    pub modes: Vec<Placement>,
    pub master_seed: u64,
    /// Scene template; the per-sample seed replaces `seed`.
    pub scene: SceneSpec,
    pub warmup_iters: usize,
    pub refine_iters: usize,
    /// Trailing warmup steps over which candidate costs accumulate.
    pub cost_window: usize,
    pub lrs: GroupLrs,
    pub n_candidates: usize,
    pub dense_n: usize,
    pub random_scale_div: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeResult {
    pub ssim: f64,
    pub psnr: f64,
    pub primitives: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub sample: usize,
    pub seed: u64,
    pub results: Vec<(Placement, ModeResult)>,
}

pub fn csv_header(modes: &[Placement]) -> String {
    let mut s = String::from("sample,seed");
    for &m in modes {
        let n = mode_name(m);
        s.push_str(&format!(",{n}_ssim,{n}_psnr,{n}_count,{n}_time_s"));
    }
    s
}

pub fn csv_row(row: &BenchRow) -> String {
    let mut s = format!("{},{}", row.sample, row.seed);
    for (_, r) in &row.results {
        s.push_str(&format!(",{},{},{},{}", r.ssim, r.psnr, r.primitives, r.time_s));
    }
    s
}

fn train_cfg(iters: usize, seed: u64, lrs: GroupLrs) -> TrainConfig {
    TrainConfig {
        total_iters: iters,
        adc: None,
        seed,
        checkpoint_every: 0,
        lrs,
        ..TrainConfig::default()
    }
}

/// Warms up the single-primitive fit while accumulating candidate split
/// costs over the trailing `cost_window` steps, the same way the training
/// loop accumulates them across a refinement window. Thresholds are set
/// unreachable, so the trajectory is identical to a plain warmup and the
/// accumulator is purely an observer.
fn warmup_with_costs(
    cfg: &BenchConfig,
    target: &Raster,
    init: &GaussianSet,
    seed: u64,
    n_candidates: usize,
) -> Result<(Gaussian2D, Vec<f64>), CliError> {
    let window = cfg.cost_window.clamp(1, cfg.warmup_iters);
    let adc = AdcConfig {
        tau_p: f64::INFINITY,
        tau_s: f64::INFINITY,
        prune_opacity: 0.0,
        refine_period: window,
        densify_until_frac: 1.0,
        n_candidates,
        dense_n: n_candidates,
        criterion: SplitCriterion::DcWeighted,
        placement: Placement::SparseArgmin,
        random_scale_div: cfg.random_scale_div,
    };
    let train = TrainConfig {
        adc: Some(adc),
        ..train_cfg(cfg.warmup_iters, seed, cfg.lrs)
    };
    let mut costs = vec![0.0; n_candidates];
    let report = fit_with_observer(target, init, &train, |_, acc| {
        costs.clone_from(&acc.entries[0].split_costs);
    })?;
    Ok((*report.final_set.get(0), costs))
}

/// Runs one sample through every requested mode.
pub fn run_sample(cfg: &BenchConfig, sample: usize) -> Result<BenchRow, CliError> {
    let seed = derive_seed(cfg.master_seed, sample as u64);
    let mut spec = cfg.scene.clone();
    spec.seed = seed;
    let target = gen_target(&spec)?;
    let (w, h) = (target.width(), target.height());

    let init = GaussianSet::from_gaussians(vec![moment_init_gaussian(&target)]);
    let sparse_n = cfg.n_candidates;
    let dense_n = cfg.dense_n | 1;
    let needs_sparse = cfg
        .modes
        .iter()
        .any(|m| matches!(m, Placement::SparseArgmin | Placement::Regression));
    let needs_dense = cfg.modes.contains(&Placement::DenseArgmin);

    // The warmup trajectory is identical however many candidates the
    // observer tracks; run it per candidate resolution actually needed.
    let mut parent = None;
    let mut sparse_costs = Vec::new();
    let mut dense_costs = Vec::new();
    if needs_sparse {
        let (p, c) = warmup_with_costs(cfg, &target, &init, seed, sparse_n)?;
        parent = Some(p);
        sparse_costs = c;
    }
    if needs_dense {
        let (p, c) = warmup_with_costs(cfg, &target, &init, seed, dense_n)?;
        parent = Some(p);
        dense_costs = c;
    }
    let parent = match parent {
        Some(p) => p,
        None => {
            let warm = fit(&target, &init, &train_cfg(cfg.warmup_iters, seed, cfg.lrs))?;
            *warm.final_set.get(0)
        }
    };

    let mut results = Vec::with_capacity(cfg.modes.len());
    for (ord, &mode) in cfg.modes.iter().enumerate() {
        let t0 = Instant::now();
        let (g_l, g_r) = match mode {
            Placement::Random => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + ord as u64));
                random_split(&parent, cfg.random_scale_div, &mut rng)
            }
            Placement::DenseArgmin => {
                split_gaussian(select_x_opt(&dense_costs, mode), &parent)
            }
            Placement::SparseArgmin | Placement::Regression => {
                split_gaussian(select_x_opt(&sparse_costs, mode), &parent)
            }
        };
        let children = GaussianSet::from_gaussians(vec![g_l, g_r]);
        let refined = if cfg.refine_iters == 0 {
            children
        } else {
            fit(
                &target,
                &children,
                &train_cfg(cfg.refine_iters, derive_seed(seed, 2000 + ord as u64), cfg.lrs),
            )?
            .final_set
        };
        let final_image = render(&refined, w, h, 1).image;
        results.push((
            mode,
            ModeResult {
                ssim: ssim(&final_image, &target),
                psnr: psnr(&final_image, &target),
                primitives: refined.len(),
                time_s: t0.elapsed().as_secs_f64(),
            },
        ));
    }

    Ok(BenchRow {
        sample,
        seed,
        results,
    })
}

/// Runs the benchmark, appending rows to `rows_path` as samples finish
/// (resumable: samples already present in the file are skipped). Returns
/// all rows, existing and new, sorted by sample index.
pub fn run_bench(cfg: &BenchConfig, rows_path: &Path) -> Result<Vec<BenchRow>, CliError> {
    let header = csv_header(&cfg.modes);
    let mut existing: Vec<BenchRow> = Vec::new();
    let mut done: BTreeSet<usize> = BTreeSet::new();

    if rows_path.exists() {
        let text = std::fs::read_to_string(rows_path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(first) if first == header => {}
            Some(first) => {
                return Err(CliError::Usage(format!(
                    "existing {} has header '{first}' but this run needs '{header}'; \
                     use a fresh output directory",
                    rows_path.display()
                )));
            }
            None => {}
        }
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(line, &cfg.modes).map_err(|msg| {
                CliError::Usage(format!(
                    "{} line {}: {msg}",
                    rows_path.display(),
                    i + 2
                ))
            })?;
            done.insert(row.sample);
            existing.push(row);
        }
    }

    let fresh = !rows_path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(rows_path)?;
    let writer = Mutex::new(BufWriter::new(file));
    if fresh {
        writeln!(writer.lock().unwrap(), "{header}")?;
    }

    let todo: Vec<usize> = (0..cfg.samples).filter(|s| !done.contains(s)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let collected = Mutex::new(Vec::with_capacity(todo.len()));
    pool.install(|| {
        todo.par_iter().try_for_each(|&sample| -> Result<(), CliError> {
            let row = run_sample(cfg, sample)?;
            {
                let mut w = writer.lock().unwrap();
                writeln!(w, "{}", csv_row(&row))?;
                w.flush()?;
            }
            collected.lock().unwrap().push(row);
            Ok(())
        })
    })?;

    let mut rows = existing;
    rows.append(&mut collected.into_inner().unwrap());
    rows.sort_by_key(|r| r.sample);
    Ok(rows)
}

fn parse_row(line: &str, modes: &[Placement]) -> Result<BenchRow, String> {
    let fields: Vec<&str> = line.split(',').collect();
    let expect = 2 + 4 * modes.len();
    if fields.len() != expect {
        return Err(format!("expected {expect} fields, got {}", fields.len()));
    }
    let sample = fields[0].parse::<usize>().map_err(|e| e.to_string())?;
    let seed = fields[1].parse::<u64>().map_err(|e| e.to_string())?;
    let mut results = Vec::with_capacity(modes.len());
    for (i, &m) in modes.iter().enumerate() {
        let base = 2 + 4 * i;
        results.push((
            m,
            ModeResult {
                ssim: fields[base].parse().map_err(|e: std::num::ParseFloatError| e.to_string())?,
                psnr: fields[base + 1]
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| e.to_string())?,
                primitives: fields[base + 2].parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
                time_s: fields[base + 3]
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| e.to_string())?,
            },
        ));
    }
    Ok(BenchRow {
        sample,
        seed,
        results,
    })
}

/// Order statistics for one mode over the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Placement,
    pub samples: usize,
    pub mean_ssim: f64,
    pub median_ssim: f64,
    pub iqr_ssim: f64,
    pub mean_psnr: f64,
    pub mean_time_s: f64,
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summary per mode; rows are consumed in sample order so the statistics
/// do not depend on completion order.
pub fn summarize(rows: &[BenchRow], modes: &[Placement]) -> Vec<ModeSummary> {
    let mut sorted_rows: Vec<&BenchRow> = rows.iter().collect();
    sorted_rows.sort_by_key(|r| r.sample);
    modes
        .iter()
        .map(|&mode| {
            let mut ssims = Vec::with_capacity(sorted_rows.len());
            let mut psnr_sum = 0.0;
            let mut time_sum = 0.0;
            for row in &sorted_rows {
                if let Some((_, r)) = row.results.iter().find(|(m, _)| *m == mode) {
                    ssims.push(r.ssim);
                    psnr_sum += r.psnr;
                    time_sum += r.time_s;
                }
            }
            let n = ssims.len();
            let mean = ssims.iter().sum::<f64>() / n.max(1) as f64;
            let mut sorted = ssims.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ModeSummary {
                mode,
                samples: n,
                mean_ssim: mean,
                median_ssim: quantile(&sorted, 0.5),
                iqr_ssim: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
                mean_psnr: psnr_sum / n.max(1) as f64,
                mean_time_s: time_sum / n.max(1) as f64,
            }
        })
        .collect()
}

pub fn summary_csv(summaries: &[ModeSummary]) -> String {
    let mut s =
        String::from("mode,samples,mean_ssim,median_ssim,iqr_ssim,mean_psnr,mean_time_s\n");
    for m in summaries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            mode_name(m.mode),
            m.samples,
            m.mean_ssim,
            m.median_ssim,
            m.iqr_ssim,
            m.mean_psnr,
            m.mean_time_s
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }

    #[test]
    fn csv_round_trip() {
        let modes = vec![Placement::Random, Placement::Regression];
        let row = BenchRow {
            sample: 7,
            seed: 99,
            results: vec![
                (
                    Placement::Random,
                    ModeResult {
                        ssim: 0.912345678901234,
                        psnr: 31.25,
                        primitives: 2,
                        time_s: 0.125,
                    },
                ),
                (
                    Placement::Regression,
                    ModeResult {
                        ssim: 0.98,
                        psnr: 35.0,
                        primitives: 2,
                        time_s: 0.25,
                    },
                ),
            ],
        };
        let parsed = parse_row(&csv_row(&row), &modes).unwrap();
        assert_eq!(parsed, row);
    }

    #[test]
    fn summary_is_row_order_invariant() {
        let modes = vec![Placement::Regression];
        let mk = |sample, ssim| BenchRow {
            sample,
            seed: sample as u64,
            results: vec![(
                Placement::Regression,
                ModeResult {
                    ssim,
                    psnr: 30.0,
                    primitives: 2,
                    time_s: 0.1,
                },
            )],
        };
        let a = vec![mk(0, 0.9), mk(1, 0.95), mk(2, 0.99)];
        let b = vec![mk(2, 0.99), mk(0, 0.9), mk(1, 0.95)];
        assert_eq!(summarize(&a, &modes), summarize(&b, &modes));
    }
}
