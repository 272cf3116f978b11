//! Command implementations: resolve config, run, write artifacts.

use crate::config::{RawConfig, Resolver};
use crate::ppm::{read_ppm, write_ppm};
use crate::scene::{gen_target, grid_init, moment_init_gaussian, random_init, SceneKind, SceneSpec};
use crate::toybench::{run_bench, summarize, summary_csv, BenchConfig, ALL_MODES};
use crate::CliError;
use dcsplat_core::adc::{AdcConfig, Placement, SplitCriterion};
use dcsplat_core::metrics::dc_map;
use dcsplat_core::optim::{fit, FitReport, GroupLrs, TrainConfig};
use dcsplat_core::render::render;
use dcsplat_core::{GaussianSet, Raster};
use std::fmt::Write as _;
use std::path::Path;

/// Flag-level overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub samples: Option<usize>,
    pub mode: Option<String>,
}

pub fn resolve_scene(r: &mut Resolver) -> Result<SceneSpec, CliError> {
    let kind = match r
        .choice("scene", "kind", "two_peak", &["two_peak", "k_peak", "composite"])?
        .as_str()
    {
        "two_peak" => SceneKind::TwoPeak,
        "k_peak" => SceneKind::KPeak,
        _ => SceneKind::Composite,
    };
    let spec = SceneSpec {
        kind,
        width: r.usize("scene", "width", 44)?,
        height: r.usize("scene", "height", 44)?,
        seed: r.u64("scene", "seed", 0)?,
        peaks: r.usize("scene", "peaks", 3)?,
        sigma: (
            r.f64("scene", "sigma_min", 1.2)?,
            r.f64("scene", "sigma_max", 2.6)?,
        ),
        amplitude: (
            r.f64("scene", "amp_min", 0.7)?,
            r.f64("scene", "amp_max", 1.0)?,
        ),
        margin: r.f64("scene", "margin", 7.0)?,
        min_sep_factor: r.f64("scene", "min_sep_factor", 3.0)?,
        max_sep_factor: r.f64("scene", "max_sep_factor", 4.0)?,
    };
    if spec.width == 0 || spec.height == 0 {
        return Err(CliError::Usage("[scene] dims must be positive".into()));
    }
    if spec.sigma.0 <= 0.0 || spec.sigma.1 < spec.sigma.0 {
        return Err(CliError::Usage("[scene] sigma range is invalid".into()));
    }
    Ok(spec)
}

fn resolve_lrs(r: &mut Resolver) -> Result<GroupLrs, CliError> {
    Ok(GroupLrs {
        mu: r.f64("train", "lr_mu", 2e-2)?,
        scales: r.f64("train", "lr_scales", 5e-3)?,
        theta: r.f64("train", "lr_theta", 1e-3)?,
        color: r.f64("train", "lr_intensity", 1e-2)?,
        opacity: r.f64("train", "lr_opacity", 5e-2)?,
    })
}

fn parse_criterion(s: &str) -> SplitCriterion {
    match s {
        "grad_norm" => SplitCriterion::GradNorm,
        "abs_grad" => SplitCriterion::AbsGrad,
        _ => SplitCriterion::DcWeighted,
    }
}

pub fn parse_placement(s: &str) -> Option<Placement> {
    match s {
        "random" => Some(Placement::Random),
        "argmin" => Some(Placement::SparseArgmin),
        "dense" => Some(Placement::DenseArgmin),
        "regression" => Some(Placement::Regression),
        _ => None,
    }
}

pub fn resolve_train(r: &mut Resolver, ov: &Overrides) -> Result<TrainConfig, CliError> {
    let mut seed = r.u64("train", "seed", 0)?;
    if let Some(s) = ov.seed {
        seed = s;
        r.override_value("train", "seed", s.to_string());
    }
    let lrs = resolve_lrs(r)?;
    let adc_enabled = r.bool("adc", "enabled", true)?;
    let mut placement_str = r.choice(
        "adc",
        "placement",
        "regression",
        &["random", "argmin", "dense", "regression"],
    )?;
    if let Some(mode) = &ov.mode {
        if parse_placement(mode).is_none() {
            return Err(CliError::Usage(format!(
                "--mode {mode} is not a placement (use random|argmin|dense|regression)"
            )));
        }
        placement_str = mode.clone();
        r.override_value("adc", "placement", mode.clone());
    }
    let adc = AdcConfig {
        tau_p: r.f64("adc", "tau_p", 0.05)?,
        tau_s: r.f64("adc", "tau_s", 3.0)?,
        prune_opacity: r.f64("adc", "prune_opacity", 0.005)?,
        refine_period: r.usize("adc", "refine_period", 100)?,
        densify_until_frac: r.f64("adc", "densify_until", 0.5)?,
        n_candidates: r.usize("adc", "n_candidates", 5)?,
        dense_n: r.usize("adc", "dense_n", 60)?,
        criterion: parse_criterion(&r.choice(
            "adc",
            "criterion",
            "dc_weighted",
            &["grad_norm", "abs_grad", "dc_weighted"],
        )?),
        placement: parse_placement(&placement_str).unwrap(),
        random_scale_div: r.f64("adc", "random_scale_div", 1.6)?,
    };
    let cfg = TrainConfig {
        total_iters: r.usize("train", "total_iters", 1000)?,
        beta1: r.f64("train", "beta1", 0.9)?,
        beta2: r.f64("train", "beta2", 0.999)?,
        epsilon: r.f64("train", "epsilon", 1e-8)?,
        lrs,
        adc: if adc_enabled { Some(adc) } else { None },
        seed,
        checkpoint_every: r.usize("train", "checkpoint_every", 100)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve_init(r: &mut Resolver, target: &Raster) -> Result<GaussianSet, CliError> {
    let kind = r.choice("init", "kind", "com", &["com", "grid", "random"])?;
    let intensity = r.f64("init", "intensity", 0.5)?;
    let opacity = r.f64("init", "opacity", 0.8)?;
    let (w, h) = (target.width(), target.height());
    match kind.as_str() {
        "com" => Ok(GaussianSet::from_gaussians(vec![moment_init_gaussian(
            target,
        )])),
        "grid" => {
            let nx = r.usize("init", "grid_nx", 4)?.max(1);
            let ny = r.usize("init", "grid_ny", 4)?.max(1);
            let default_sigma =
                ((w as f64 / nx as f64).min(h as f64 / ny as f64) / 3.0).max(1.0);
            let sigma = r.f64("init", "scale", default_sigma)?;
            Ok(grid_init(w, h, nx, ny, sigma, intensity, opacity))
        }
        _ => {
            let count = r.usize("init", "count", 16)?.max(1);
            let sigma = r.f64("init", "scale", 2.0)?;
            let seed = r.u64("init", "seed", 1)?;
            Ok(random_init(w, h, count, sigma, intensity, opacity, seed))
        }
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn fit_csv(report: &FitReport) -> String {
    let mut s = String::from("iteration,loss,psnr,ssim,primitives\n");
    for c in &report.checkpoints {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.iteration, c.loss, c.psnr, c.ssim, c.primitives
        );
    }
    s
}

/// `fit`: run a full training loop against the configured scene and write
/// render/target/residual images, the checkpoint table, and the resolved
/// config.
pub fn cmd_fit(config_path: &Path, out: &Path, ov: &Overrides) -> Result<(), CliError> {
    let raw = RawConfig::from_file(config_path)?;
    let mut r = Resolver::new(&raw);
    let run_id = r.string("", "run_id", "run");
    let spec = resolve_scene(&mut r)?;
    let target = gen_target(&spec)?;
    let init = resolve_init(&mut r, &target)?;
    let train = resolve_train(&mut r, ov)?;
    r.reject_unknown_keys()?;
    ensure_out_dir(out)?;

    let report = fit(&target, &init, &train)?;
    let image = render(
        &report.final_set,
        target.width(),
        target.height(),
        target.channels(),
    )
    .image;

    let mut residual = Raster::zeros(target.width(), target.height(), target.channels());
    for j in 0..target.pixel_count() {
        for k in 0..target.channels() {
            residual.add_at(j, k, (image.at(j, k) - target.at(j, k)).abs());
        }
    }

    write_ppm(&out.join(format!("{run_id}.target.ppm")), &target)?;
    write_ppm(&out.join(format!("{run_id}.render.ppm")), &image)?;
    write_ppm(&out.join(format!("{run_id}.residual.ppm")), &residual)?;
    write_text(&out.join(format!("{run_id}.fit.csv")), &fit_csv(&report))?;
    write_text(&out.join(format!("{run_id}.resolved.conf")), &r.echo())?;

    let last = report.checkpoints.last();
    println!(
        "fit {run_id}: {} primitives, loss {:.6e}, psnr {:.2} dB, ssim {:.4}, {:.2}s",
        report.final_set.len(),
        report.final_loss,
        last.map(|c| c.psnr).unwrap_or(f64::NAN),
        last.map(|c| c.ssim).unwrap_or(f64::NAN),
        report.wall_time_s
    );
    Ok(())
}

/// `render`: generate the configured scene target and write it out.
pub fn cmd_render(config_path: &Path, out: &Path, ov: &Overrides) -> Result<(), CliError> {
    let raw = RawConfig::from_file(config_path)?;
    let mut r = Resolver::new(&raw);
    let run_id = r.string("", "run_id", "run");
    let mut spec = resolve_scene(&mut r)?;
    if let Some(s) = ov.seed {
        spec.seed = s;
        r.override_value("scene", "seed", s.to_string());
    }
    r.reject_unknown_keys()?;
    ensure_out_dir(out)?;

    let target = gen_target(&spec)?;
    write_ppm(&out.join(format!("{run_id}.target.ppm")), &target)?;
    write_text(&out.join(format!("{run_id}.resolved.conf")), &r.echo())?;
    println!(
        "render {run_id}: {}x{} target written",
        target.width(),
        target.height()
    );
    Ok(())
}

/// `dcmap`: per-pixel directional-consistency map of an image on disk.
pub fn cmd_dcmap(
    image_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let raw = match config_path {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    let mut r = Resolver::new(&raw);
    let window_radius = r.usize("dcmap", "window_radius", 7)?;
    let mag_floor = r.f64("dcmap", "mag_floor", 1e-3)?;
    r.reject_unknown_keys()?;
    ensure_out_dir(out)?;

    let image = read_ppm(image_path)?;
    let map = dc_map(&image, window_radius, mag_floor);

    let mut kappa = Raster::zeros(map.width, map.height, 1);
    let mut mask = Raster::zeros(map.width, map.height, 1);
    for j in 0..map.kappa.len() {
        if map.mask[j] {
            mask.add_at(j, 0, 1.0);
        } else {
            kappa.add_at(j, 0, map.kappa[j]);
        }
    }

    let stem = image_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");
    write_ppm(&out.join(format!("{stem}.dcmap.pgm")), &kappa)?;
    write_ppm(&out.join(format!("{stem}.dcmask.pgm")), &mask)?;

    let unmasked = map.mask.iter().filter(|m| !**m).count();
    println!(
        "dcmap {stem}: {}x{}, {} unmasked pixels, window r={window_radius}, floor={mag_floor}",
        map.width, map.height, unmasked
    );
    Ok(())
}

/// `toybench`: the randomized split-placement benchmark.
pub fn cmd_toybench(config_path: &Path, out: &Path, ov: &Overrides) -> Result<(), CliError> {
    let raw = RawConfig::from_file(config_path)?;
    let mut r = Resolver::new(&raw);
    let run_id = r.string("", "run_id", "run");
    let mut scene = resolve_scene(&mut r)?;
    if scene.kind != SceneKind::TwoPeak {
        return Err(CliError::Usage(
            "[scene] kind must be two_peak for toybench".into(),
        ));
    }

    let mut samples = r.usize("toybench", "samples", 1000)?;
    if let Some(s) = ov.samples {
        samples = s;
        r.override_value("toybench", "samples", s.to_string());
    }
    let mut jobs = r.usize("toybench", "jobs", 1)?;
    if let Some(j) = ov.jobs {
        jobs = j;
        r.override_value("toybench", "jobs", j.to_string());
    }
    let mut modes_str = r.string("toybench", "modes", "all");
    if let Some(m) = &ov.mode {
        modes_str = m.clone();
        r.override_value("toybench", "modes", m.clone());
    }
    let modes = if modes_str == "all" {
        ALL_MODES.to_vec()
    } else {
        let mut modes = Vec::new();
        for part in modes_str.split(',') {
            let p = parse_placement(part.trim()).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown mode '{part}' (use random|argmin|dense|regression or all)"
                ))
            })?;
            if !modes.contains(&p) {
                modes.push(p);
            }
        }
        modes
    };

    let mut master_seed = r.u64("toybench", "seed", 0)?;
    if let Some(s) = ov.seed {
        master_seed = s;
        r.override_value("toybench", "seed", s.to_string());
    }
    scene.seed = master_seed; // replaced per sample

    let cfg = BenchConfig {
        samples,
        jobs,
        modes,
        master_seed,
        scene,
        warmup_iters: r.usize("toybench", "warmup_iters", 150)?,
        refine_iters: r.usize("toybench", "refine_iters", 1200)?,
        cost_window: r.usize("toybench", "cost_window", 50)?,
        lrs: resolve_lrs(&mut r)?,
        n_candidates: r.usize("adc", "n_candidates", 5)?,
        dense_n: r.usize("adc", "dense_n", 60)?,
        random_scale_div: r.f64("adc", "random_scale_div", 1.6)?,
    };
    r.reject_unknown_keys()?;
    ensure_out_dir(out)?;
    write_text(&out.join(format!("{run_id}.resolved.conf")), &r.echo())?;

    let rows_path = out.join(format!("{run_id}.rows.csv"));
    let rows = run_bench(&cfg, &rows_path)?;
    let summaries = summarize(&rows, &cfg.modes);
    let summary = summary_csv(&summaries);
    write_text(&out.join(format!("{run_id}.summary.csv")), &summary)?;
    print!("{summary}");
    Ok(())
}
