//! Temporary revalidation (deleted before finalizing).
use dcsplat_cli::scene::{gen_target, moment_init_gaussian, SceneSpec};
use dcsplat_cli::toybench::{run_sample, summarize, BenchConfig, ALL_MODES};
use dcsplat_core::adc::{criterion_value, AdcConfig, SplitCriterion};
use dcsplat_core::optim::{fit_with_observer, TrainConfig};
use dcsplat_core::GaussianSet;
use rayon::prelude::*;

#[test]
#[ignore]
fn reval_orderings() {
    let cfg = BenchConfig {
        samples: 600,
        jobs: 2,
        modes: ALL_MODES.to_vec(),
        master_seed: 0,
        scene: SceneSpec::two_peak(44, 44, 0),
        warmup_iters: 150,
        refine_iters: 1200,
        cost_window: 50,
        lrs: Default::default(),
        n_candidates: 5,
        dense_n: 60,
        random_scale_div: 1.6,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let rows: Vec<_> = pool.install(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map(|s| run_sample(&cfg, s).unwrap())
            .collect()
    });
    for m in summarize(&rows, &cfg.modes) {
        println!("{:?} mean {:.5} median {:.5} iqr {:.5}", m.mode, m.mean_ssim, m.median_ssim, m.iqr_ssim);
    }
}

#[test]
#[ignore]
fn reval_behavioral_dcc() {
    let cfg = TrainConfig {
        total_iters: 500,
        adc: Some(AdcConfig { tau_p: 1e18, ..AdcConfig::default() }),
        checkpoint_every: 0,
        seed: 3,
        ..TrainConfig::default()
    };
    for seed in [7u64, 21, 40, 99, 123, 4, 5] {
        let spec = SceneSpec::two_peak(44, 44, seed);
        let target = gen_target(&spec).unwrap();
        let init = GaussianSet::from_gaussians(vec![moment_init_gaussian(&target)]);
        let mut mins = f64::INFINITY;
        fit_with_observer(&target, &init, &cfg, |_, acc| {
            for e in &acc.entries {
                if e.nu > 0 {
                    mins = mins.min(criterion_value(e, SplitCriterion::DcWeighted));
                }
            }
        })
        .unwrap();
        println!("seed {seed}: min window DCC {mins:.3}");
    }
}
