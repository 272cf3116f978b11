use clap::{Parser, Subcommand};
use dcsplat_cli::runner::{cmd_dcmap, cmd_fit, cmd_render, cmd_toybench, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// 2D Gaussian-splatting experiment harness with direction-aware
/// adaptive density control.
#[derive(Parser)]
#[command(name = "dcsplat", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a Gaussian set to the configured scene and write artifacts.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the [train] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the [adc] placement: random|argmin|dense|regression.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Run the randomized split-placement benchmark.
    Toybench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the [toybench] master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (samples fan out; each fit stays sequential).
        #[arg(long)]
        jobs: Option<usize>,
        /// Sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Modes to bench: all or a comma list of
        /// random|argmin|dense|regression.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Compute the per-pixel directional-consistency map of a PPM/PGM.
    Dcmap {
        /// Input image (binary P5/P6).
        image: PathBuf,
        /// Optional config supplying the [dcmap] section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate the configured scene target and write it as PPM.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the [scene] seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors by default; this tool reserves
            // 2 for runtime failures and reports usage problems as 1.
            let _ = e.print();
            return if e.exit_code() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };

    let result = match cli.cmd {
        Cmd::Fit {
            config,
            out,
            seed,
            mode,
        } => cmd_fit(
            &config,
            &out,
            &Overrides {
                seed,
                mode,
                ..Overrides::default()
            },
        ),
        Cmd::Toybench {
            config,
            out,
            seed,
            jobs,
            samples,
            mode,
        } => cmd_toybench(
            &config,
            &out,
            &Overrides {
                seed,
                jobs,
                samples,
                mode,
            },
        ),
        Cmd::Dcmap { image, config, out } => cmd_dcmap(&image, config.as_deref(), &out),
        Cmd::Render { config, out, seed } => cmd_render(
            &config,
            &out,
            &Overrides {
                seed,
                ..Overrides::default()
            },
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
