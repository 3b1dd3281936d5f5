use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use awtv::io::{
    cmd_evaluate, cmd_reconstruct, cmd_render, cmd_simulate, cmd_stability, metrics_csv, sweep_csv,
    MethodConfig, RunConfig,
};
use awtv::pipelines::{MethodKind, SUMMARY_HEADER};
use awtv::Result;

/// Few-view fan-beam CT with adaptive weighted total variation.
#[derive(Parser, Debug)]
#[command(name = "awtv", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configuration's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configuration's preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write ground truth, clean and noisy sinograms and the FBP image.
    Simulate,
    /// Run one reconstruction method.
    Reconstruct {
        /// Method name, replacing the configured one.
        #[arg(long)]
        method: Option<String>,
    },
    /// Compare two image rasters (RE, PSNR, SSIM).
    Evaluate {
        x: PathBuf,
        reference: PathBuf,
        /// Also write the metrics CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the configured stability sweep.
    Stability,
    /// Render a raster as an 8-bit grayscale PNG.
    Render {
        raster: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        /// Solver history CSV to convert into an RE-vs-iteration curve.
        #[arg(long)]
        history: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(p) = &cli.preset {
        cfg.preset = Some(p.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => {
            let s = cmd_simulate(&load_config(cli)?)?;
            println!("noise_ratio={:.6}", s.noise_ratio);
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Reconstruct { method } => {
            let mut cfg = load_config(cli)?;
            if let Some(name) = method {
                let kind: MethodKind = name.parse()?;
                match cfg.method.as_mut() {
                    Some(m) => m.kind = kind,
                    None => cfg.method = Some(MethodConfig::new(kind)),
                }
            }
            let report = cmd_reconstruct(&cfg)?;
            println!("{SUMMARY_HEADER}\n{}", report.summary_row());
            for f in &report.artifacts {
                println!("wrote {}", f.display());
            }
        }
        Command::Evaluate { x, reference, csv } => {
            let m = cmd_evaluate(x, reference, csv.as_deref())?;
            print!("{}", metrics_csv(&m));
        }
        Command::Stability => {
            let (points, path) = cmd_stability(&load_config(cli)?)?;
            print!("{}", sweep_csv(&points));
            println!("wrote {}", path.display());
        }
        Command::Render { raster, png, history } => {
            for f in cmd_render(raster, png.as_deref(), history.as_deref())? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("awtv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
