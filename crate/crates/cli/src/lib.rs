//! `houghvp` command-line front end.
//!
//! Every command takes an optional JSON [`RunConfig`](config::RunConfig)
//! via `--config` and a `--seed` override. Input problems exit with code 2,
//! numeric or degeneracy failures with code 3.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{EvalSource, Method, VpSource};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "houghvp", version, about = "Fast Hough transform vanishing points and document rectification")]
pub struct Cli {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hough map of an image, written as a raw f32 map plus preview.
    Fht {
        input: PathBuf,
        /// H1..H4, H12 or H34.
        #[arg(long, default_value = "H12")]
        quadrant: String,
        /// Output prefix; `.f32`, `.json` and `.png` are appended.
        #[arg(long)]
        out: PathBuf,
    },
    /// Detects the horizontal and vertical vanishing points.
    DetectVp {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "classical")]
        method: Method,
        /// Directory with the two branch checkpoints.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Warps an image so both vanishing points go to infinity.
    Rectify {
        input: PathBuf,
        #[command(flatten)]
        vps: VpArgs,
        /// Output image (.png or .pgm); a `.json` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a synthetic dataset.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains both network branches.
    Train {
        /// Dataset directory or manifest.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from the checkpoints in `--out`.
        #[arg(long)]
        resume: bool,
    },
    /// Rectification metrics over a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "classical")]
        source: EvalSource,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct VpArgs {
    /// Horizontal VP as `x,y,w`.
    #[arg(long, requires = "vp_v", allow_hyphen_values = true)]
    pub vp_h: Option<String>,
    /// Vertical VP as `x,y,w`.
    #[arg(long, requires = "vp_h", allow_hyphen_values = true)]
    pub vp_v: Option<String>,
    /// VP JSON written by `detect-vp`.
    #[arg(long, conflicts_with_all = ["vp_h", "vp_v"])]
    pub vps: Option<PathBuf>,
    /// Detect the VPs first.
    #[arg(long, conflicts_with_all = ["vp_h", "vp_v", "vps"])]
    pub auto: bool,
    #[arg(long, value_enum, default_value = "classical")]
    pub method: Method,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

impl VpArgs {
    pub fn source(&self) -> CliResult<VpSource> {
        if let (Some(h), Some(v)) = (&self.vp_h, &self.vp_v) {
            return Ok(VpSource::Inline { horizontal: commands::parse_vp(h)?, vertical: commands::parse_vp(v)? });
        }
        if let Some(p) = &self.vps {
            return Ok(VpSource::File(p.clone()));
        }
        if self.auto {
            return Ok(VpSource::Auto(self.method, self.weights.clone()));
        }
        Err(CliError::input("rectify needs --vp-h/--vp-v, --vps or --auto"))
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fht { input, quadrant, out } => {
            let h = commands::cmd_fht(input, quadrant, out, &cfg)?;
            println!("{} map {}x{} written to {}", h.quadrant, h.dims[0], h.dims[1], out.display());
        }
        Command::DetectVp { input, method, weights, out } => {
            print_json(&commands::cmd_detect_vp(input, *method, weights.as_deref(), out.as_deref(), &cfg)?)?;
        }
        Command::Rectify { input, vps, out } => {
            let r = commands::cmd_rectify(input, &vps.source()?, out, &cfg)?;
            print_json(&serde_json::json!({ "homography": r.homography, "output_homography": r.output_homography }))?;
        }
        Command::Synth { count, out } => {
            let m = commands::cmd_synth(*count, out, &cfg)?;
            println!("{} samples written to {}", m.count, out.display());
        }
        Command::Train { data, out, resume } => {
            let r = commands::cmd_train(data, out, *resume, &cfg)?;
            for b in &r.branches {
                println!(
                    "{}: loss {:.6} -> {:.6}, held-out error {} -> {}",
                    b.branch.name(),
                    b.initial_loss,
                    b.final_loss,
                    fmt_deg(b.untrained_error_deg),
                    fmt_deg(b.trained_error_deg)
                );
            }
        }
        Command::Eval { data, source, weights, out } => {
            let r = commands::cmd_eval(data, *source, weights.as_deref(), out.as_deref(), &cfg)?;
            print_json(&serde_json::json!({
                "documents": r.documents,
                "dropped_outside": r.dropped_outside,
                "failed": r.failed,
                "before": r.before,
                "after": r.after,
                "vp_error": r.vp_error,
            }))?;
        }
    }
    Ok(())
}

fn fmt_deg(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |d| format!("{d:.2} deg"))
}
