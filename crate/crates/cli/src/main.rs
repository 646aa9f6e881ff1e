use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use camgeom::ambiguity::EstimatorChoice;
use camgeom::boxes::IouMode;
use camgeom::embedding::TokenAnchor;
use camgeom::FillMode;
use commands::Failure;
use config::Config;

#[derive(Parser, Debug)]
#[command(name = "camgeom", version, about = "Camera-aware geometry toolkit")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, env = "CAMGEOM_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "camgeom-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resize / shift every sample of a manifest with consistent intrinsics.
    Augment(AugmentArgs),
    /// Export the camera embedding (and the point embedding given a depth map).
    Embed(EmbedArgs),
    /// Back-project a depth map to a per-pixel point cloud.
    Unproject(UnprojectArgs),
    /// Score 3D detections against ground truth.
    Eval(EvalArgs),
    /// Run the synthetic depth-ambiguity experiments.
    Ambiguity(AmbiguityArgs),
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// JSON-lines manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub scale_min: Option<f64>,
    #[arg(long)]
    pub scale_max: Option<f64>,
    #[arg(long)]
    pub shift_range: Option<f64>,
    #[arg(long, value_enum)]
    pub pad_or_crop: Option<FillArg>,
    #[arg(long)]
    pub anisotropic: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum FillArg {
    Pad,
    Crop,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum AnchorArg {
    Center,
    Corner,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Intrinsics JSON file.
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Depth map (CGEM, dim 1); also exports the point embedding.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long, requires = "cols")]
    pub rows: Option<u32>,
    #[arg(long, requires = "rows")]
    pub cols: Option<u32>,
    #[arg(long)]
    pub patch: Option<u32>,
    #[arg(long, value_enum)]
    pub anchor: Option<AnchorArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub focal_ref: Option<f64>,
    #[arg(long)]
    pub geo_dim: Option<usize>,
    #[arg(long)]
    pub geo_period: Option<f64>,
}

#[derive(Args, Debug)]
pub struct UnprojectArgs {
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum IouModeArg {
    Oriented,
    AxisAligned,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Prediction file (raw model output or JSON list), or a directory of them.
    #[arg(long)]
    pub preds: PathBuf,
    /// Ground-truth file or directory, paired with predictions by file stem.
    #[arg(long)]
    pub truths: PathBuf,
    /// IoU threshold; repeat for several.
    #[arg(long = "iou")]
    pub iou: Vec<f64>,
    /// Class list: JSON array or one label per line.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub iou_mode: Option<IouModeArg>,
}

#[derive(Args, Debug)]
pub struct AmbiguityArgs {
    /// Experiment config JSON; replaces the config file's `ambiguity` section.
    #[arg(long)]
    pub experiment: Option<PathBuf>,
    #[arg(long)]
    pub n_scenes: Option<usize>,
    /// Comma-separated resize factors.
    #[arg(long, value_delimiter = ',')]
    pub resize_factors: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub prior_spread: Option<f64>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum EstimatorArg {
    Agnostic,
    Aware,
    Both,
}

fn resolve(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(Failure::from_config_load)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    match &cli.command {
        Command::Augment(a) => {
            let p = &mut cfg.augmentation;
            if let Some(v) = a.scale_min {
                p.scale_range[0] = v;
            }
            if let Some(v) = a.scale_max {
                p.scale_range[1] = v;
            }
            if let Some(v) = a.shift_range {
                p.shift_range = v;
            }
            if let Some(m) = a.pad_or_crop {
                p.pad_or_crop = match m {
                    FillArg::Pad => FillMode::Pad,
                    FillArg::Crop => FillMode::Crop,
                };
            }
            p.anisotropic |= a.anisotropic;
        }
        Command::Embed(a) => {
            let e = &mut cfg.embedding;
            if let Some(v) = a.patch {
                e.patch = v;
            }
            if let Some(v) = a.anchor {
                e.anchor = match v {
                    AnchorArg::Center => TokenAnchor::Center,
                    AnchorArg::Corner => TokenAnchor::Corner,
                };
            }
            if let Some(v) = a.dim {
                e.camera.dim = v;
            }
            if let Some(v) = a.period {
                e.camera.period = v;
            }
            if let Some(v) = a.focal_ref {
                e.camera.focal_ref = v;
            }
            if let Some(v) = a.geo_dim {
                e.geo.dim = v;
            }
            if let Some(v) = a.geo_period {
                e.geo.period = v;
            }
        }
        Command::Eval(a) => {
            if !a.iou.is_empty() {
                cfg.eval.iou_thresholds = a.iou.clone();
            }
            if let Some(m) = a.iou_mode {
                cfg.eval.iou.mode = match m {
                    IouModeArg::Oriented => IouMode::Oriented,
                    IouModeArg::AxisAligned => IouMode::AxisAligned,
                };
            }
        }
        Command::Ambiguity(a) => {
            if let Some(p) = &a.experiment {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::Io(anyhow::anyhow!("{}: {e}", p.display())))?;
                cfg.ambiguity = serde_json::from_str(&text)
                    .map_err(|e| Failure::Invalid(anyhow::anyhow!("experiment config {}: {e}", p.display())))?;
                if cli.seed.is_none() {
                    cfg.seed = cfg.ambiguity.seed;
                }
            }
            let x = &mut cfg.ambiguity;
            if let Some(v) = a.n_scenes {
                x.n_scenes = v;
            }
            if let Some(v) = &a.resize_factors {
                x.resize_factors = v.clone();
            }
            if let Some(v) = a.estimator {
                x.estimator = match v {
                    EstimatorArg::Agnostic => EstimatorChoice::Agnostic,
                    EstimatorArg::Aware => EstimatorChoice::Aware,
                    EstimatorArg::Both => EstimatorChoice::Both,
                };
            }
            if let Some(v) = a.prior_spread {
                x.prior_spread = Some(v);
            }
        }
        Command::Unproject(_) | Command::Version => {}
    }
    cfg.finalize().map_err(Failure::Invalid)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Command::Version = cli.command {
        println!("camgeom {}", env!("CARGO_PKG_VERSION"));
        return Ok(());
    }
    let cfg = resolve(&cli)?;
    log::debug!("resolved config: {cfg:?}");
    match &cli.command {
        Command::Augment(a) => commands::augment(&cfg, a, &cli.out),
        Command::Embed(a) => commands::embed(&cfg, a, &cli.out),
        Command::Unproject(a) => commands::unproject(&cfg, a, &cli.out),
        Command::Eval(a) => commands::eval(&cfg, a, &cli.out),
        Command::Ambiguity(_) => commands::ambiguity(&cfg, &cli.out),
        Command::Version => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
