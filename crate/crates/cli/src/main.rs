//! `alcpp`: landmark localization, cutting-plane planning and grading from the shell.
//!
//! Failures exit nonzero and print `{"error", "message", "path"}` as JSON on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alcpp::phantom::PhantomParams;
use alcpp::pipeline;
use alcpp::spunet::{format_manifest, ArchConfig};
use alcpp::volume::BoundingBox;
use alcpp::{json, Error, PipelineConfig, PlanMode, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "alcpp", version, about)]
struct Cli {
    /// Pipeline configuration JSON; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the configuration file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    wmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    wmax: Option<f64>,
    #[arg(long, num_args = 3, value_names = ["Z", "Y", "X"])]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mode: Option<PlanMode>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a phantom volume and its ground-truth landmarks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        landmarks_out: PathBuf,
        /// Phantom parameter JSON; random anatomy from the seed when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Map intensities to [0, 1] through the CT window.
    Window {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Cut an inclusive voxel box out of a volume.
    Crop {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `Z0 Y0 X0 Z1 Y1 X1`, inclusive.
        #[arg(long = "box", num_args = 6, conflicts_with = "box_file", required_unless_present = "box_file")]
        bbox: Option<Vec<usize>>,
        /// JSON `{"lo": [z, y, x], "hi": [z, y, x]}`.
        #[arg(long)]
        box_file: Option<PathBuf>,
    },
    /// Trilinear resampling to the target dims over the same extent.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "landmarks_out")]
        landmarks: Option<PathBuf>,
        #[arg(long, requires = "landmarks")]
        landmarks_out: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Gaussian target heatmaps from known landmarks, on the grid of `--in`.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Argmax landmarks from a heatmap tensor.
    Localize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Volume supplying the grid geometry.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Network forward pass.
    Infer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cutting planes from landmarks.
    Plan {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        frame_out: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Grade planes against ground-truth landmarks.
    Grade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Grade distribution over one or more grade files.
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localization error statistics over prediction/truth pairs.
    EvalLandmarks {
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Whole oracle pipeline on one phantom: synth through report.
    Run {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Write seeded random network weights.
    InitWeights {
        #[arg(long, default_value = "full")]
        arch: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// List every parameter block of an architecture.
    Manifest {
        #[arg(long, default_value = "full")]
        arch: String,
    },
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn resolve(base: Option<&Path>, o: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match base {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.wmin {
        cfg.window.w_min = v;
    }
    if let Some(v) = o.wmax {
        cfg.window.w_max = v;
    }
    if let Some(d) = &o.dims {
        cfg.dims = [d[0], d[1], d[2]];
    }
    if let Some(v) = o.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = o.tau {
        cfg.tau = v;
    }
    if let Some(v) = o.mode {
        cfg.mode = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let base = cli.config.as_deref();
    let cfg = |o: &Overrides| resolve(base, o);
    match cli.command {
        Command::Synth { out, landmarks_out, params, o } => {
            let c = cfg(&o)?;
            let p = match params {
                Some(path) => {
                    let mut p: PhantomParams = json::read(&path)?;
                    if let Some(seed) = o.seed {
                        p.seed = seed;
                    }
                    if o.dims.is_some() {
                        p.dims = c.dims;
                    }
                    p
                }
                None => PhantomParams {
                    dims: c.dims,
                    ..PhantomParams::random(c.seed)
                },
            };
            pipeline::synth(&p, &out, &landmarks_out)?;
        }
        Command::Window { input, out, o } => {
            let c = cfg(&o)?;
            pipeline::window(&input, &out, c.window.w_min, c.window.w_max)?;
        }
        Command::Crop { input, out, bbox, box_file } => {
            let b = match (bbox, box_file) {
                (Some(v), _) => BoundingBox::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])?,
                (None, Some(path)) => {
                    let b: BoundingBox = json::read(&path)?;
                    BoundingBox::new(b.lo, b.hi).map_err(|e| e.in_file(&path))?
                }
                (None, None) => return Err(config_error("box", "missing")),
            };
            pipeline::crop(&input, &out, &b)?;
        }
        Command::Resample { input, out, landmarks, landmarks_out, o } => {
            let c = cfg(&o)?;
            let lm = landmarks.as_deref().zip(landmarks_out.as_deref());
            pipeline::resample(&input, &out, c.dims, lm)?;
        }
        Command::Heatmap { input, landmarks, out, o } => {
            let c = cfg(&o)?;
            pipeline::heatmap(&input, &landmarks, &out, c.sigma)?;
        }
        Command::Localize { input, reference, out } => {
            cfg(&Overrides::default())?;
            pipeline::localize_file(&input, &reference, &out)?;
        }
        Command::Infer { input, weights, out } => {
            let c = cfg(&Overrides::default())?;
            let weights = weights
                .or(c.paths.weights)
                .ok_or_else(|| config_error("weights", "pass --weights or set paths.weights"))?;
            pipeline::infer(&input, &weights, &out)?;
        }
        Command::Plan { input, out, frame_out, o } => {
            let c = cfg(&o)?;
            pipeline::plan(&input, &out, c.mode, frame_out.as_deref())?;
        }
        Command::Grade { input, truth, out, o } => {
            let c = cfg(&o)?;
            pipeline::grade(&input, &truth, &out, c.tau)?;
        }
        Command::Report { input, out } => {
            cfg(&Overrides::default())?;
            let report = pipeline::report(&input, &out)?;
            print!("{}", report.to_table());
        }
        Command::EvalLandmarks { pred, truth, out } => {
            cfg(&Overrides::default())?;
            if pred.len() != truth.len() {
                return Err(config_error(
                    "truth",
                    format!("{} predictions but {} truth files", pred.len(), truth.len()),
                ));
            }
            let pairs: Vec<_> = pred.into_iter().zip(truth).collect();
            let r = pipeline::eval_landmarks(&pairs, &out)?;
            println!("{:.4} ± {:.4} mm over {} landmarks", r.mean_mm, r.std_mm, r.count);
        }
        Command::Run { out_dir, o } => {
            let c = cfg(&o)?;
            let dir = out_dir
                .or_else(|| c.paths.out_dir.clone())
                .ok_or_else(|| config_error("out_dir", "pass --out-dir or set paths.out_dir"))?;
            let summary = pipeline::run_oracle(&c, &dir)?;
            print!("{}", summary.report.to_table());
        }
        Command::InitWeights { arch, out, o } => {
            let c = cfg(&o)?;
            pipeline::init_weights(&ArchConfig::named(&arch)?, c.seed, &out)?;
        }
        Command::Manifest { arch } => {
            print!("{}", format_manifest(&ArchConfig::named(&arch)?));
        }
    }
    Ok(())
}

fn error_json(kind: &str, message: &str, path: Option<&Path>) -> String {
    serde_json::json!({
        "error": kind,
        "message": message,
        "path": path.map(|p| p.display().to_string()),
    })
    .to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim_end(), None));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string(), e.path()));
            ExitCode::FAILURE
        }
    }
}
