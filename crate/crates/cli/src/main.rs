use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use textile_core::pipeline::{self, exit_code, files, PipelineConfig, Stage, StageError};
use textile_core::segmenter::DegradeParams;
use textile_core::voxelizer::sidecar_path;
use textile_core::Error;

/// Synthetic woven-composite pipeline: generate, image, segment,
/// reconstruct and validate interlock textiles.
#[derive(Parser)]
#[command(name = "textile", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; stage inputs default to files inside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log verbosity, repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Write the textile model.
    Generate,
    /// Write a compaction sequence of models.
    Compact {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Final thickness in model units; defaults to the configured value.
        #[arg(long)]
        h_final: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Write the label volume.
    Voxelize {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        voxel_um: Option<f64>,
        /// Only compute and write the volume header.
        #[arg(long)]
        dimension_check: bool,
    },
    /// Write the pseudo-CT volume.
    Render {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write per-slice detections.
    Segment {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write jittered and thinned detections.
    Degrade {
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Volume file whose sidecar gives slice counts.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Track, complete, fit and mesh yarns.
    Reconstruct {
        /// Defaults to the degraded detections when present.
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare reconstructed yarns with the model.
    Validate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        yarns: Option<PathBuf>,
    },
    /// Run every stage and write a manifest.
    Pipeline,
}

fn or_default(p: Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    p.unwrap_or_else(|| out.join(name))
}

fn config_error(stage: Stage, msg: String) -> StageError {
    StageError {
        stage,
        source: Error::Config(msg),
    }
}

fn run(cli: Cli) -> Result<(), StageError> {
    let mut cfg =
        PipelineConfig::load(cli.global.config.as_deref()).map_err(|source| StageError {
            stage: Stage::Generate,
            source,
        })?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.global.out {
        cfg.out_dir = out;
    }
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Generate => {
            let p = pipeline::cmd_generate(&cfg, &out)?;
            println!("{}", p.display());
        }
        Command::Compact {
            model,
            h_final,
            steps,
        } => {
            let h_final = h_final.or(cfg.compact.h_final).ok_or_else(|| {
                config_error(
                    Stage::Compact,
                    "compact needs --h-final or compact.h_final".into(),
                )
            })?;
            let steps = steps.unwrap_or(cfg.compact.n_steps);
            if h_final.is_nan() || h_final <= 0.0 || steps == 0 {
                return Err(config_error(
                    Stage::Compact,
                    "h_final must be positive and steps >= 1".into(),
                ));
            }
            let model = or_default(model, &out, files::MODEL);
            for p in pipeline::cmd_compact(&model, h_final, steps, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Voxelize {
            model,
            voxel_um,
            dimension_check,
        } => {
            let mut voxel = cfg.voxelize.clone();
            if let Some(v) = voxel_um {
                if v.is_nan() || v <= 0.0 {
                    return Err(config_error(
                        Stage::Voxelize,
                        format!("--voxel-um {v} must be positive"),
                    ));
                }
                voxel.voxel_size_um = v;
            }
            voxel.dimension_check |= dimension_check;
            let model = or_default(model, &out, files::MODEL);
            let side = pipeline::cmd_voxelize(&model, &voxel, &out)?;
            println!("{}", side.display());
        }
        Command::Render { labels } => {
            let labels = or_default(labels, &out, files::LABELS);
            let p = pipeline::cmd_render(&labels, &cfg.render_params(), &out)?;
            println!("{}", p.display());
        }
        Command::Segment { labels } => {
            let labels = or_default(labels, &out, files::LABELS);
            let p = pipeline::cmd_segment(&labels, &cfg.segment, &out)?;
            println!("{}", p.display());
        }
        Command::Degrade {
            detections,
            labels,
            jitter,
            dropout,
        } => {
            let mut params: DegradeParams = cfg.degrade_params();
            if let Some(j) = jitter {
                params.keypoint_jitter_sigma = j;
            }
            if let Some(d) = dropout {
                params.section_dropout_p = d;
            }
            params
                .validate()
                .map_err(|e| config_error(Stage::Degrade, e.to_string()))?;
            let detections = or_default(detections, &out, files::DETECTIONS);
            let header = sidecar_path(&or_default(labels, &out, files::LABELS));
            let header = header.exists().then_some(header);
            let p = pipeline::cmd_degrade(&detections, header.as_deref(), &params, &out)?;
            println!("{}", p.display());
        }
        Command::Reconstruct {
            detections,
            labels,
            model,
        } => {
            let detections = detections.unwrap_or_else(|| {
                let degraded = out.join(files::DEGRADED);
                if degraded.exists() {
                    degraded
                } else {
                    out.join(files::DETECTIONS)
                }
            });
            let header = sidecar_path(&or_default(labels, &out, files::LABELS));
            let model = or_default(model, &out, files::MODEL);
            for p in pipeline::cmd_reconstruct(&detections, &header, &model, &cfg, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { model, yarns } => {
            let model = or_default(model, &out, files::MODEL);
            let yarns = or_default(yarns, &out, files::YARNS);
            let report = pipeline::cmd_validate(&model, &yarns, &cfg, &out)?;
            print!("{}", textile_core::validate::path_table(&report.paths));
        }
        Command::Pipeline => {
            let manifest = pipeline::cmd_pipeline(&cfg)?;
            for f in &manifest.files {
                println!("{}  {}", f.sha256, f.path);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
