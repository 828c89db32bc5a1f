//! Command-line front end.
//!
//! Subcommands: `gen-data`, `train`, `infer`, `eval`, `ablate`. Every run is
//! driven by a TOML config with dotted-key overrides and echoes its
//! effective config next to its outputs. Exit codes: 0 success, 2
//! config/validation failure, 3 numeric failure, 4 IO failure.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use salad_core::ablation::{run_ablation, AblationSuite};
use salad_core::assignment::PruningVariant;
use salad_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FrozenMasks};
use salad_core::data::{read_proposal_dump, write_proposal_dump, Dataset};
use salad_core::datagen::generate_synthetic;
use salad_core::error::Error as CoreError;
use salad_core::evaluation::map_at_thresholds;
use salad_core::inference::FusionStrategy;
use salad_core::model::ModelParams;
use salad_core::optim::AdamState;
use salad_core::trainer::{
    evaluate_dataset, infer_dataset, render_metric_log, train, InferenceSettings, ResumeState,
};

use config::{load_config, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Configuration or input validation problems -> exit 2.
    Config(String),
    /// Numeric failures (non-finite loss or gradients) -> exit 3.
    Numeric(String),
    /// Filesystem and encoding problems -> exit 4.
    Io(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let message = err.to_string();
        match err {
            CoreError::NonFiniteLoss { .. } | CoreError::NonFiniteGradient(_) => {
                CliError::Numeric(message)
            }
            CoreError::Io(_) | CoreError::Json(_) => CliError::Io(message),
            _ => CliError::Config(message),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "salad",
    about = "Self-assessment learning for temporal action detection on synthetic benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonConfig {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key overrides, e.g. --set train.epochs=5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file from the [synth] config section.
    GenData {
        #[command(flatten)]
        common: CommonConfig,
        /// Output dataset path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a detector and write checkpoints plus a metric log.
    Train {
        #[command(flatten)]
        common: CommonConfig,
        /// Dataset file produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue from a checkpoint (skips the warmup phase).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// With --resume: discard the stored optimizer state.
        #[arg(long, default_value_t = false)]
        reset_optimizer: bool,
        /// Shorthand for --set train.pruning=<variant>.
        #[arg(long)]
        strategy: Option<String>,
        /// Checkpoint providing captured masks for frozen pruning.
        #[arg(long)]
        frozen_from: Option<PathBuf>,
    },
    /// Run inference and dump ranked proposals.
    Infer {
        /// Trained checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output proposal dump path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "regression_only")]
        fusion: String,
        #[arg(long, default_value_t = salad_core::inference::DEFAULT_FUSION_ZETA)]
        zeta: f64,
        #[arg(long, default_value_t = 0.5)]
        nms_sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        min_score: f64,
        /// Keep at most this many proposals per video (0 = no cap).
        #[arg(long, default_value_t = 0)]
        top_k: usize,
        /// Video subset: train, val or all.
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Evaluate a checkpoint or a proposal dump against a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "proposals")]
        checkpoint: Option<PathBuf>,
        /// Evaluate an existing proposal dump instead of a checkpoint.
        #[arg(long)]
        proposals: Option<PathBuf>,
        /// Threshold preset: thumos (0.1..0.5) or anet (0.5,0.75,0.95).
        #[arg(long, default_value = "thumos")]
        preset: String,
        /// Explicit comma-separated thresholds (override the preset).
        #[arg(long)]
        thresholds: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "all")]
        split: String,
        /// Report style to write: table, csv or both.
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Run a comparison suite (pruning, self_assessment or fusion).
    Ablate {
        #[command(flatten)]
        common: CommonConfig,
        #[arg(long)]
        data: PathBuf,
        /// Suite name: pruning, self_assessment or fusion.
        #[arg(long)]
        suite: String,
        /// Comma-separated seeds, one full run per seed.
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long)]
        out_dir: PathBuf,
        /// Fusion suite only: reuse this checkpoint instead of retraining.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// SALAD_THREADS bounds the worker pool; unset leaves the rayon default.
fn configure_threads() {
    if let Ok(value) = std::env::var("SALAD_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData { common, out } => cmd_gen_data(&common, &out),
        Command::Train {
            common,
            data,
            out_dir,
            resume,
            reset_optimizer,
            strategy,
            frozen_from,
        } => cmd_train(
            &common,
            &data,
            &out_dir,
            resume.as_deref(),
            reset_optimizer,
            strategy.as_deref(),
            frozen_from.as_deref(),
        ),
        Command::Infer {
            checkpoint,
            data,
            out,
            fusion,
            zeta,
            nms_sigma,
            min_score,
            top_k,
            split,
        } => cmd_infer(
            &checkpoint,
            &data,
            &out,
            &fusion,
            zeta,
            nms_sigma,
            min_score,
            top_k,
            &split,
        ),
        Command::Eval {
            data,
            checkpoint,
            proposals,
            preset,
            thresholds,
            out_dir,
            split,
            format,
        } => cmd_eval(
            &data,
            checkpoint.as_deref(),
            proposals.as_deref(),
            &preset,
            thresholds.as_deref(),
            &out_dir,
            &split,
            &format,
        ),
        Command::Ablate {
            common,
            data,
            suite,
            seeds,
            out_dir,
            checkpoint,
        } => cmd_ablate(&common, &data, &suite, &seeds, &out_dir, checkpoint.as_deref()),
    }
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn echo_config(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_file(&dir.join("config_echo.toml"), &config.echo_toml()?)
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(CliError::from)
}

fn split_indices(dataset: &Dataset, split: &str) -> Result<Vec<usize>, CliError> {
    let (train, val) = dataset.split_indices();
    match split {
        "train" => Ok(train),
        "val" => Ok(val),
        "all" => Ok((0..dataset.videos.len()).collect()),
        other => Err(CliError::config(format!(
            "unknown split '{other}' (known: train, val, all)"
        ))),
    }
}

fn parse_thresholds(spec: &str) -> Result<Vec<f64>, CliError> {
    let parsed: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let thresholds =
        parsed.map_err(|_| CliError::config(format!("cannot parse thresholds '{spec}'")))?;
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(CliError::config(
            "thresholds must be a nonempty list inside (0, 1]".to_string(),
        ));
    }
    Ok(thresholds)
}

fn load_model_from_checkpoint(path: &Path) -> Result<(Checkpoint, ModelParams<f32>), CliError> {
    let ckpt = load_checkpoint(path)?;
    let params: ModelParams<f32> = ckpt.into_model(&ckpt.config.clone())?;
    Ok((ckpt, params))
}

fn cmd_gen_data(common: &CommonConfig, out: &Path) -> Result<(), CliError> {
    let config = load_config(&common.config, &common.overrides)?;
    let synth = config.synth()?;
    let dataset = generate_synthetic(synth)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    dataset.save(out).map_err(CliError::from)?;
    // echo next to the dataset so the file is reproducible from it
    let echo_path = out.with_extension("config.toml");
    write_file(&echo_path, &config.echo_toml()?)?;

    let histogram = dataset.class_histogram();
    println!(
        "wrote {} ({} videos, {} instances)",
        out.display(),
        dataset.videos.len(),
        dataset.total_instances()
    );
    for (class_id, count) in histogram.iter().enumerate().skip(1) {
        println!("  {}: {count}", dataset.class_names[class_id - 1]);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    common: &CommonConfig,
    data: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
    reset_optimizer: bool,
    strategy: Option<&str>,
    frozen_from: Option<&Path>,
) -> Result<(), CliError> {
    let mut config = load_config(&common.config, &common.overrides)?;
    if let Some(strategy) = strategy {
        config.train.pruning = parse_enum::<PruningVariant>(strategy, "pruning strategy")?;
    }
    let model_cfg = config.model()?;
    let dataset = load_dataset(data)?;

    let frozen: Option<FrozenMasks> = match frozen_from {
        Some(path) => Some(load_checkpoint(path)?.frozen_masks.ok_or_else(|| {
            CliError::config(format!(
                "{} carries no frozen masks (train the reference variant first)",
                path.display()
            ))
        })?),
        None => None,
    };
    if config.train.pruning == PruningVariant::Frozen && frozen.is_none() {
        return Err(CliError::config(
            "frozen pruning needs --frozen-from <checkpoint>".to_string(),
        ));
    }

    let resume_state: Option<ResumeState<f32>> = match resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.config != model_cfg {
                return Err(CliError::config(
                    "resume checkpoint was trained with a different model config".to_string(),
                ));
            }
            let params: ModelParams<f32> = ckpt.into_model(&model_cfg)?;
            let state = if reset_optimizer {
                AdamState::new(&params)
            } else {
                ckpt.into_adam_state(&params)?
            };
            Some(ResumeState { params, state })
        }
        None => None,
    };

    ensure_dir(out_dir)?;
    echo_config(&config, out_dir)?;

    let output = train::<f32>(&dataset, &model_cfg, &config.train, frozen.as_ref(), resume_state)?;

    save_checkpoint(
        &out_dir.join("checkpoint_final.ckpt"),
        &output.params,
        &output.state,
        Some(&output.frozen_masks),
    )?;
    // the best checkpoint stores the final optimizer state as a resume aid
    save_checkpoint(
        &out_dir.join("checkpoint_best.ckpt"),
        &output.best_params,
        &output.state,
        Some(&output.frozen_masks),
    )?;
    write_file(&out_dir.join("metrics.jsonl"), &render_metric_log(&output.log))?;
    write_file(
        &out_dir.join("report_final.txt"),
        &output.final_report.render_table(),
    )?;

    println!(
        "trained {} epochs; best epoch {} (val mAP@0.5 {:.4}); outputs in {}",
        output.log.len(),
        output.best_epoch,
        output.best_report.primary_map(),
        out_dir.display()
    );
    println!("{}", output.final_report.render_table());
    Ok(())
}

fn parse_enum<T: serde::de::DeserializeOwned>(name: &str, what: &str) -> Result<T, CliError> {
    toml::Value::String(name.to_string())
        .try_into()
        .map_err(|_| CliError::config(format!("unknown {what} '{name}'")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_infer(
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    fusion: &str,
    zeta: f64,
    nms_sigma: f64,
    min_score: f64,
    top_k: usize,
    split: &str,
) -> Result<(), CliError> {
    let (_, params) = load_model_from_checkpoint(checkpoint)?;
    let dataset = load_dataset(data)?;
    let indices = split_indices(&dataset, split)?;
    let settings = InferenceSettings {
        fusion: parse_enum::<FusionStrategy>(fusion, "fusion strategy")?,
        fusion_zeta: zeta,
        nms_sigma,
        nms_min_score: min_score,
        top_k,
    };
    let proposals = infer_dataset(&params, &dataset, Some(&indices), &settings)?;
    let file = std::fs::File::create(out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
    write_proposal_dump(std::io::BufWriter::new(file), &proposals)?;
    let total: usize = proposals.iter().map(|(_, p)| p.len()).sum();
    println!(
        "wrote {total} proposals for {} videos to {}",
        proposals.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    data: &Path,
    checkpoint: Option<&Path>,
    proposals: Option<&Path>,
    preset: &str,
    thresholds: Option<&str>,
    out_dir: &Path,
    split: &str,
    format: &str,
) -> Result<(), CliError> {
    if !matches!(format, "table" | "csv" | "both") {
        return Err(CliError::config(format!(
            "unknown format '{format}' (known: table, csv, both)"
        )));
    }
    let dataset = load_dataset(data)?;
    let thresholds = match thresholds {
        Some(spec) => parse_thresholds(spec)?,
        None => {
            config::EvalSection {
                preset: Some(preset.to_string()),
                thresholds: None,
            }
            .resolve()?
        }
    };

    let report = match (checkpoint, proposals) {
        (Some(ckpt_path), None) => {
            let (_, params) = load_model_from_checkpoint(ckpt_path)?;
            let indices = split_indices(&dataset, split)?;
            evaluate_dataset(
                &params,
                &dataset,
                Some(&indices),
                &InferenceSettings::default(),
                &thresholds,
            )?
        }
        (None, Some(dump_path)) => {
            let file = std::fs::File::open(dump_path)
                .map_err(|e| CliError::io(format!("cannot open {}: {e}", dump_path.display())))?;
            let dets = read_proposal_dump(file)?;
            let indices = split_indices(&dataset, split)?;
            let gts = indices
                .iter()
                .map(|&i| {
                    Ok((
                        dataset.videos[i].id.clone(),
                        dataset.videos[i].ground_truth()?,
                    ))
                })
                .collect::<Result<Vec<_>, CoreError>>()?;
            map_at_thresholds(&dets, &gts, &thresholds)?
        }
        _ => {
            return Err(CliError::config(
                "eval needs exactly one of --checkpoint or --proposals".to_string(),
            ))
        }
    };

    ensure_dir(out_dir)?;
    if matches!(format, "table" | "both") {
        write_file(&out_dir.join("report.txt"), &report.render_table())?;
    }
    if matches!(format, "csv" | "both") {
        write_file(&out_dir.join("report.csv"), &report.render_csv())?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_ablate(
    common: &CommonConfig,
    data: &Path,
    suite: &str,
    seeds: &str,
    out_dir: &Path,
    checkpoint: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(&common.config, &common.overrides)?;
    let model_cfg = config.model()?;
    let dataset = load_dataset(data)?;
    let suite = AblationSuite::parse(suite).ok_or_else(|| {
        CliError::config(format!(
            "unknown suite '{suite}' (known: {})",
            AblationSuite::NAMES.join(", ")
        ))
    })?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config(format!("cannot parse seeds '{seeds}'")))?;
    if seeds.is_empty() {
        return Err(CliError::config("at least one seed is required".to_string()));
    }

    let pretrained: Option<ModelParams<f32>> = match checkpoint {
        Some(path) => {
            if suite != AblationSuite::Fusion {
                return Err(CliError::config(
                    "--checkpoint applies to the fusion suite only".to_string(),
                ));
            }
            Some(load_model_from_checkpoint(path)?.1)
        }
        None => None,
    };

    ensure_dir(out_dir)?;
    echo_config(&config, out_dir)?;
    let table = run_ablation::<f32>(
        &dataset,
        &model_cfg,
        &config.train,
        suite,
        &seeds,
        pretrained.as_ref(),
    )?;
    write_file(&out_dir.join("ablation.txt"), &table.render_table())?;
    write_file(&out_dir.join("ablation.csv"), &table.render_csv())?;
    print!("{}", table.render_table());
    Ok(())
}
