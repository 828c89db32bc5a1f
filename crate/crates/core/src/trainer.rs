//! The training loop binding model, assignment and loss, plus inference
//! over datasets.
//!
//! Training runs in two phases: a classification-only warmup (the other
//! heads receive no gradient and stay bit-identical), then the full joint
//! loss with the assignment recomputed from the current outputs on every
//! batch. Batch videos are processed on worker threads; gradients are
//! reduced in video order, so results do not depend on thread count.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{
    apply_pruning_variant, assign_variant, FramePrediction, GroundTruthSet, PruningVariant,
    SelfAssessVariant,
};
use crate::checkpoint::FrozenMasks;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{map_at_thresholds, EvalReport, THRESHOLDS_DENSE};
use crate::graph::{Graph, Real};
use crate::inference::{extract_proposals, soft_nms, top_k, FusionStrategy, Proposal};
use crate::loss::{frame_labels, loss_cls, loss_total, ClsLossMode, FrameLabels, LossWeights};
use crate::model::{forward, frame_predictions, ModelConfig, ModelParams};
use crate::optim::{adam_step, AdamParams, AdamState};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Proposal post-processing knobs used for validation and inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSettings {
    pub fusion: FusionStrategy,
    pub fusion_zeta: f64,
    pub nms_sigma: f64,
    pub nms_min_score: f64,
    /// Maximum proposals kept per video after suppression; 0 disables the cap.
    pub top_k: usize,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        InferenceSettings {
            fusion: FusionStrategy::RegressionOnly,
            fusion_zeta: crate::inference::DEFAULT_FUSION_ZETA,
            nms_sigma: 0.5,
            nms_min_score: 1e-3,
            top_k: 0,
        }
    }
}

impl InferenceSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.nms_sigma > 0.0) {
            return Err(Error::InvalidConfig("nms_sigma must be positive".into()));
        }
        if self.nms_min_score < 0.0 {
            return Err(Error::InvalidConfig(
                "nms_min_score must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Main-phase epochs (after the warmup); may be 0.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Classification-only warmup epochs.
    pub pretrain_epochs: usize,
    pub weights: LossWeights,
    pub assignment: SelfAssessVariant,
    pub pruning: PruningVariant,
    pub cls_mode: ClsLossMode,
    /// Divide batch gradients by the batch size instead of summing.
    pub batch_mean: bool,
    /// Global-norm gradient clipping threshold, if any.
    pub grad_clip: Option<f64>,
    pub inference: InferenceSettings,
    pub eval_thresholds: Vec<f64>,
    /// Validation cadence in epochs (the last epoch always evaluates).
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 4,
            learning_rate: 1e-4,
            pretrain_epochs: 10,
            weights: LossWeights::default(),
            assignment: SelfAssessVariant::Salad,
            pruning: PruningVariant::Salad,
            cls_mode: ClsLossMode::PerClassBce,
            batch_mean: false,
            grad_clip: None,
            inference: InferenceSettings::default(),
            eval_thresholds: THRESHOLDS_DENSE.to_vec(),
            eval_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be at least 1".into()));
        }
        if self.eval_thresholds.is_empty()
            || self
                .eval_thresholds
                .iter()
                .any(|t| !(*t > 0.0 && *t <= 1.0))
        {
            return Err(Error::InvalidConfig(
                "eval_thresholds must be a nonempty list inside (0, 1]".into(),
            ));
        }
        if !(self.weights.match_threshold > 0.0 && self.weights.match_threshold < 1.0) {
            return Err(Error::InvalidConfig(
                "match_threshold must lie strictly inside (0, 1)".into(),
            ));
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return Err(Error::InvalidConfig("grad_clip must be positive".into()));
            }
        }
        self.inference.validate()
    }
}

/// One line of the metric log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: String,
    pub loss_total: f64,
    pub loss_rsa: f64,
    pub loss_cls: f64,
    /// Confidence targets set across the train split this epoch.
    pub target_count: usize,
    /// Fraction of in-instance frames with an empty regression row.
    pub pruned_fraction: f64,
    pub val_map: Option<Vec<f64>>,
    pub val_map_primary: Option<f64>,
}

pub struct TrainOutput<F: Real> {
    pub params: ModelParams<F>,
    pub state: AdamState<F>,
    pub best_params: ModelParams<F>,
    pub best_epoch: usize,
    pub best_report: EvalReport,
    pub final_report: EvalReport,
    pub log: Vec<EpochRecord>,
    /// Regression masks recomputed from the final parameters over the train
    /// split, for the frozen-pruning study.
    pub frozen_masks: FrozenMasks,
}

/// Parameters and optimizer state to continue from (skips the warmup).
pub struct ResumeState<F: Real> {
    pub params: ModelParams<F>,
    pub state: AdamState<F>,
}

struct PreparedVideo<F> {
    id: String,
    features: Array2<F>,
    anchors: Vec<f64>,
    duration: f64,
    gts: GroundTruthSet,
    labels: FrameLabels,
}

fn prepare_videos<F: Real>(dataset: &Dataset) -> Result<Vec<PreparedVideo<F>>> {
    dataset
        .videos
        .iter()
        .map(|video| {
            let gts = video.ground_truth()?;
            let anchors = video.anchors();
            let labels = frame_labels(&anchors, &gts);
            Ok(PreparedVideo {
                id: video.id.clone(),
                features: video.features_array(),
                anchors,
                duration: video.duration(),
                gts,
                labels,
            })
        })
        .collect()
}

/// splitmix64-style mixing for derived seeds.
fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut x = a
        .wrapping_add(b.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(c.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Pretrain,
    Main,
}

struct VideoStepResult<F> {
    grads: Vec<Array2<F>>,
    loss_total: f64,
    loss_rsa: f64,
    loss_cls: f64,
    target_count: usize,
    pruned: usize,
    inside: usize,
}

fn compute_status(
    cfg: &TrainConfig,
    preds: &[FramePrediction],
    video: &PreparedVideo<impl Real>,
    prune_seed: u64,
    frozen: Option<&FrozenMasks>,
) -> Result<crate::assignment::AssignmentStatus> {
    let status = assign_variant(
        cfg.assignment,
        preds,
        &video.gts,
        cfg.weights.match_threshold,
    )?;
    let frozen_mask = match cfg.pruning {
        PruningVariant::Frozen => Some(
            frozen
                .and_then(|m| m.get(&video.id))
                .ok_or(Error::MissingFrozenMask)?,
        ),
        _ => None,
    };
    apply_pruning_variant(
        cfg.pruning,
        &status,
        preds,
        &video.gts,
        prune_seed,
        frozen_mask,
    )
}

fn train_video_step<F: Real>(
    params: &ModelParams<F>,
    video: &PreparedVideo<F>,
    cfg: &TrainConfig,
    phase: Phase,
    prune_seed: u64,
    frozen: Option<&FrozenMasks>,
) -> Result<VideoStepResult<F>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = forward(&mut g, params, &bound, &video.features)?;

    match phase {
        Phase::Pretrain => {
            let cls = loss_cls(&mut g, out.class_probs, &video.labels, cfg.cls_mode);
            g.backward(cls)?;
            let value = g.scalar_value(cls).as_f64();
            Ok(VideoStepResult {
                grads: params.collect_grads(&g, &bound),
                loss_total: value,
                loss_rsa: 0.0,
                loss_cls: value,
                target_count: 0,
                pruned: 0,
                inside: 0,
            })
        }
        Phase::Main => {
            let preds = frame_predictions(
                g.value(out.offsets),
                g.value(out.confidence),
                g.value(out.class_probs),
                &video.anchors,
                video.duration,
            )?;
            let status = compute_status(cfg, &preds, video, prune_seed, frozen)?;
            let nodes = loss_total(
                &mut g,
                out.offsets,
                out.confidence,
                out.class_probs,
                &video.anchors,
                video.duration,
                &video.gts,
                &status,
                &video.labels,
                &cfg.weights,
                cfg.cls_mode,
            );
            g.backward(nodes.total)?;
            Ok(VideoStepResult {
                grads: params.collect_grads(&g, &bound),
                loss_total: g.scalar_value(nodes.total).as_f64(),
                loss_rsa: g.scalar_value(nodes.rsa).as_f64(),
                loss_cls: g.scalar_value(nodes.cls).as_f64(),
                target_count: status.target_count(),
                pruned: status.pruned_frames(&preds, &video.gts),
                inside: status.frames_inside(&preds, &video.gts),
            })
        }
    }
}

fn infer_video<F: Real>(
    params: &ModelParams<F>,
    video: &PreparedVideo<F>,
    settings: &InferenceSettings,
) -> Result<Vec<Proposal>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = forward(&mut g, params, &bound, &video.features)?;
    let preds = frame_predictions(
        g.value(out.offsets),
        g.value(out.confidence),
        g.value(out.class_probs),
        &video.anchors,
        video.duration,
    )?;
    let proposals = extract_proposals(&preds, video.duration, settings.fusion, settings.fusion_zeta)?;
    let mut proposals = soft_nms(
        proposals,
        settings.nms_sigma,
        settings.nms_min_score,
        true,
    )?;
    if settings.top_k > 0 {
        proposals = top_k(proposals, settings.top_k);
    }
    Ok(proposals)
}

fn infer_prepared<F: Real>(
    params: &ModelParams<F>,
    videos: &[PreparedVideo<F>],
    indices: &[usize],
    settings: &InferenceSettings,
) -> Result<Vec<(String, Vec<Proposal>)>> {
    indices
        .par_iter()
        .map(|&i| {
            let proposals = infer_video(params, &videos[i], settings)?;
            Ok((videos[i].id.clone(), proposals))
        })
        .collect()
}

fn evaluate_prepared<F: Real>(
    params: &ModelParams<F>,
    videos: &[PreparedVideo<F>],
    indices: &[usize],
    settings: &InferenceSettings,
    thresholds: &[f64],
) -> Result<EvalReport> {
    let dets = infer_prepared(params, videos, indices, settings)?;
    let gts: Vec<(String, GroundTruthSet)> = indices
        .iter()
        .map(|&i| (videos[i].id.clone(), videos[i].gts.clone()))
        .collect();
    map_at_thresholds(&dets, &gts, thresholds)
}

/// Runs inference over selected dataset videos (all of them when `indices`
/// is `None`), returning per-video ranked proposals.
pub fn infer_dataset<F: Real>(
    params: &ModelParams<F>,
    dataset: &Dataset,
    indices: Option<&[usize]>,
    settings: &InferenceSettings,
) -> Result<Vec<(String, Vec<Proposal>)>> {
    settings.validate()?;
    let videos: Vec<PreparedVideo<F>> = prepare_videos(dataset)?;
    let all: Vec<usize> = (0..videos.len()).collect();
    infer_prepared(params, &videos, indices.unwrap_or(&all), settings)
}

/// Inference plus metric report over selected dataset videos.
pub fn evaluate_dataset<F: Real>(
    params: &ModelParams<F>,
    dataset: &Dataset,
    indices: Option<&[usize]>,
    settings: &InferenceSettings,
    thresholds: &[f64],
) -> Result<EvalReport> {
    settings.validate()?;
    let videos: Vec<PreparedVideo<F>> = prepare_videos(dataset)?;
    let all: Vec<usize> = (0..videos.len()).collect();
    evaluate_prepared(params, &videos, indices.unwrap_or(&all), settings, thresholds)
}

fn check_model_matches_dataset(dataset: &Dataset, model_cfg: &ModelConfig) -> Result<()> {
    if model_cfg.feature_dim != dataset.feature_dim {
        return Err(Error::InvalidConfig(format!(
            "model feature_dim {} does not match dataset feature_dim {}",
            model_cfg.feature_dim, dataset.feature_dim
        )));
    }
    if model_cfg.num_classes != dataset.num_classes {
        return Err(Error::InvalidConfig(format!(
            "model num_classes {} does not match dataset num_classes {}",
            model_cfg.num_classes, dataset.num_classes
        )));
    }
    Ok(())
}

/// Trains on the 80% train split, validating on the rest.
///
/// `frozen` supplies captured regression masks for the frozen-pruning
/// variant. `resume` continues from existing parameters and optimizer
/// state, skipping the warmup phase.
pub fn train<F: Real>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    frozen: Option<&FrozenMasks>,
    resume: Option<ResumeState<F>>,
) -> Result<TrainOutput<F>> {
    cfg.validate()?;
    model_cfg.validate()?;
    check_model_matches_dataset(dataset, model_cfg)?;
    if cfg.pruning == PruningVariant::Frozen && frozen.is_none() {
        return Err(Error::MissingFrozenMask);
    }

    let videos: Vec<PreparedVideo<F>> = prepare_videos(dataset)?;
    let (train_idx, val_idx) = dataset.split_indices();
    if train_idx.is_empty() {
        return Err(Error::InvalidConfig(
            "dataset too small: empty train split".into(),
        ));
    }

    let resumed = resume.is_some();
    let (mut params, mut state) = match resume {
        Some(r) => (r.params, r.state),
        None => {
            let p = ModelParams::init(model_cfg)?;
            let s = AdamState::new(&p);
            (p, s)
        }
    };
    let adam = AdamParams::with_learning_rate(cfg.learning_rate);

    let pretrain_epochs = if resumed { 0 } else { cfg.pretrain_epochs };
    let total_epochs = pretrain_epochs + cfg.epochs;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5EED, 1));

    let mut log = Vec::with_capacity(total_epochs);
    let mut best: Option<(f64, usize, ModelParams<F>, EvalReport)> = None;
    let mut last_report: Option<EvalReport> = None;

    for epoch in 0..total_epochs {
        let phase = if epoch < pretrain_epochs {
            Phase::Pretrain
        } else {
            Phase::Main
        };
        // fresh optimizer when the joint phase starts
        if phase == Phase::Main && epoch == pretrain_epochs && pretrain_epochs > 0 {
            state = AdamState::new(&params);
        }

        let mut order = train_idx.clone();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = (0.0, 0.0, 0.0);
        let mut epoch_targets = 0usize;
        let mut epoch_pruned = 0usize;
        let mut epoch_inside = 0usize;

        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<VideoStepResult<F>> = batch
                .par_iter()
                .map(|&vi| {
                    let prune_seed = mix_seed(cfg.seed, epoch as u64, vi as u64);
                    train_video_step(&params, &videos[vi], cfg, phase, prune_seed, frozen)
                })
                .collect::<Result<Vec<_>>>()?;

            let mut grads: Vec<Array2<F>> = params
                .entries()
                .iter()
                .map(|p| Array2::zeros(p.value.dim()))
                .collect();
            for r in &results {
                if !r.loss_total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                epoch_loss.0 += r.loss_total;
                epoch_loss.1 += r.loss_rsa;
                epoch_loss.2 += r.loss_cls;
                epoch_targets += r.target_count;
                epoch_pruned += r.pruned;
                epoch_inside += r.inside;
                for (g, rg) in grads.iter_mut().zip(&r.grads) {
                    *g += rg;
                }
            }

            if cfg.batch_mean {
                let inv = F::from_f64(1.0 / batch.len() as f64);
                for g in grads.iter_mut() {
                    g.mapv_inplace(|x| x * inv);
                }
            }
            if let Some(clip) = cfg.grad_clip {
                let norm: f64 = grads
                    .iter()
                    .map(|g| g.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>())
                    .sum::<f64>()
                    .sqrt();
                if norm > clip {
                    let scale = F::from_f64(clip / norm);
                    for g in grads.iter_mut() {
                        g.mapv_inplace(|x| x * scale);
                    }
                }
            }
            adam_step(&mut params, &grads, &mut state, &adam)?;
        }

        let is_last = epoch + 1 == total_epochs;
        let evaluate_now = !val_idx.is_empty() && (epoch % cfg.eval_every == 0 || is_last);
        let report = if evaluate_now {
            Some(evaluate_prepared(
                &params,
                &videos,
                &val_idx,
                &cfg.inference,
                &cfg.eval_thresholds,
            )?)
        } else {
            None
        };

        let n_train = train_idx.len() as f64;
        let record = EpochRecord {
            epoch,
            phase: match phase {
                Phase::Pretrain => "pretrain".to_string(),
                Phase::Main => "main".to_string(),
            },
            loss_total: epoch_loss.0 / n_train,
            loss_rsa: epoch_loss.1 / n_train,
            loss_cls: epoch_loss.2 / n_train,
            target_count: epoch_targets,
            pruned_fraction: if epoch_inside > 0 {
                epoch_pruned as f64 / epoch_inside as f64
            } else {
                0.0
            },
            val_map: report.as_ref().map(|r| r.map.clone()),
            val_map_primary: report.as_ref().map(|r| r.primary_map()),
        };
        log.push(record);

        if let Some(report) = report {
            let primary = report.primary_map();
            // only the joint phase competes for the best checkpoint
            if phase == Phase::Main
                && best.as_ref().map_or(true, |(b, _, _, _)| primary > *b)
            {
                best = Some((primary, epoch, params.clone(), report.clone()));
            }
            last_report = Some(report);
        }
    }

    let final_report = match last_report {
        Some(r) => r,
        None => evaluate_prepared(
            &params,
            &videos,
            &val_idx,
            &cfg.inference,
            &cfg.eval_thresholds,
        )
        .unwrap_or(EvalReport {
            thresholds: cfg.eval_thresholds.clone(),
            classes: vec![],
            map: vec![0.0; cfg.eval_thresholds.len()],
        }),
    };
    let (best_epoch, best_params, best_report) = match best {
        Some((_, e, p, r)) => (e, p, r),
        None => (
            total_epochs.saturating_sub(1),
            params.clone(),
            final_report.clone(),
        ),
    };

    // capture the final regression masks over the train split
    let mut frozen_masks = FrozenMasks::new();
    let captured: Vec<(String, Array2<bool>)> = train_idx
        .par_iter()
        .map(|&vi| {
            let video = &videos[vi];
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let out = forward(&mut g, &params, &bound, &video.features)?;
            let preds = frame_predictions(
                g.value(out.offsets),
                g.value(out.confidence),
                g.value(out.class_probs),
                &video.anchors,
                video.duration,
            )?;
            let prune_seed = mix_seed(cfg.seed, total_epochs as u64, vi as u64);
            let status = compute_status(cfg, &preds, video, prune_seed, frozen)?;
            Ok((video.id.clone(), status.regress_mask))
        })
        .collect::<Result<Vec<_>>>()?;
    frozen_masks.extend(captured);

    Ok(TrainOutput {
        params,
        state,
        best_params,
        best_epoch,
        best_report,
        final_report,
        log,
        frozen_masks,
    })
}

/// Serializes the metric log as line-delimited JSON records.
pub fn render_metric_log(log: &[EpochRecord]) -> String {
    let mut out = String::new();
    for record in log {
        out.push_str(&serde_json::to_string(record).expect("serializable record"));
        out.push('\n');
    }
    out
}
