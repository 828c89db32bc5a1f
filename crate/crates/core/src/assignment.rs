//! Training-target assignment between per-frame predictions and ground truth.
//!
//! Each iteration recomputes a *status* from the current outputs: a
//! frame-by-instance regression mask (which frames keep contributing IoU
//! gradient for which instance), a per-instance matched flag, and a binary
//! confidence target per frame. The default strategy walks frames in
//! decreasing confidence order and lets the first frame that clears the
//! match threshold claim its instance; later frames inside a claimed
//! instance are pruned from the regression loss and pushed towards low
//! confidence. Alternative strategies used by the comparison suites are
//! implemented alongside.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{tiou, Interval};

/// One frame's model output, in plain `f64` form.
#[derive(Debug, Clone)]
pub struct FramePrediction {
    /// Anchor time of the frame, in the same units as the intervals.
    pub t: f64,
    /// Regressed segment; contains `t` by construction.
    pub interval: Interval,
    /// Self-assessed confidence that this segment is a correct,
    /// best-in-instance detection.
    pub confidence: f64,
    /// Class distribution over `num_classes + 1` entries; index 0 is the
    /// background class.
    pub class_probs: Vec<f64>,
}

impl FramePrediction {
    pub fn new(t: f64, interval: Interval, confidence: f64, class_probs: Vec<f64>) -> Result<Self> {
        if !interval.contains(t) {
            return Err(Error::InvalidPrediction(format!(
                "anchor {} outside regressed interval [{}, {}]",
                t,
                interval.start(),
                interval.end()
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidPrediction(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        if class_probs.is_empty() {
            return Err(Error::InvalidPrediction("empty class distribution".into()));
        }
        let sum: f64 = class_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || class_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidPrediction(format!(
                "class distribution must be a probability vector (sum {sum})"
            )));
        }
        Ok(Self {
            t,
            interval,
            confidence,
            class_probs,
        })
    }

    /// Highest non-background class probability.
    pub fn class_confidence(&self) -> f64 {
        self.class_probs[1..].iter().cloned().fold(0.0, f64::max)
    }

    /// Most likely non-background class (1-based; ties resolve to the lower id).
    pub fn predicted_class(&self) -> usize {
        let mut best = 1;
        for (i, &p) in self.class_probs.iter().enumerate().skip(1) {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Annotated action instances of one video.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    instances: Vec<(Interval, usize)>,
    video_length: f64,
}

impl GroundTruthSet {
    pub fn new(instances: Vec<(Interval, usize)>, video_length: f64) -> Result<Self> {
        if !(video_length > 0.0) || !video_length.is_finite() {
            return Err(Error::InvalidGroundTruth(format!(
                "video length must be positive, got {video_length}"
            )));
        }
        for (i, (interval, class_id)) in instances.iter().enumerate() {
            if *class_id == 0 {
                return Err(Error::InvalidGroundTruth(format!(
                    "instance {i} uses the background class"
                )));
            }
            if interval.length() <= 0.0 {
                return Err(Error::InvalidGroundTruth(format!(
                    "instance {i} is degenerate ([{}, {}])",
                    interval.start(),
                    interval.end()
                )));
            }
            if interval.start() < 0.0 || interval.end() > video_length {
                return Err(Error::InvalidGroundTruth(format!(
                    "instance {i} ([{}, {}]) outside video extent [0, {video_length}]",
                    interval.start(),
                    interval.end()
                )));
            }
        }
        Ok(Self {
            instances,
            video_length,
        })
    }

    pub fn instances(&self) -> &[(Interval, usize)] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn video_length(&self) -> f64 {
        self.video_length
    }
}

/// The assignment produced for one video and one training iteration.
///
/// `regress_mask[(t, n)]` gates the IoU term of frame `t` against instance
/// `n`; `confidence_targets[t]` is the binary target of the scoring head;
/// `instance_matched[n]` records which instances found a confident-enough
/// frame; `confidence_order` lists frame indices by nonincreasing
/// confidence (ties broken by ascending frame index).
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentStatus {
    pub regress_mask: Array2<bool>,
    pub instance_matched: Vec<bool>,
    pub confidence_targets: Vec<bool>,
    pub confidence_order: Vec<usize>,
}

impl AssignmentStatus {
    pub fn num_frames(&self) -> usize {
        self.regress_mask.nrows()
    }

    pub fn num_instances(&self) -> usize {
        self.regress_mask.ncols()
    }

    /// Number of frames with target 1.
    pub fn target_count(&self) -> usize {
        self.confidence_targets.iter().filter(|&&y| y).count()
    }

    /// Frames that lie inside at least one instance but keep no regression
    /// entry: these were pruned by the matching walk.
    pub fn pruned_frames(&self, preds: &[FramePrediction], gts: &GroundTruthSet) -> usize {
        (0..preds.len())
            .filter(|&t| {
                let inside = gts
                    .instances()
                    .iter()
                    .any(|(g, _)| g.contains(preds[t].t));
                inside && (0..gts.len()).all(|n| !self.regress_mask[(t, n)])
            })
            .count()
    }

    /// Frames inside at least one ground-truth instance.
    pub fn frames_inside(&self, preds: &[FramePrediction], gts: &GroundTruthSet) -> usize {
        preds
            .iter()
            .filter(|p| gts.instances().iter().any(|(g, _)| g.contains(p.t)))
            .count()
    }
}

/// Strategies for picking the confidence targets (comparison suite rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfAssessVariant {
    /// Per instance, the contained frame with the highest confidence gets
    /// target 1 regardless of overlap quality.
    TopConfidence,
    /// Target 1 for every in-instance frame whose confidence exceeds 0.5.
    ConfidenceThreshold,
    /// Target 1 for every in-instance frame whose tIoU clears the match
    /// threshold, ignoring other frames.
    IouThreshold,
    /// The confidence-ordered greedy matching walk (the default).
    Salad,
}

/// Strategies for overriding the regression mask (comparison suite rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningVariant {
    /// Keep the mask produced by the matching walk.
    Salad,
    /// Every in-instance frame regresses its instance.
    NoPruning,
    /// Per instance, only the contained frame with the best tIoU regresses.
    #[serde(rename = "top1iou")]
    Top1Iou,
    /// Seeded fair coin per in-instance (frame, instance) entry.
    Random,
    /// Replace the mask with one captured from a finished run.
    Frozen,
}

fn check_predictions(preds: &[FramePrediction]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let dist_len = preds[0].class_probs.len();
    for (i, p) in preds.iter().enumerate() {
        if p.confidence.is_nan() {
            return Err(Error::NanConfidence(i));
        }
        if p.class_probs.len() != dist_len {
            return Err(Error::MismatchedLengths {
                what: "class distribution",
                expected: dist_len,
                got: p.class_probs.len(),
            });
        }
    }
    Ok(())
}

/// Frame indices sorted by nonincreasing confidence, ties by ascending index.
fn confidence_order(preds: &[FramePrediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .partial_cmp(&preds[a].confidence)
            .expect("NaN confidence rejected earlier")
            .then(a.cmp(&b))
    });
    order
}

/// The greedy confidence-ordered matching walk.
///
/// Frames are visited in decreasing confidence order. A visited frame inside
/// a still-unmatched instance keeps its regression entry for that instance;
/// if its segment additionally overlaps the instance with tIoU strictly
/// above `match_threshold`, the instance is claimed and the frame's
/// confidence target is set. A frame whose containing instances are all
/// already claimed is pruned: empty mask row, target 0. Frames outside every
/// instance always have an empty row and target 0.
pub fn assign_salad(
    preds: &[FramePrediction],
    gts: &GroundTruthSet,
    match_threshold: f64,
) -> Result<AssignmentStatus> {
    if !(match_threshold > 0.0 && match_threshold < 1.0) {
        return Err(Error::InvalidMatchThreshold(match_threshold));
    }
    check_predictions(preds)?;

    let num_frames = preds.len();
    let num_instances = gts.len();
    let order = confidence_order(preds);

    let mut regress_mask = Array2::from_elem((num_frames, num_instances), false);
    let mut instance_matched = vec![false; num_instances];
    let mut confidence_targets = vec![false; num_frames];

    for &t in &order {
        for (n, (instance, _)) in gts.instances().iter().enumerate() {
            if instance_matched[n] || !instance.contains(preds[t].t) {
                continue;
            }
            regress_mask[(t, n)] = true;
            if tiou(preds[t].interval, *instance) > match_threshold {
                instance_matched[n] = true;
                confidence_targets[t] = true;
            }
        }
    }

    Ok(AssignmentStatus {
        regress_mask,
        instance_matched,
        confidence_targets,
        confidence_order: order,
    })
}

/// Computes the status under the selected target strategy.
///
/// The three alternative strategies do not look at neighbouring frames when
/// assigning targets and never prune: every in-instance frame keeps its
/// regression entry. `Salad` delegates to [`assign_salad`].
pub fn assign_variant(
    strategy: SelfAssessVariant,
    preds: &[FramePrediction],
    gts: &GroundTruthSet,
    match_threshold: f64,
) -> Result<AssignmentStatus> {
    if strategy == SelfAssessVariant::Salad {
        return assign_salad(preds, gts, match_threshold);
    }
    if !(match_threshold > 0.0 && match_threshold < 1.0) {
        return Err(Error::InvalidMatchThreshold(match_threshold));
    }
    check_predictions(preds)?;

    let num_frames = preds.len();
    let num_instances = gts.len();
    let mut regress_mask = Array2::from_elem((num_frames, num_instances), false);
    for t in 0..num_frames {
        for (n, (instance, _)) in gts.instances().iter().enumerate() {
            if instance.contains(preds[t].t) {
                regress_mask[(t, n)] = true;
            }
        }
    }

    let mut confidence_targets = vec![false; num_frames];
    match strategy {
        SelfAssessVariant::TopConfidence => {
            for (n, _) in gts.instances().iter().enumerate() {
                let best = (0..num_frames)
                    .filter(|&t| regress_mask[(t, n)])
                    .max_by(|&a, &b| {
                        preds[a]
                            .confidence
                            .partial_cmp(&preds[b].confidence)
                            .unwrap()
                            .then(b.cmp(&a))
                    });
                if let Some(t) = best {
                    confidence_targets[t] = true;
                }
            }
        }
        SelfAssessVariant::ConfidenceThreshold => {
            for t in 0..num_frames {
                let inside = (0..num_instances).any(|n| regress_mask[(t, n)]);
                confidence_targets[t] = inside && preds[t].confidence > 0.5;
            }
        }
        SelfAssessVariant::IouThreshold => {
            for t in 0..num_frames {
                confidence_targets[t] = gts.instances().iter().enumerate().any(|(n, (g, _))| {
                    regress_mask[(t, n)] && tiou(preds[t].interval, *g) > match_threshold
                });
            }
        }
        SelfAssessVariant::Salad => unreachable!(),
    }

    let instance_matched = (0..num_instances)
        .map(|n| (0..num_frames).any(|t| confidence_targets[t] && regress_mask[(t, n)]))
        .collect();

    Ok(AssignmentStatus {
        regress_mask,
        instance_matched,
        confidence_targets,
        confidence_order: confidence_order(preds),
    })
}

/// Overrides the regression mask of `status` per the pruning strategy,
/// leaving targets, matched flags and the confidence order untouched.
pub fn apply_pruning_variant(
    strategy: PruningVariant,
    status: &AssignmentStatus,
    preds: &[FramePrediction],
    gts: &GroundTruthSet,
    rng_seed: u64,
    frozen_mask: Option<&Array2<bool>>,
) -> Result<AssignmentStatus> {
    let num_frames = preds.len();
    let num_instances = gts.len();
    let mut out = status.clone();

    match strategy {
        PruningVariant::Salad => {}
        PruningVariant::NoPruning => {
            for t in 0..num_frames {
                for (n, (instance, _)) in gts.instances().iter().enumerate() {
                    out.regress_mask[(t, n)] = instance.contains(preds[t].t);
                }
            }
        }
        PruningVariant::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            for t in 0..num_frames {
                for (n, (instance, _)) in gts.instances().iter().enumerate() {
                    out.regress_mask[(t, n)] =
                        instance.contains(preds[t].t) && rng.gen_bool(0.5);
                }
            }
        }
        PruningVariant::Top1Iou => {
            out.regress_mask.fill(false);
            for (n, (instance, _)) in gts.instances().iter().enumerate() {
                let best = (0..num_frames)
                    .filter(|&t| instance.contains(preds[t].t))
                    .max_by(|&a, &b| {
                        tiou(preds[a].interval, *instance)
                            .partial_cmp(&tiou(preds[b].interval, *instance))
                            .unwrap()
                            .then(b.cmp(&a))
                    });
                if let Some(t) = best {
                    out.regress_mask[(t, n)] = true;
                }
            }
        }
        PruningVariant::Frozen => {
            let mask = frozen_mask.ok_or(Error::MissingFrozenMask)?;
            if mask.dim() != (num_frames, num_instances) {
                return Err(Error::FrozenMaskShape {
                    expected_rows: num_frames,
                    expected_cols: num_instances,
                    rows: mask.nrows(),
                    cols: mask.ncols(),
                });
            }
            out.regress_mask = mask.clone();
        }
    }

    Ok(out)
}
