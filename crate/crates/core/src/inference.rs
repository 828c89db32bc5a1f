//! From per-frame outputs to ranked detections: proposal extraction,
//! confidence fusion, Gaussian soft-NMS and a top-k cap.

use serde::{Deserialize, Serialize};

use crate::assignment::FramePrediction;
use crate::error::{Error, Result};
use crate::interval::{tiou, Interval};

/// An inference-time detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub interval: Interval,
    pub score: f64,
    pub class_id: usize,
    pub source_frame: usize,
}

/// How the regression confidence `p_r` and the classification confidence
/// `p_c` combine into the proposal score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    /// Score is the regression confidence alone (the default).
    RegressionOnly,
    /// `(p_r + p_c) / 2`.
    ArithmeticMean,
    /// `sqrt(p_r * p_c)`.
    GeometricMean,
    /// `p_r * (1 - exp(-zeta * p_c))`: damps the score when the classifier
    /// is ambiguous.
    NormalizedProduct,
}

/// Default sharpness of the normalized-product fusion.
pub const DEFAULT_FUSION_ZETA: f64 = 4.0;

pub fn fuse_confidence(p_r: f64, p_c: f64, strategy: FusionStrategy, zeta: f64) -> Result<f64> {
    for v in [p_r, p_c] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ConfidenceOutOfRange(v));
        }
    }
    Ok(match strategy {
        FusionStrategy::RegressionOnly => p_r,
        FusionStrategy::ArithmeticMean => 0.5 * (p_r + p_c),
        FusionStrategy::GeometricMean => (p_r * p_c).sqrt(),
        FusionStrategy::NormalizedProduct => p_r * (1.0 - (-zeta * p_c).exp()),
    })
}

/// One proposal per frame: the regressed segment clipped to the video
/// extent, the most likely action class, and the fused score.
pub fn extract_proposals(
    preds: &[FramePrediction],
    video_length: f64,
    fusion: FusionStrategy,
    zeta: f64,
) -> Result<Vec<Proposal>> {
    preds
        .iter()
        .enumerate()
        .map(|(frame, p)| {
            let score = fuse_confidence(p.confidence, p.class_confidence(), fusion, zeta)?;
            Ok(Proposal {
                interval: p.interval.clip(0.0, video_length),
                score,
                class_id: p.predicted_class(),
                source_frame: frame,
            })
        })
        .collect()
}

fn by_score_desc(a: &Proposal, b: &Proposal) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(
            a.interval
                .start()
                .partial_cmp(&b.interval.start())
                .unwrap_or(std::cmp::Ordering::Equal),
        )
        .then(a.source_frame.cmp(&b.source_frame))
}

/// Gaussian soft-NMS: repeatedly keep the highest-scoring remaining
/// proposal and decay every other remaining proposal of the same class by
/// `exp(-tiou^2 / sigma)`; proposals falling below `min_score` are dropped.
/// With `per_class = false` the decay ignores class labels. Output is
/// sorted by final score, descending.
pub fn soft_nms(
    proposals: Vec<Proposal>,
    sigma: f64,
    min_score: f64,
    per_class: bool,
) -> Result<Vec<Proposal>> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let mut remaining = proposals;
    let mut kept = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = remaining
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| by_score_desc(a, b))
            .map(|(i, _)| i)
            .expect("nonempty");
        let top = remaining.swap_remove(best);
        for other in &mut remaining {
            if per_class && other.class_id != top.class_id {
                continue;
            }
            let overlap = tiou(top.interval, other.interval);
            other.score *= (-overlap * overlap / sigma).exp();
        }
        remaining.retain(|p| p.score >= min_score);
        kept.push(top);
    }
    Ok(kept)
}

/// First `k` proposals by score, ties broken by earlier start time.
pub fn top_k(mut proposals: Vec<Proposal>, k: usize) -> Vec<Proposal> {
    proposals.sort_by(by_score_desc);
    proposals.truncate(k);
    proposals
}
