//! The joint training loss, built as graph nodes over the head outputs.
//!
//! Three pieces: a binary cross entropy pulling each frame's confidence
//! towards its assignment target, a signed-overlap term rewarding tIoU
//! between masked frame/instance pairs, and a per-frame classification loss
//! gated off on background frames. The assignment itself is recomputed
//! outside the graph every iteration and enters only as constants, so no
//! gradient flows through the matching decisions.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentStatus, GroundTruthSet};
use crate::graph::{Graph, NodeId, Real};

/// Guard for probabilities entering a logarithm.
pub const PROB_EPS: f64 = 1e-7;

/// Loss weighting and matching threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Weight of the overlap (regression) term.
    pub regression_weight: f64,
    /// Weight of the classification term in the total loss.
    pub classification_weight: f64,
    /// tIoU threshold a frame must clear to claim an instance.
    pub match_threshold: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            regression_weight: 1.0,
            classification_weight: 0.1,
            match_threshold: 0.5,
        }
    }
}

/// Per-frame classification targets: class id (0 = background) and the
/// background gate (`weight = false` exactly on background frames).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabels {
    pub class_ids: Vec<usize>,
    pub weights: Vec<bool>,
}

/// Labels each anchor with the class of the instance containing it. When
/// instances overlap at a frame, the one with the earlier start wins (ties
/// by instance order). Frames outside every instance get the background
/// class and a zero weight.
pub fn frame_labels(anchors: &[f64], gts: &GroundTruthSet) -> FrameLabels {
    let mut class_ids = vec![0usize; anchors.len()];
    for (t, &anchor) in anchors.iter().enumerate() {
        let mut winner: Option<(f64, usize)> = None;
        for (interval, class_id) in gts.instances() {
            if interval.contains(anchor) {
                let key = interval.start();
                if winner.map_or(true, |(best, _)| key < best) {
                    winner = Some((key, *class_id));
                }
            }
        }
        if let Some((_, class_id)) = winner {
            class_ids[t] = class_id;
        }
    }
    let weights = class_ids.iter().map(|&c| c != 0).collect();
    FrameLabels { class_ids, weights }
}

/// How the classification term treats the softmax output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsLossMode {
    /// Binary cross entropy per class against the one-hot label, summed
    /// over all `num_classes + 1` outputs (the default).
    PerClassBce,
    /// Plain categorical cross entropy of the labelled class.
    CategoricalCe,
}

fn column<F: Real>(values: impl Iterator<Item = f64>) -> Array2<F> {
    let data: Vec<F> = values.map(F::from_f64).collect();
    let rows = data.len();
    Array2::from_shape_vec((rows, 1), data).expect("column shape")
}

/// `-(target*ln(p) + (1-target)*ln(1-p))` summed over a column of
/// probabilities, with constant binary targets.
fn bce_column<F: Real>(g: &mut Graph<F>, probs: NodeId, targets: &[bool]) -> NodeId {
    let eps = F::from_f64(PROB_EPS);
    let one = F::one();
    let p = g.clamp(probs, eps, one - eps);
    let y = g.constant(column(targets.iter().map(|&b| b as u8 as f64)));
    let not_y = g.constant(column(targets.iter().map(|&b| 1.0 - b as u8 as f64)));
    let ln_p = g.ln(p);
    let q = g.sub_from(p, one);
    let ln_q = g.ln(q);
    let pos = g.mul(y, ln_p);
    let neg = g.mul(not_y, ln_q);
    let ll = g.add(pos, neg);
    let total = g.sum_all(ll);
    g.scale(total, -one)
}

/// The regression/self-assessment loss.
///
/// `offsets` (`T x 2`) and `confidence` (`T x 1`) are forward outputs;
/// `anchors` and `scale` replay the offset-to-segment mapping inside the
/// graph. Returns the cross entropy of the confidence against the
/// assignment targets minus `regression_weight` times the masked sum of
/// signed tIoU values. Mask and targets are constants.
pub fn loss_rsa<F: Real>(
    g: &mut Graph<F>,
    offsets: NodeId,
    confidence: NodeId,
    anchors: &[f64],
    scale: f64,
    gts: &GroundTruthSet,
    status: &AssignmentStatus,
    regression_weight: f64,
) -> NodeId {
    let bce = bce_column(g, confidence, &status.confidence_targets);

    let mut terms = vec![bce];
    if !gts.is_empty() {
        let t_col = g.constant(column(anchors.iter().copied()));
        let eps_start = g.slice_cols(offsets, 0, 1);
        let eps_end = g.slice_cols(offsets, 1, 2);
        let scaled_start = g.scale(eps_start, F::from_f64(scale));
        let scaled_end = g.scale(eps_end, F::from_f64(scale));
        let seg_start = g.sub(t_col, scaled_start);
        let seg_end = g.add(t_col, scaled_end);

        for (n, (instance, _)) in gts.instances().iter().enumerate() {
            let active: Vec<bool> = (0..anchors.len())
                .map(|t| status.regress_mask[(t, n)])
                .collect();
            if !active.iter().any(|&a| a) {
                continue;
            }
            let s = F::from_f64(instance.start());
            let e = F::from_f64(instance.end());
            // intersection / union against the constant instance; the union
            // is at least the instance length, so the division is safe for
            // every frame, masked or not
            let inter_hi = g.min_scalar(seg_end, e);
            let inter_lo = g.max_scalar(seg_start, s);
            let inter = g.sub(inter_hi, inter_lo);
            let union_hi = g.max_scalar(seg_end, e);
            let union_lo = g.min_scalar(seg_start, s);
            let union = g.sub(union_hi, union_lo);
            let overlap = g.div(inter, union);
            let mask = g.constant(column(active.iter().map(|&a| a as u8 as f64)));
            let masked = g.mul(mask, overlap);
            let sum = g.sum_all(masked);
            terms.push(g.scale(sum, F::from_f64(-regression_weight)));
        }
    }
    g.add_all(&terms)
}

/// The classification loss over softmax outputs (`T x (num_classes + 1)`),
/// gated to zero on background frames.
pub fn loss_cls<F: Real>(
    g: &mut Graph<F>,
    class_probs: NodeId,
    labels: &FrameLabels,
    mode: ClsLossMode,
) -> NodeId {
    let num_frames = labels.class_ids.len();
    let num_outputs = g.value(class_probs).ncols();
    let eps = F::from_f64(PROB_EPS);
    let one = F::one();

    let mut onehot = Array2::zeros((num_frames, num_outputs));
    let mut gate = Array2::zeros((num_frames, num_outputs));
    for t in 0..num_frames {
        onehot[(t, labels.class_ids[t])] = one;
        if labels.weights[t] {
            for c in 0..num_outputs {
                gate[(t, c)] = one;
            }
        }
    }

    let p = g.clamp(class_probs, eps, one - eps);
    let ln_p = g.ln(p);
    let onehot = g.constant(onehot);
    let gate = g.constant(gate);

    let ll = match mode {
        ClsLossMode::PerClassBce => {
            let q = g.sub_from(p, one);
            let ln_q = g.ln(q);
            let not_onehot = g.sub_from(onehot, one);
            let pos = g.mul(onehot, ln_p);
            let neg = g.mul(not_onehot, ln_q);
            g.add(pos, neg)
        }
        ClsLossMode::CategoricalCe => g.mul(onehot, ln_p),
    };
    let gated = g.mul(gate, ll);
    let total = g.sum_all(gated);
    g.scale(total, -one)
}

/// Scalar nodes of the combined loss.
pub struct LossNodes {
    pub total: NodeId,
    pub rsa: NodeId,
    pub cls: NodeId,
}

/// `loss_rsa + classification_weight * loss_cls`.
#[allow(clippy::too_many_arguments)]
pub fn loss_total<F: Real>(
    g: &mut Graph<F>,
    offsets: NodeId,
    confidence: NodeId,
    class_probs: NodeId,
    anchors: &[f64],
    scale: f64,
    gts: &GroundTruthSet,
    status: &AssignmentStatus,
    labels: &FrameLabels,
    weights: &LossWeights,
    mode: ClsLossMode,
) -> LossNodes {
    let rsa = loss_rsa(
        g,
        offsets,
        confidence,
        anchors,
        scale,
        gts,
        status,
        weights.regression_weight,
    );
    let cls = loss_cls(g, class_probs, labels, mode);
    let weighted = g.scale(cls, F::from_f64(weights.classification_weight));
    let total = g.add(rsa, weighted);
    LossNodes { total, rsa, cls }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign_salad, FramePrediction};
    use crate::interval::Interval;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e).unwrap()
    }

    /// Offsets that regress the given absolute segments from the anchors.
    fn offsets_for(segments: &[(f64, f64)], anchors: &[f64], scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((anchors.len(), 2), |(t, c)| {
            if c == 0 {
                (anchors[t] - segments[t].0) / scale
            } else {
                (segments[t].1 - anchors[t]) / scale
            }
        })
    }

    fn empty_status(num_frames: usize) -> AssignmentStatus {
        AssignmentStatus {
            regress_mask: Array2::from_elem((num_frames, 0), false),
            instance_matched: vec![],
            confidence_targets: vec![false; num_frames],
            confidence_order: (0..num_frames).collect(),
        }
    }

    #[test]
    fn perfect_confidence_with_no_regression_is_near_zero() {
        let mut g: Graph<f64> = Graph::new();
        let offsets = g.leaf(arr2(&[[0.1, 0.1]]));
        let confidence = g.leaf(arr2(&[[1.0 - 1e-7]]));
        let gts = GroundTruthSet::new(vec![], 1.0).unwrap();
        let mut status = empty_status(1);
        status.confidence_targets[0] = true;
        let loss = loss_rsa(&mut g, offsets, confidence, &[0.5], 1.0, &gts, &status, 1.0);
        assert!(g.scalar_value(loss).abs() < 1e-6);
    }

    #[test]
    fn coin_flip_confidence_costs_ln_two() {
        let mut g: Graph<f64> = Graph::new();
        let offsets = g.leaf(arr2(&[[0.1, 0.1]]));
        let confidence = g.leaf(arr2(&[[0.5]]));
        let gts = GroundTruthSet::new(vec![], 1.0).unwrap();
        let status = empty_status(1);
        let loss = loss_rsa(&mut g, offsets, confidence, &[0.5], 1.0, &gts, &status, 1.0);
        assert!((g.scalar_value(loss) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    /// The four-frame worked example, checked against a plain-arithmetic
    /// evaluation of the same formula.
    #[test]
    fn worked_example_matches_scalar_arithmetic() {
        let anchors = [0.0, 1.0, 2.0, 3.0];
        let scale = 10.0;
        let segments = [(0.0, 1.0), (0.0, 1.5), (0.0, 2.2), (2.5, 3.5)];
        let confidences = [0.9, 0.2, 0.8, 0.5];
        let gts = GroundTruthSet::new(vec![(iv(0.0, 2.0), 1)], 10.0).unwrap();

        let preds: Vec<FramePrediction> = (0..4)
            .map(|t| FramePrediction {
                t: anchors[t],
                interval: iv(segments[t].0, segments[t].1),
                confidence: confidences[t],
                class_probs: vec![0.5, 0.5],
            })
            .collect();
        let status = assign_salad(&preds, &gts, 0.5).unwrap();

        let mut g: Graph<f64> = Graph::new();
        let offsets = g.leaf(offsets_for(&segments, &anchors, scale));
        let confidence = g.leaf(Array2::from_shape_fn((4, 1), |(t, _)| confidences[t]));
        let loss = loss_rsa(
            &mut g, offsets, confidence, &anchors, scale, &gts, &status, 1.0,
        );

        // independent evaluation: targets are (0,0,1,0), masked frames 0 and 2
        let bce = -(1.0f64 - 0.9).ln() - (1.0f64 - 0.2).ln() - 0.8f64.ln() - (1.0f64 - 0.5).ln();
        let overlap = 0.5 + 2.0 / 2.2;
        assert!((g.scalar_value(loss) - (bce - overlap)).abs() < 1e-12);
    }

    #[test]
    fn all_background_classification_is_free() {
        let mut g: Graph<f64> = Graph::new();
        let probs = g.leaf(arr2(&[[0.6, 0.2, 0.2], [0.1, 0.8, 0.1]]));
        let labels = FrameLabels {
            class_ids: vec![0, 0],
            weights: vec![false, false],
        };
        let loss = loss_cls(&mut g, probs, &labels, ClsLossMode::PerClassBce);
        assert_eq!(g.scalar_value(loss), 0.0);
    }

    #[test]
    fn exact_one_hot_prediction_is_near_zero() {
        let mut g: Graph<f64> = Graph::new();
        let e = 1e-9;
        let probs = g.leaf(arr2(&[[e, 1.0 - 2.0 * e, e]]));
        let labels = FrameLabels {
            class_ids: vec![1],
            weights: vec![true],
        };
        let loss = loss_cls(&mut g, probs, &labels, ClsLossMode::PerClassBce);
        assert!(g.scalar_value(loss).abs() < 1e-5);
    }

    #[test]
    fn uniform_prediction_closed_form() {
        // 3 classes + background, uniform prediction, true class 2
        let mut g: Graph<f64> = Graph::new();
        let probs = g.leaf(arr2(&[[0.25, 0.25, 0.25, 0.25]]));
        let labels = FrameLabels {
            class_ids: vec![2],
            weights: vec![true],
        };
        let loss = loss_cls(&mut g, probs, &labels, ClsLossMode::PerClassBce);
        let expected = -(0.25f64.ln() + 3.0 * 0.75f64.ln());
        assert!((g.scalar_value(loss) - expected).abs() < 1e-12);

        let ce = loss_cls(&mut g, probs, &labels, ClsLossMode::CategoricalCe);
        assert!((g.scalar_value(ce) + 0.25f64.ln()).abs() < 1e-12);
    }

    fn total_parts(weights: &LossWeights, rsa: f64, cls: f64) -> f64 {
        rsa + weights.classification_weight * cls
    }

    #[test]
    fn total_combines_parts_linearly() {
        let anchors = [0.5, 1.5];
        let gts = GroundTruthSet::new(vec![(iv(0.0, 1.0), 1)], 2.0).unwrap();
        let preds: Vec<FramePrediction> = anchors
            .iter()
            .map(|&t| FramePrediction {
                t,
                interval: iv(t - 0.4, t + 0.4),
                confidence: 0.7,
                class_probs: vec![0.2, 0.8],
            })
            .collect();
        let status = assign_salad(&preds, &gts, 0.5).unwrap();
        let labels = frame_labels(&anchors, &gts);

        for cw in [0.0, 0.1, 2.0] {
            let weights = LossWeights {
                classification_weight: cw,
                ..Default::default()
            };
            let mut g: Graph<f64> = Graph::new();
            let offsets = g.leaf(arr2(&[[0.2, 0.2], [0.2, 0.2]]));
            let confidence = g.leaf(arr2(&[[0.7], [0.7]]));
            let probs = g.leaf(arr2(&[[0.2, 0.8], [0.2, 0.8]]));
            let nodes = loss_total(
                &mut g,
                offsets,
                confidence,
                probs,
                &anchors,
                2.0,
                &gts,
                &status,
                &labels,
                &weights,
                ClsLossMode::PerClassBce,
            );
            let total = g.scalar_value(nodes.total);
            let rsa = g.scalar_value(nodes.rsa);
            let cls = g.scalar_value(nodes.cls);
            assert!((total - total_parts(&weights, rsa, cls)).abs() < 1e-12);
            if cw == 0.0 {
                assert_eq!(total, rsa);
            }
        }
    }

    #[test]
    fn frame_labels_earlier_start_wins_on_overlap() {
        let gts = GroundTruthSet::new(vec![(iv(2.0, 6.0), 2), (iv(0.0, 4.0), 1)], 8.0).unwrap();
        let labels = frame_labels(&[1.0, 3.0, 5.0, 7.0], &gts);
        assert_eq!(labels.class_ids, vec![1, 1, 2, 0]);
        assert_eq!(labels.weights, vec![true, true, true, false]);
    }

    /// Builds a random instance and returns everything the loss needs.
    struct Instance {
        anchors: Vec<f64>,
        scale: f64,
        gts: GroundTruthSet,
        status: AssignmentStatus,
        labels: FrameLabels,
        offsets: Array2<f64>,
        confidence: Array2<f64>,
        class_probs: Array2<f64>,
    }

    fn random_loss_instance(seed: u64, num_frames: usize, num_classes: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let length = num_frames as f64;
        let anchors: Vec<f64> = (0..num_frames).map(|i| i as f64 + 0.5).collect();
        let g1 = iv(0.4, length * 0.45);
        let g2 = iv(length * 0.55, length * 0.93);
        let gts = GroundTruthSet::new(vec![(g1, 1), (g2, 2)], length).unwrap();

        let offsets =
            Array2::from_shape_fn((num_frames, 2), |_| rng.gen_range(0.05..0.9));
        let confidence =
            Array2::from_shape_fn((num_frames, 1), |_| rng.gen_range(0.05..0.95));
        let mut class_probs = Array2::from_shape_fn((num_frames, num_classes + 1), |_| {
            rng.gen_range(0.05..1.0)
        });
        for mut row in class_probs.rows_mut() {
            let sum: f64 = row.iter().sum();
            row.mapv_inplace(|v| v / sum);
        }

        let preds: Vec<FramePrediction> = (0..num_frames)
            .map(|t| FramePrediction {
                t: anchors[t],
                interval: iv(
                    anchors[t] - offsets[(t, 0)] * length,
                    anchors[t] + offsets[(t, 1)] * length,
                ),
                confidence: confidence[(t, 0)],
                class_probs: class_probs.row(t).to_vec(),
            })
            .collect();
        let status = assign_salad(&preds, &gts, 0.5).unwrap();
        let labels = frame_labels(&anchors, &gts);
        Instance {
            anchors,
            scale: length,
            gts,
            status,
            labels,
            offsets,
            confidence,
            class_probs,
        }
    }

    fn eval_total(inst: &Instance, off: &Array2<f64>, conf: &Array2<f64>, cls: &Array2<f64>) -> f64 {
        let mut g: Graph<f64> = Graph::new();
        let o = g.leaf(off.clone());
        let c = g.leaf(conf.clone());
        let p = g.leaf(cls.clone());
        let nodes = loss_total(
            &mut g,
            o,
            c,
            p,
            &inst.anchors,
            inst.scale,
            &inst.gts,
            &inst.status,
            &inst.labels,
            &LossWeights::default(),
            ClsLossMode::PerClassBce,
        );
        g.scalar_value(nodes.total)
    }

    /// Central finite differences over every head output entry, against the
    /// analytic gradient, with the assignment held fixed.
    #[test]
    fn head_output_gradients_match_finite_differences() {
        let inst = random_loss_instance(31, 8, 2);

        let mut g: Graph<f64> = Graph::new();
        let o = g.leaf(inst.offsets.clone());
        let c = g.leaf(inst.confidence.clone());
        let p = g.leaf(inst.class_probs.clone());
        let nodes = loss_total(
            &mut g,
            o,
            c,
            p,
            &inst.anchors,
            inst.scale,
            &inst.gts,
            &inst.status,
            &inst.labels,
            &LossWeights::default(),
            ClsLossMode::PerClassBce,
        );
        g.backward(nodes.total).unwrap();

        let step = 1e-5;
        let heads: [(&Array2<f64>, NodeId); 3] = [
            (&inst.offsets, o),
            (&inst.confidence, c),
            (&inst.class_probs, p),
        ];
        for (hi, (base, id)) in heads.iter().enumerate() {
            let analytic = g.grad(*id).cloned().unwrap();
            for r in 0..base.nrows() {
                for col in 0..base.ncols() {
                    let perturb = |d: f64| {
                        let mut off = inst.offsets.clone();
                        let mut conf = inst.confidence.clone();
                        let mut cls = inst.class_probs.clone();
                        match hi {
                            0 => off[(r, col)] += d,
                            1 => conf[(r, col)] += d,
                            _ => cls[(r, col)] += d,
                        }
                        eval_total(&inst, &off, &conf, &cls)
                    };
                    let fd = (perturb(step) - perturb(-step)) / (2.0 * step);
                    let an = analytic[(r, col)];
                    let denom = an.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (an - fd).abs() / denom < 1e-4,
                        "head {hi} entry ({r},{col}): analytic {an}, fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn confidence_gradient_has_correct_sign() {
        let inst = random_loss_instance(77, 8, 2);
        let mut g: Graph<f64> = Graph::new();
        let o = g.leaf(inst.offsets.clone());
        let c = g.leaf(inst.confidence.clone());
        let p = g.leaf(inst.class_probs.clone());
        let nodes = loss_total(
            &mut g,
            o,
            c,
            p,
            &inst.anchors,
            inst.scale,
            &inst.gts,
            &inst.status,
            &inst.labels,
            &LossWeights::default(),
            ClsLossMode::PerClassBce,
        );
        g.backward(nodes.total).unwrap();
        let grad = g.grad(c).unwrap();
        for t in 0..inst.anchors.len() {
            if inst.status.confidence_targets[t] {
                // raising the confidence of a positive frame lowers the loss
                assert!(grad[(t, 0)] < 0.0);
            } else {
                assert!(grad[(t, 0)] > 0.0);
            }
        }
    }

    #[test]
    fn masked_out_frames_receive_no_regression_gradient() {
        let inst = random_loss_instance(5, 10, 2);
        let mut g: Graph<f64> = Graph::new();
        let o = g.leaf(inst.offsets.clone());
        let c = g.leaf(inst.confidence.clone());
        let nodes = loss_rsa(
            &mut g,
            o,
            c,
            &inst.anchors,
            inst.scale,
            &inst.gts,
            &inst.status,
            1.0,
        );
        g.backward(nodes).unwrap();
        let grad = g.grad(o).unwrap();
        for t in 0..inst.anchors.len() {
            let masked_out = (0..inst.gts.len()).all(|n| !inst.status.regress_mask[(t, n)]);
            if masked_out {
                assert_eq!(grad[(t, 0)], 0.0);
                assert_eq!(grad[(t, 1)], 0.0);
            }
        }
    }

    #[test]
    fn classification_loss_is_equivariant_under_class_relabeling() {
        let inst = random_loss_instance(13, 6, 2);
        // swap action classes 1 and 2 everywhere
        let swap = |c: usize| match c {
            1 => 2,
            2 => 1,
            other => other,
        };
        let labels_swapped = FrameLabels {
            class_ids: inst.labels.class_ids.iter().map(|&c| swap(c)).collect(),
            weights: inst.labels.weights.clone(),
        };
        let mut probs_swapped = inst.class_probs.clone();
        for t in 0..probs_swapped.nrows() {
            let tmp = probs_swapped[(t, 1)];
            probs_swapped[(t, 1)] = probs_swapped[(t, 2)];
            probs_swapped[(t, 2)] = tmp;
        }

        let grad_of = |probs: &Array2<f64>, labels: &FrameLabels| {
            let mut g: Graph<f64> = Graph::new();
            let p = g.leaf(probs.clone());
            let loss = loss_cls(&mut g, p, labels, ClsLossMode::PerClassBce);
            g.backward(loss).unwrap();
            (g.scalar_value(loss), g.grad(p).cloned().unwrap())
        };
        let (loss_a, grad_a) = grad_of(&inst.class_probs, &inst.labels);
        let (loss_b, grad_b) = grad_of(&probs_swapped, &labels_swapped);
        assert!((loss_a - loss_b).abs() < 1e-12);
        for t in 0..grad_a.nrows() {
            assert!((grad_a[(t, 1)] - grad_b[(t, 2)]).abs() < 1e-12);
            assert!((grad_a[(t, 2)] - grad_b[(t, 1)]).abs() < 1e-12);
            assert!((grad_a[(t, 0)] - grad_b[(t, 0)]).abs() < 1e-12);
        }
    }
}
