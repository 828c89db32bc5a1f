//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (visible with `--nocapture`).
//!
//! Criteria 1-5 and 10 are oracle and property checks that run in seconds.
//! Criteria 6-9 share a set of benchmark training runs (seven variants,
//! three seeds each) that take tens of minutes on a single core; the runs
//! are computed once behind a lock and reused across those tests.

use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salad_core::assignment::{
    assign_salad, AssignmentStatus, FramePrediction, GroundTruthSet, PruningVariant,
    SelfAssessVariant,
};
use salad_core::benchmark::{
    benchmark_model_config, benchmark_synth_config, benchmark_train_config, BENCHMARK_MAP_FLOOR,
    BENCHMARK_SEED,
};
use salad_core::data::Dataset;
use salad_core::datagen::generate_synthetic;
use salad_core::evaluation::{average_precision, map_at_thresholds};
use salad_core::graph::Graph;
use salad_core::inference::{soft_nms, FusionStrategy, Proposal};
use salad_core::interval::{segment_from_offsets, tiou, tiou_raw, Interval, OffsetPair};
use salad_core::loss::{frame_labels, loss_total, ClsLossMode, LossWeights};
use salad_core::model::{forward, frame_predictions, ModelConfig, ModelParams};
use salad_core::trainer::{
    evaluate_dataset, render_metric_log, train, InferenceSettings, TrainConfig, TrainOutput,
};

fn iv(s: f64, e: f64) -> Interval {
    Interval::new(s, e).unwrap()
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn c01_tiou_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let k = 10_000;
    for _ in 0..10_000 {
        let s1 = rng.gen_range(-40.0..40.0);
        let a = iv(s1, s1 + rng.gen_range(0.05..30.0));
        let s2 = rng.gen_range(-40.0..40.0);
        let b = iv(s2, s2 + rng.gen_range(0.05..30.0));

        // direct evaluation of the intersection-over-union formula
        let direct =
            (a.end().min(b.end()) - a.start().max(b.start()))
                / (a.end().max(b.end()) - a.start().min(b.start()));
        assert_eq!(tiou_raw(a, b), direct);
        assert_eq!(tiou(a, b), direct.max(0.0));

        // uniform-grid overlap estimate over the joint span
        let lo = a.start().min(b.start());
        let hi = a.end().max(b.end());
        let step = (hi - lo) / k as f64;
        let mut inter = 0usize;
        let mut union = 0usize;
        for i in 0..k {
            let t = lo + (i as f64 + 0.5) * step;
            let in_a = a.contains(t);
            let in_b = b.contains(t);
            inter += (in_a && in_b) as usize;
            union += (in_a || in_b) as usize;
        }
        let grid = if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        };
        assert!(
            (tiou(a, b) - grid).abs() <= 2e-4,
            "tiou {} vs grid {grid}",
            tiou(a, b)
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 1 took {elapsed:.2}s (budget 5s)");
    println!("ACCEPTANCE C1 PASS tiou oracle: 10000 pairs, grid K=10000, {elapsed:.2}s");
}

// ---------------------------------------------------------------- criterion 2

/// Literal, shortcut-free re-execution of the matching walk.
fn reference_assignment(
    preds: &[FramePrediction],
    gts: &GroundTruthSet,
    mu: f64,
) -> AssignmentStatus {
    let mut remaining: Vec<usize> = (0..preds.len()).collect();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (a, b) = (remaining[i], remaining[best]);
            if preds[a].confidence > preds[b].confidence
                || (preds[a].confidence == preds[b].confidence && a < b)
            {
                best = i;
            }
        }
        order.push(remaining.remove(best));
    }
    let mut mask = Array2::from_elem((preds.len(), gts.len()), false);
    let mut matched = vec![false; gts.len()];
    let mut targets = vec![false; preds.len()];
    for &t in &order {
        for n in 0..gts.len() {
            let (instance, _) = gts.instances()[n];
            if !matched[n] && instance.contains(preds[t].t) {
                mask[(t, n)] = true;
                if tiou(preds[t].interval, instance) > mu {
                    matched[n] = true;
                    targets[t] = true;
                }
            }
        }
    }
    AssignmentStatus {
        regress_mask: mask,
        instance_matched: matched,
        confidence_targets: targets,
        confidence_order: order,
    }
}

#[test]
fn c02_assignment_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..1500 {
        let num_frames = rng.gen_range(1..=32);
        let length = num_frames as f64;
        let num_instances = rng.gen_range(0..=4);
        let mut instances = Vec::new();
        for _ in 0..num_instances {
            let s = rng.gen_range(0.0..length - 0.25);
            let e = rng.gen_range(s + 0.1..length.min(s + 0.1 + length * 0.6));
            instances.push((iv(s, e), rng.gen_range(1..=3)));
        }
        let gts = GroundTruthSet::new(instances, length).unwrap();
        let preds: Vec<FramePrediction> = (0..num_frames)
            .map(|i| {
                let t = i as f64 + 0.5;
                FramePrediction {
                    t,
                    interval: iv(t - rng.gen_range(0.0..length), t + rng.gen_range(0.0..length)),
                    confidence: rng.gen_range(0.0..1.0),
                    class_probs: vec![0.4, 0.3, 0.3],
                }
            })
            .collect();
        let mu = rng.gen_range(0.05..0.95);
        let ours = assign_salad(&preds, &gts, mu).unwrap();
        let reference = reference_assignment(&preds, &gts, mu);
        assert_eq!(ours, reference, "case {case} diverged");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 2 took {elapsed:.2}s (budget 10s)");
    println!("ACCEPTANCE C2 PASS assignment oracle: 1500 random instances, exact match, {elapsed:.2}s");
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn c03_end_to_end_gradient_check() {
    let started = Instant::now();
    let config = ModelConfig::new(4, 8, 2, 424242);
    let params: ModelParams<f64> = ModelParams::init(&config).unwrap();

    let num_frames = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let features = Array2::from_shape_fn((num_frames, 4), |_| rng.gen_range(-1.0..1.0));
    let anchors: Vec<f64> = (0..num_frames).map(|i| i as f64 + 0.5).collect();
    let scale = num_frames as f64;
    let gts = GroundTruthSet::new(vec![(iv(0.4, 2.6), 1), (iv(3.2, 5.4), 2)], scale).unwrap();
    let labels = frame_labels(&anchors, &gts);
    let weights = LossWeights::default();

    // assignment held fixed during the check: computed once from the
    // unperturbed outputs
    let status = {
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let out = forward(&mut g, &params, &bound, &features).unwrap();
        let preds = frame_predictions(
            g.value(out.offsets),
            g.value(out.confidence),
            g.value(out.class_probs),
            &anchors,
            scale,
        )
        .unwrap();
        assign_salad(&preds, &gts, weights.match_threshold).unwrap()
    };

    let eval_loss = |p: &ModelParams<f64>| -> f64 {
        let mut g = Graph::new();
        let bound = p.bind(&mut g);
        let out = forward(&mut g, p, &bound, &features).unwrap();
        let nodes = loss_total(
            &mut g,
            out.offsets,
            out.confidence,
            out.class_probs,
            &anchors,
            scale,
            &gts,
            &status,
            &labels,
            &weights,
            ClsLossMode::PerClassBce,
        );
        g.scalar_value(nodes.total)
    };

    // analytic gradients
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = forward(&mut g, &params, &bound, &features).unwrap();
    let nodes = loss_total(
        &mut g,
        out.offsets,
        out.confidence,
        out.class_probs,
        &anchors,
        scale,
        &gts,
        &status,
        &labels,
        &weights,
        ClsLossMode::PerClassBce,
    );
    g.backward(nodes.total).unwrap();
    let analytic = params.collect_grads(&g, &bound);

    let step = 1e-5;
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    for (pi, entry) in params.entries().iter().enumerate() {
        for idx in 0..entry.value.len() {
            let (r, c) = (idx / entry.value.ncols(), idx % entry.value.ncols());
            let mut plus = params.clone();
            plus.entries_mut()[pi].value[(r, c)] += step;
            let mut minus = params.clone();
            minus.entries_mut()[pi].value[(r, c)] -= step;
            let fd = (eval_loss(&plus) - eval_loss(&minus)) / (2.0 * step);
            let an = analytic[pi][(r, c)];
            let denom = an.abs().max(fd.abs());
            let rel = if denom < 1e-8 {
                0.0
            } else {
                (an - fd).abs() / denom
            };
            worst = worst.max(rel);
            assert!(
                rel < 1e-3,
                "tensor '{}' entry ({r},{c}): analytic {an}, fd {fd}, rel {rel}",
                entry.name
            );
            checked += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 3 took {elapsed:.2}s (budget 60s)");
    println!(
        "ACCEPTANCE C3 PASS gradient check: {checked} parameters, worst rel err {worst:.2e}, {elapsed:.2}s"
    );
}

// ---------------------------------------------------------------- criterion 4

fn reference_map_single_threshold(
    dets: &[(String, Vec<Proposal>)],
    gts: &[(String, GroundTruthSet)],
    threshold: f64,
) -> f64 {
    let mut class_ids: Vec<usize> = gts
        .iter()
        .flat_map(|(_, g)| g.instances().iter().map(|(_, c)| *c))
        .collect();
    class_ids.sort_unstable();
    class_ids.dedup();

    let mut total = 0.0;
    for &class_id in &class_ids {
        let n_gt: usize = gts
            .iter()
            .map(|(_, g)| g.instances().iter().filter(|(_, c)| *c == class_id).count())
            .sum();
        let mut scored: Vec<(f64, bool)> = Vec::new();
        for (id, props) in dets {
            let g = &gts.iter().find(|(gid, _)| gid == id).unwrap().1;
            let mut order: Vec<usize> = (0..props.len())
                .filter(|&i| props[i].class_id == class_id)
                .collect();
            order.sort_by(|&a, &b| {
                props[b]
                    .score
                    .partial_cmp(&props[a].score)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut used = vec![false; g.len()];
            for &i in &order {
                let mut best_overlap = f64::NEG_INFINITY;
                let mut best_n = None;
                for (n, (interval, c)) in g.instances().iter().enumerate() {
                    if *c != class_id || used[n] {
                        continue;
                    }
                    let o = tiou(props[i].interval, *interval);
                    if o > best_overlap {
                        best_overlap = o;
                        best_n = Some(n);
                    }
                }
                let is_tp = matches!(best_n, Some(_) if best_overlap >= threshold);
                if let (Some(n), true) = (best_n, is_tp) {
                    used[n] = true;
                }
                scored.push((props[i].score, is_tp));
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        if n_gt > 0 {
            let mut tp = 0usize;
            let mut prev_recall = 0.0;
            let mut ap = 0.0;
            for (rank, &(_, flag)) in scored.iter().enumerate() {
                if flag {
                    tp += 1;
                }
                let precision = tp as f64 / (rank + 1) as f64;
                let recall = tp as f64 / n_gt as f64;
                ap += precision * (recall - prev_recall);
                prev_recall = recall;
            }
            total += ap;
        }
    }
    if class_ids.is_empty() {
        0.0
    } else {
        total / class_ids.len() as f64
    }
}

#[test]
fn c04_map_oracle() {
    // the three hand fixtures
    assert_eq!(average_precision(&[true], &[0.9], 1).unwrap(), 1.0);
    assert_eq!(average_precision(&[false, true], &[0.9, 0.8], 1).unwrap(), 0.5);
    assert_eq!(average_precision(&[true, false], &[0.9, 0.8], 1).unwrap(), 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..500 {
        let num_videos = rng.gen_range(1..=3);
        let mut dets = Vec::new();
        let mut gts = Vec::new();
        for v in 0..num_videos {
            let mut instances = Vec::new();
            for _ in 0..rng.gen_range(0..=5) {
                let s: f64 = rng.gen_range(0.0..80.0);
                let e = (s + rng.gen_range(0.5..15.0)).min(100.0);
                instances.push((iv(s, e), rng.gen_range(1..=3)));
            }
            let mut props = Vec::new();
            for _ in 0..rng.gen_range(0..=20) {
                let s: f64 = rng.gen_range(0.0..90.0);
                let e = (s + rng.gen_range(0.5..15.0)).min(100.0);
                props.push(Proposal {
                    interval: iv(s, e),
                    score: rng.gen_range(0.0..1.0),
                    class_id: rng.gen_range(1..=3),
                    source_frame: 0,
                });
            }
            gts.push((format!("v{v}"), GroundTruthSet::new(instances, 100.0).unwrap()));
            dets.push((format!("v{v}"), props));
        }
        for threshold in [0.1, 0.5, 0.75] {
            let ours = map_at_thresholds(&dets, &gts, &[threshold]).unwrap().map[0];
            let reference = reference_map_single_threshold(&dets, &gts, threshold);
            assert!(
                (ours - reference).abs() < 1e-9,
                "threshold {threshold}: {ours} vs {reference}"
            );
        }
    }
    println!("ACCEPTANCE C4 PASS mAP oracle: 500 random instances within 1e-9, fixtures 1.0/0.5/1.0");
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn c05_soft_nms_properties() {
    // decayed-duplicate fixture
    let fixture = soft_nms(
        vec![
            Proposal {
                interval: iv(0.0, 2.0),
                score: 0.9,
                class_id: 1,
                source_frame: 0,
            },
            Proposal {
                interval: iv(0.0, 2.0),
                score: 0.8,
                class_id: 1,
                source_frame: 1,
            },
        ],
        0.5,
        1e-3,
        true,
    )
    .unwrap();
    assert!((fixture[1].score - 0.1083).abs() < 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..200 {
        let proposals: Vec<Proposal> = (0..rng.gen_range(1..30))
            .map(|i| {
                let s = rng.gen_range(0.0..20.0);
                Proposal {
                    interval: iv(s, s + rng.gen_range(0.2..6.0)),
                    score: rng.gen_range(0.01..1.0),
                    class_id: rng.gen_range(1..=2),
                    source_frame: i,
                }
            })
            .collect();
        let best_before = proposals
            .iter()
            .map(|p| p.score)
            .fold(f64::NEG_INFINITY, f64::max);
        let scores_before: Vec<f64> = {
            let mut s = vec![0.0; proposals.len()];
            for p in &proposals {
                s[p.source_frame] = p.score;
            }
            s
        };
        let out = soft_nms(proposals, 0.5, 1e-3, true).unwrap();
        assert_eq!(out[0].score, best_before);
        for p in &out {
            assert!(p.score <= scores_before[p.source_frame] + 1e-15);
        }
    }
    println!("ACCEPTANCE C5 PASS soft-NMS: no score raised, top kept, decay fixture 0.1083±1e-4");
}

// ------------------------------------------------------- criteria 6-9 (runs)

struct VariantRun {
    label: &'static str,
    /// Best validation mAP@0.5 per seed.
    best_maps: Vec<f64>,
}

struct BenchmarkRuns {
    dataset: Dataset,
    /// The reference run for the pinned seed (criterion 6).
    reference: TrainOutput<f32>,
    reference_seconds: f64,
    salad: VariantRun,
    pruning_variants: Vec<VariantRun>,
    target_variants: Vec<VariantRun>,
}

static RUNS: OnceLock<BenchmarkRuns> = OnceLock::new();

const ACCEPTANCE_SEEDS: [u64; 3] = [1, 2, 3];

fn run_variant(
    dataset: &Dataset,
    assignment: SelfAssessVariant,
    pruning: PruningVariant,
    seed: u64,
) -> TrainOutput<f32> {
    let mut model_cfg = benchmark_model_config();
    model_cfg.seed = seed;
    let cfg = TrainConfig {
        assignment,
        pruning,
        seed,
        ..benchmark_train_config()
    };
    train::<f32>(dataset, &model_cfg, &cfg, None, None).expect("benchmark training run")
}

fn benchmark_runs() -> &'static BenchmarkRuns {
    RUNS.get_or_init(|| {
        let dataset = generate_synthetic(&benchmark_synth_config()).expect("benchmark dataset");

        let reference_started = Instant::now();
        let reference = run_variant(
            &dataset,
            SelfAssessVariant::Salad,
            PruningVariant::Salad,
            BENCHMARK_SEED,
        );
        let reference_seconds = reference_started.elapsed().as_secs_f64();

        let collect = |assignment: SelfAssessVariant, pruning: PruningVariant| -> Vec<f64> {
            ACCEPTANCE_SEEDS
                .iter()
                .map(|&seed| {
                    if seed == BENCHMARK_SEED
                        && assignment == SelfAssessVariant::Salad
                        && pruning == PruningVariant::Salad
                    {
                        reference.best_report.primary_map()
                    } else {
                        run_variant(&dataset, assignment, pruning, seed)
                            .best_report
                            .primary_map()
                    }
                })
                .collect()
        };

        let salad = VariantRun {
            label: "SALAD",
            best_maps: collect(SelfAssessVariant::Salad, PruningVariant::Salad),
        };
        let pruning_variants = vec![
            VariantRun {
                label: "No Pruning",
                best_maps: collect(SelfAssessVariant::Salad, PruningVariant::NoPruning),
            },
            VariantRun {
                label: "Random",
                best_maps: collect(SelfAssessVariant::Salad, PruningVariant::Random),
            },
            VariantRun {
                label: "Top 1 IoU",
                best_maps: collect(SelfAssessVariant::Salad, PruningVariant::Top1Iou),
            },
        ];
        let target_variants = vec![
            VariantRun {
                label: "Top confidence",
                best_maps: collect(SelfAssessVariant::TopConfidence, PruningVariant::Salad),
            },
            VariantRun {
                label: "Confidence > 0.5",
                best_maps: collect(
                    SelfAssessVariant::ConfidenceThreshold,
                    PruningVariant::Salad,
                ),
            },
            VariantRun {
                label: "tIoU > mu",
                best_maps: collect(SelfAssessVariant::IouThreshold, PruningVariant::Salad),
            },
        ];

        BenchmarkRuns {
            dataset,
            reference,
            reference_seconds,
            salad,
            pruning_variants,
            target_variants,
        }
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn c06_end_to_end_learning() {
    let runs = benchmark_runs();
    let best = runs.reference.best_report.primary_map();
    let epochs = runs.reference.log.len();
    assert!(
        epochs <= 110,
        "reference run used {epochs} epochs (warmup included)"
    );
    assert!(
        best >= BENCHMARK_MAP_FLOOR,
        "reference validation mAP@0.5 {best:.4} below the {BENCHMARK_MAP_FLOOR} floor"
    );
    assert!(
        runs.reference_seconds < 900.0,
        "reference run took {:.0}s (budget 900s)",
        runs.reference_seconds
    );
    println!(
        "ACCEPTANCE C6 PASS end-to-end learning: mAP@0.5 {best:.4} (floor {BENCHMARK_MAP_FLOOR}), {} epochs, {:.0}s",
        epochs, runs.reference_seconds
    );
}

#[test]
fn c07_pruning_ordering() {
    let runs = benchmark_runs();
    let salad_mean = mean(&runs.salad.best_maps);
    for variant in &runs.pruning_variants {
        let variant_mean = mean(&variant.best_maps);
        assert!(
            salad_mean > variant_mean,
            "SALAD mean {salad_mean:.4} does not exceed {} mean {variant_mean:.4}",
            variant.label
        );
    }
    let summary: Vec<String> = runs
        .pruning_variants
        .iter()
        .map(|v| format!("{} {:.4}", v.label, mean(&v.best_maps)))
        .collect();
    println!(
        "ACCEPTANCE C7 PASS pruning ordering: SALAD {salad_mean:.4} > {}",
        summary.join(" / ")
    );
}

#[test]
fn c08_target_strategy_ordering() {
    let runs = benchmark_runs();
    let salad_mean = mean(&runs.salad.best_maps);
    for variant in &runs.target_variants {
        let variant_mean = mean(&variant.best_maps);
        assert!(
            salad_mean > variant_mean,
            "SALAD mean {salad_mean:.4} does not exceed {} mean {variant_mean:.4}",
            variant.label
        );
    }
    let summary: Vec<String> = runs
        .target_variants
        .iter()
        .map(|v| format!("{} {:.4}", v.label, mean(&v.best_maps)))
        .collect();
    println!(
        "ACCEPTANCE C8 PASS target-strategy ordering: SALAD {salad_mean:.4} > {}",
        summary.join(" / ")
    );
}

#[test]
fn c09_confidence_fusion_check() {
    let runs = benchmark_runs();
    let (_, val_idx) = runs.dataset.split_indices();
    let strategies = [
        ("Arithmetic mean", FusionStrategy::ArithmeticMean),
        ("Geometric mean", FusionStrategy::GeometricMean),
        ("Normalized product", FusionStrategy::NormalizedProduct),
        ("SALAD", FusionStrategy::RegressionOnly),
    ];
    let mut table = Vec::new();
    for (label, fusion) in strategies {
        let settings = InferenceSettings {
            fusion,
            ..InferenceSettings::default()
        };
        let report = evaluate_dataset(
            &runs.reference.best_params,
            &runs.dataset,
            Some(&val_idx),
            &settings,
            &[0.5],
        )
        .expect("fusion evaluation");
        table.push((label, report.map[0]));
    }
    println!("ACCEPTANCE C9 fusion comparison (mAP@0.5 on the reference checkpoint):");
    for (label, value) in &table {
        println!("    {label:<20} {value:.4}");
    }
    let regression_only = table.last().unwrap().1;
    for (label, value) in &table[..3] {
        assert!(
            regression_only >= value - 0.02,
            "regression-only {regression_only:.4} more than 0.02 below {label} {value:.4}"
        );
    }
    println!("ACCEPTANCE C9 PASS regression-only within 0.02 of every fusion variant");
}

// --------------------------------------------------------------- criterion 10

#[test]
fn c10_determinism_and_round_trips() {
    use salad_core::checkpoint::{load_checkpoint, save_checkpoint};
    use salad_core::datagen::SynthConfig;

    let dir = tempfile::tempdir().unwrap();

    // datasets: identical seeds -> byte-identical files; round trip lossless
    let synth = SynthConfig {
        num_videos: 8,
        min_frames: 20,
        max_frames: 24,
        feature_dim: 5,
        num_classes: 2,
        min_instances: 1,
        max_instances: 2,
        min_duration: 4,
        max_duration: 7,
        snr: 3.0,
        frame_rate: 2.0,
        seed: 77,
    };
    let d1 = generate_synthetic(&synth).unwrap();
    let d2 = generate_synthetic(&synth).unwrap();
    let p1 = dir.path().join("d1.json");
    let p2 = dir.path().join("d2.json");
    d1.save(&p1).unwrap();
    d2.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(Dataset::load(&p1).unwrap(), d1);

    // training: identical seeds -> identical logs and byte-identical
    // checkpoints
    let model_cfg = ModelConfig::new(5, 8, 2, 9);
    let cfg = TrainConfig {
        epochs: 2,
        pretrain_epochs: 1,
        batch_size: 4,
        learning_rate: 1e-3,
        eval_thresholds: vec![0.5],
        seed: 13,
        ..TrainConfig::default()
    };
    let r1 = train::<f32>(&d1, &model_cfg, &cfg, None, None).unwrap();
    let r2 = train::<f32>(&d1, &model_cfg, &cfg, None, None).unwrap();
    assert_eq!(render_metric_log(&r1.log), render_metric_log(&r2.log));
    let c1 = dir.path().join("c1.ckpt");
    let c2 = dir.path().join("c2.ckpt");
    save_checkpoint(&c1, &r1.params, &r1.state, Some(&r1.frozen_masks)).unwrap();
    save_checkpoint(&c2, &r2.params, &r2.state, Some(&r2.frozen_masks)).unwrap();
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());

    // checkpoint round trip restores parameters and optimizer state exactly
    let loaded = load_checkpoint(&c1).unwrap();
    let params: ModelParams<f32> = loaded.into_model(&model_cfg).unwrap();
    for (a, b) in params.entries().iter().zip(r1.params.entries()) {
        assert_eq!(a.value, b.value);
    }
    let state = loaded.into_adam_state(&params).unwrap();
    assert_eq!(state.step, r1.state.step);
    for (a, b) in state.m.iter().zip(&r1.state.m) {
        assert_eq!(a, b);
    }

    // restoring and taking one identical step matches continuing directly
    let continue_direct = {
        let mut cfg = cfg.clone();
        cfg.epochs = 1;
        cfg.pretrain_epochs = 0;
        cfg.seed = 13;
        train::<f32>(
            &d1,
            &model_cfg,
            &cfg,
            None,
            Some(salad_core::trainer::ResumeState {
                params: r1.params.clone(),
                state: r1.state.clone(),
            }),
        )
        .unwrap()
    };
    let continue_restored = {
        let mut cfg = cfg.clone();
        cfg.epochs = 1;
        cfg.pretrain_epochs = 0;
        cfg.seed = 13;
        train::<f32>(
            &d1,
            &model_cfg,
            &cfg,
            None,
            Some(salad_core::trainer::ResumeState {
                params: params.clone(),
                state: state.clone(),
            }),
        )
        .unwrap()
    };
    assert_eq!(
        render_metric_log(&continue_direct.log),
        render_metric_log(&continue_restored.log)
    );

    // anchored offsets round-trip sanity for stored segments
    let off = OffsetPair::new(0.25, 0.5).unwrap();
    let seg = segment_from_offsets(10.0, off, 20.0).unwrap();
    assert_eq!((seg.start(), seg.end()), (5.0, 20.0));

    println!("ACCEPTANCE C10 PASS determinism: datasets, logs and checkpoints byte-identical; round trips lossless");
}
