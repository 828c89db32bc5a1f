// Scratch diagnostic: trains one variant, then dissects validation misses.
// Not part of the deliverable API.

use salad_core::assignment::{PruningVariant, SelfAssessVariant};
use salad_core::benchmark::*;
use salad_core::datagen::generate_synthetic;
use salad_core::interval::tiou;
use salad_core::trainer::{infer_dataset, train, InferenceSettings, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let variant = args.get(2).map(|s| s.as_str()).unwrap_or("salad");
    let spec = args.get(3).map(|s| s.as_str()).unwrap_or("16,56,1,2");

    let (assignment, pruning) = match variant {
        "salad" => (SelfAssessVariant::Salad, PruningVariant::Salad),
        "no_pruning" => (SelfAssessVariant::Salad, PruningVariant::NoPruning),
        "top1iou" => (SelfAssessVariant::Salad, PruningVariant::Top1Iou),
        other => panic!("unknown variant {other}"),
    };

    let mut synth = benchmark_synth_config();
    let parts: Vec<usize> = spec.split(',').map(|s| s.parse().unwrap()).collect();
    synth.min_duration = parts[0];
    synth.max_duration = parts[1];
    synth.min_instances = parts[2];
    synth.max_instances = parts[3];
    let dataset = generate_synthetic(&synth).unwrap();

    let cfg = TrainConfig {
        epochs,
        learning_rate: 1e-3,
        seed: 1,
        assignment,
        pruning,
        eval_every: 2,
        ..benchmark_train_config()
    };
    let out = train::<f32>(&dataset, &benchmark_model_config(), &cfg, None, None).unwrap();
    eprintln!(
        "trained {variant}: best epoch {} map@0.5 {:.4}",
        out.best_epoch,
        out.best_report.primary_map()
    );

    let (_, val_idx) = dataset.split_indices();
    let dets = infer_dataset(
        &out.best_params,
        &dataset,
        Some(&val_idx),
        &InferenceSettings::default(),
    )
    .unwrap();

    let mut missed_by_box = 0;
    let mut missed_by_rank = 0;
    let mut no_proposal = 0;
    let mut hit = 0;
    let mut winner_tious = Vec::new();
    for (di, &vi) in val_idx.iter().enumerate() {
        let video = &dataset.videos[vi];
        let gts = video.ground_truth().unwrap();
        let props = &dets[di].1;
        for (instance, class_id) in gts.instances() {
            // top-scored proposal of the right class overlapping the instance
            let top = props
                .iter()
                .filter(|p| p.class_id == *class_id && tiou(p.interval, *instance) > 0.0)
                .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap());
            match top {
                None => no_proposal += 1,
                Some(p) => {
                    let t = tiou(p.interval, *instance);
                    winner_tious.push(t);
                    if t >= 0.5 {
                        hit += 1;
                    } else {
                        // does any same-class proposal clear 0.5?
                        let best = props
                            .iter()
                            .filter(|q| q.class_id == *class_id)
                            .map(|q| tiou(q.interval, *instance))
                            .fold(0.0f64, f64::max);
                        if best >= 0.5 {
                            missed_by_rank += 1;
                        } else {
                            missed_by_box += 1;
                        }
                    }
                }
            }
        }
    }
    winner_tious.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |f: f64| winner_tious[(f * (winner_tious.len() - 1) as f64) as usize];
    eprintln!(
        "val instances: hit {hit}, top-proposal box too loose {missed_by_box}, \
         better box exists but ranked lower {missed_by_rank}, no overlapping proposal {no_proposal}"
    );
    eprintln!(
        "winner tiou quantiles: p5 {:.3} p25 {:.3} p50 {:.3} p75 {:.3}",
        q(0.05),
        q(0.25),
        q(0.50),
        q(0.75)
    );
}
