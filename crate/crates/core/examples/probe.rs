// Scratch driver for benchmark tuning runs. Not part of the deliverable API.

use salad_core::assignment::{PruningVariant, SelfAssessVariant};
use salad_core::benchmark::*;
use salad_core::datagen::generate_synthetic;
use salad_core::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let variant = args.get(4).map(|s| s.as_str()).unwrap_or("salad");

    let (assignment, pruning) = match variant {
        "salad" => (SelfAssessVariant::Salad, PruningVariant::Salad),
        "no_pruning" => (SelfAssessVariant::Salad, PruningVariant::NoPruning),
        "random" => (SelfAssessVariant::Salad, PruningVariant::Random),
        "top1iou" => (SelfAssessVariant::Salad, PruningVariant::Top1Iou),
        "top_confidence" => (SelfAssessVariant::TopConfidence, PruningVariant::Salad),
        "confidence_threshold" => (
            SelfAssessVariant::ConfidenceThreshold,
            PruningVariant::Salad,
        ),
        "iou_threshold" => (SelfAssessVariant::IouThreshold, PruningVariant::Salad),
        other => panic!("unknown variant {other}"),
    };

    let mut synth = benchmark_synth_config();
    if let Some(spec) = args.get(5) {
        // geometry override: min_dur,max_dur,min_inst,max_inst
        let parts: Vec<usize> = spec.split(',').map(|s| s.parse().unwrap()).collect();
        synth.min_duration = parts[0];
        synth.max_duration = parts[1];
        synth.min_instances = parts[2];
        synth.max_instances = parts[3];
    }
    let dataset = generate_synthetic(&synth).unwrap();

    let mut model_cfg = benchmark_model_config();
    model_cfg.seed = seed;
    let cfg = TrainConfig {
        epochs,
        learning_rate: lr,
        seed,
        assignment,
        pruning,
        eval_every: 2,
        ..benchmark_train_config()
    };

    let t0 = std::time::Instant::now();
    let out = train::<f32>(&dataset, &model_cfg, &cfg, None, None).unwrap();
    for r in out.log.iter().filter(|r| r.val_map.is_some()) {
        eprintln!(
            "{variant} seed {seed} epoch {:3} [{}] loss {:9.3} targets {:4} pruned {:.3} map@0.5 {:.4}",
            r.epoch,
            r.phase,
            r.loss_total,
            r.target_count,
            r.pruned_fraction,
            r.val_map.as_ref().map(|m| m.last().copied().unwrap_or(0.0)).unwrap()
        );
    }
    eprintln!(
        "RESULT {variant} seed {seed}: best epoch {} map@0.5 {:.4} elapsed {:.1}s",
        out.best_epoch,
        out.best_report.primary_map(),
        t0.elapsed().as_secs_f64()
    );
}
