//! The pinned synthetic benchmark used by the acceptance suite and the
//! bundled example configs.
//!
//! 250 videos of 128 frames (200 train / 50 validation after the 80/20
//! split), 16-dimensional features, 3 classes at SNR 5, detector with
//! 64-wide directional memories. Seeds, durations and the training recipe
//! are fixed here so results are reproducible; see the repository README
//! for the measured reference numbers.

use crate::datagen::SynthConfig;
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

/// Validation mAP@0.5 floor the reference run must clear.
pub const BENCHMARK_MAP_FLOOR: f64 = 0.8;

/// Seed of the reference training run.
pub const BENCHMARK_SEED: u64 = 1;

pub fn benchmark_synth_config() -> SynthConfig {
    SynthConfig {
        num_videos: 250,
        min_frames: 128,
        max_frames: 128,
        feature_dim: 16,
        num_classes: 3,
        min_instances: 1,
        max_instances: 2,
        min_duration: 16,
        max_duration: 56,
        snr: 5.0,
        frame_rate: 1.0,
        seed: 20240817,
    }
}

pub fn benchmark_model_config() -> ModelConfig {
    ModelConfig::new(16, 64, 3, BENCHMARK_SEED)
}

pub fn benchmark_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        pretrain_epochs: 10,
        batch_size: 4,
        learning_rate: 1e-4,
        eval_every: 1,
        seed: BENCHMARK_SEED,
        ..Default::default()
    }
}
