//! Comparison suites: retrain (or re-score) the model under the pruning,
//! target-strategy and confidence-fusion variants and tabulate validation
//! mAP per variant across seeds.

use serde::{Deserialize, Serialize};

use crate::assignment::{PruningVariant, SelfAssessVariant};
use crate::data::Dataset;
use crate::error::Result;
use crate::graph::Real;
use crate::inference::FusionStrategy;
use crate::model::{ModelConfig, ModelParams};
use crate::trainer::{evaluate_dataset, train, InferenceSettings, TrainConfig, TrainOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationSuite {
    Pruning,
    SelfAssessment,
    Fusion,
}

impl AblationSuite {
    pub const NAMES: [&'static str; 3] = ["pruning", "self_assessment", "fusion"];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "pruning" => Some(Self::Pruning),
            "self_assessment" | "self-assessment" => Some(Self::SelfAssessment),
            "fusion" => Some(Self::Fusion),
            _ => None,
        }
    }
}

/// mAP values of one variant at one threshold, across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct SeedStats {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl SeedStats {
    fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        SeedStats { mean, std, values }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub per_threshold: Vec<SeedStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub suite: AblationSuite,
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22}", "mAP@tIoU"));
        for t in &self.thresholds {
            out.push_str(&format!("  {t:>13}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<22}", row.variant));
            for stats in &row.per_threshold {
                out.push_str(&format!("  {:>6.4}±{:<6.4}", stats.mean, stats.std));
            }
            out.push('\n');
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("variant,threshold,mean,std,values\n");
        for row in &self.rows {
            for (t, stats) in self.thresholds.iter().zip(&row.per_threshold) {
                let values = stats
                    .values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.variant, t, stats.mean, stats.std, values
                ));
            }
        }
        out
    }

    /// Mean mAP of a variant at the given threshold.
    pub fn mean_at(&self, variant: &str, threshold: f64) -> Option<f64> {
        let row = self.rows.iter().find(|r| r.variant == variant)?;
        let idx = self
            .thresholds
            .iter()
            .position(|t| (t - threshold).abs() < 1e-12)?;
        Some(row.per_threshold[idx].mean)
    }
}

fn stats_rows(
    thresholds: &[f64],
    labelled: Vec<(String, Vec<Vec<f64>>)>,
) -> Vec<AblationRow> {
    labelled
        .into_iter()
        .map(|(variant, per_seed)| {
            let per_threshold = (0..thresholds.len())
                .map(|ti| SeedStats::from_values(per_seed.iter().map(|maps| maps[ti]).collect()))
                .collect();
            AblationRow {
                variant,
                per_threshold,
            }
        })
        .collect()
}

/// Row labels, fixed per suite.
pub const PRUNING_ROWS: [&str; 5] = ["No Pruning", "Top 1 IoU", "Random", "Frozen", "SALAD"];
pub const SELF_ASSESSMENT_ROWS: [&str; 4] =
    ["Top confidence", "Confidence > 0.5", "tIoU > mu", "SALAD"];
pub const FUSION_ROWS: [&str; 4] = [
    "Arithmetic mean",
    "Geometric mean",
    "Normalized product",
    "SALAD",
];

fn run_one<F: Real>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    base: &TrainConfig,
    seed: u64,
    assignment: SelfAssessVariant,
    pruning: PruningVariant,
    frozen: Option<&crate::checkpoint::FrozenMasks>,
) -> Result<TrainOutput<F>> {
    let mut model_cfg = model_cfg.clone();
    model_cfg.seed = seed;
    let cfg = TrainConfig {
        assignment,
        pruning,
        seed,
        ..base.clone()
    };
    train::<F>(dataset, &model_cfg, &cfg, frozen, None)
}

/// Runs the requested suite. Each variant trains once per seed (the seed
/// drives both initialization and shuffling); rows report the best-epoch
/// validation mAP. The fusion suite trains only the reference model and
/// re-scores it per fusion rule; passing `pretrained` skips even that.
pub fn run_ablation<F: Real>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    base: &TrainConfig,
    suite: AblationSuite,
    seeds: &[u64],
    pretrained: Option<&ModelParams<F>>,
) -> Result<AblationTable> {
    let thresholds = base.eval_thresholds.clone();
    let (_, val_idx) = dataset.split_indices();

    let rows = match suite {
        AblationSuite::Pruning => {
            let mut per_variant: Vec<Vec<Vec<f64>>> = vec![Vec::new(); PRUNING_ROWS.len()];
            for &seed in seeds {
                let salad = run_one::<F>(
                    dataset,
                    model_cfg,
                    base,
                    seed,
                    SelfAssessVariant::Salad,
                    PruningVariant::Salad,
                    None,
                )?;
                for (slot, pruning) in [
                    (0, PruningVariant::NoPruning),
                    (1, PruningVariant::Top1Iou),
                    (2, PruningVariant::Random),
                ] {
                    let out = run_one::<F>(
                        dataset,
                        model_cfg,
                        base,
                        seed,
                        SelfAssessVariant::Salad,
                        pruning,
                        None,
                    )?;
                    per_variant[slot].push(out.best_report.map.clone());
                }
                let frozen = run_one::<F>(
                    dataset,
                    model_cfg,
                    base,
                    seed,
                    SelfAssessVariant::Salad,
                    PruningVariant::Frozen,
                    Some(&salad.frozen_masks),
                )?;
                per_variant[3].push(frozen.best_report.map.clone());
                per_variant[4].push(salad.best_report.map.clone());
            }
            stats_rows(
                &thresholds,
                PRUNING_ROWS
                    .iter()
                    .map(|s| s.to_string())
                    .zip(per_variant)
                    .collect(),
            )
        }
        AblationSuite::SelfAssessment => {
            let variants = [
                SelfAssessVariant::TopConfidence,
                SelfAssessVariant::ConfidenceThreshold,
                SelfAssessVariant::IouThreshold,
                SelfAssessVariant::Salad,
            ];
            let mut per_variant: Vec<Vec<Vec<f64>>> = vec![Vec::new(); variants.len()];
            for &seed in seeds {
                for (slot, &assignment) in variants.iter().enumerate() {
                    let out = run_one::<F>(
                        dataset,
                        model_cfg,
                        base,
                        seed,
                        assignment,
                        PruningVariant::Salad,
                        None,
                    )?;
                    per_variant[slot].push(out.best_report.map.clone());
                }
            }
            stats_rows(
                &thresholds,
                SELF_ASSESSMENT_ROWS
                    .iter()
                    .map(|s| s.to_string())
                    .zip(per_variant)
                    .collect(),
            )
        }
        AblationSuite::Fusion => {
            let strategies = [
                FusionStrategy::ArithmeticMean,
                FusionStrategy::GeometricMean,
                FusionStrategy::NormalizedProduct,
                FusionStrategy::RegressionOnly,
            ];
            let mut per_variant: Vec<Vec<Vec<f64>>> = vec![Vec::new(); strategies.len()];
            let mut score_model = |params: &ModelParams<F>| -> Result<()> {
                for (slot, &fusion) in strategies.iter().enumerate() {
                    let settings = InferenceSettings {
                        fusion,
                        ..base.inference.clone()
                    };
                    let report = evaluate_dataset(
                        params,
                        dataset,
                        Some(&val_idx),
                        &settings,
                        &thresholds,
                    )?;
                    per_variant[slot].push(report.map);
                }
                Ok(())
            };
            match pretrained {
                Some(params) => score_model(params)?,
                None => {
                    for &seed in seeds {
                        let out = run_one::<F>(
                            dataset,
                            model_cfg,
                            base,
                            seed,
                            SelfAssessVariant::Salad,
                            PruningVariant::Salad,
                            None,
                        )?;
                        score_model(&out.best_params)?;
                    }
                }
            }
            stats_rows(
                &thresholds,
                FUSION_ROWS
                    .iter()
                    .map(|s| s.to_string())
                    .zip(per_variant)
                    .collect(),
            )
        }
    };

    Ok(AblationTable {
        suite,
        thresholds,
        seeds: seeds.to_vec(),
        rows,
    })
}
