//! Seeded synthetic feature sequences with embedded action instances.
//!
//! Background frames are isotropic Gaussian noise; frames inside an
//! instance additionally carry a class-specific direction scaled by the
//! signal-to-noise ratio and a trapezoidal envelope that ramps over ten
//! percent of the instance at each end. Class directions are rows of a
//! seeded random orthonormal basis, so separability is controlled purely by
//! the SNR. Generation is a pure function of the config.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Annotation, Dataset, VideoSample, DATASET_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_videos: usize,
    /// Frames per video, inclusive range.
    pub min_frames: usize,
    pub max_frames: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Instances per video, inclusive range.
    pub min_instances: usize,
    pub max_instances: usize,
    /// Instance duration in frames, inclusive range.
    pub min_duration: usize,
    pub max_duration: usize,
    /// Scale of the class signal relative to unit noise.
    pub snr: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub seed: u64,
}

fn default_frame_rate() -> f64 {
    1.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos == 0 {
            return Err(Error::InvalidConfig("num_videos must be at least 1".into()));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::InvalidConfig("empty frame-count range".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be at least 1".into()));
        }
        if self.num_classes == 0 || self.num_classes > self.feature_dim {
            return Err(Error::InvalidConfig(
                "num_classes must lie in 1..=feature_dim (orthonormal class directions)".into(),
            ));
        }
        if self.min_instances > self.max_instances {
            return Err(Error::InvalidConfig("empty instance-count range".into()));
        }
        if self.min_duration == 0 || self.min_duration > self.max_duration {
            return Err(Error::InvalidConfig("empty duration range".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::InvalidConfig("snr must be positive".into()));
        }
        if !(self.frame_rate > 0.0) {
            return Err(Error::InvalidConfig("frame_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Orthonormal class directions: Gram-Schmidt over seeded Gaussian rows.
fn class_directions(rng: &mut ChaCha8Rng, num_classes: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    while basis.len() < num_classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue; // degenerate draw, resample
        }
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push(v);
    }
    basis
}

/// Trapezoidal envelope over an instance of `len` frames: linear ramp over
/// `ceil(len / 10)` frames at each end, never zero at the edges.
fn envelope(frame: usize, len: usize) -> f64 {
    let ramp = (len as f64 / 10.0).ceil().max(1.0);
    let up = (frame as f64 + 1.0) / ramp;
    let down = (len - frame) as f64 / ramp;
    up.min(down).min(1.0)
}

const PACKING_ATTEMPTS: usize = 200;

/// Instance slots for one video: disjoint `[start, start + len)` frame
/// ranges separated by at least one frame. Lengths are drawn first
/// (re-drawn while they cannot fit), then the leftover space is split into
/// random gaps, so any feasible request packs.
fn pack_instances(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    num_frames: usize,
    count: usize,
    video_index: usize,
) -> Result<Vec<(usize, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let separators = count - 1;
    if count * cfg.min_duration + separators > num_frames {
        return Err(Error::InfeasiblePacking { video_index });
    }

    let mut lengths: Vec<usize> = Vec::new();
    let mut fits = false;
    for _ in 0..PACKING_ATTEMPTS {
        lengths = (0..count)
            .map(|_| rng.gen_range(cfg.min_duration..=cfg.max_duration.min(num_frames)))
            .collect();
        if lengths.iter().sum::<usize>() + separators <= num_frames {
            fits = true;
            break;
        }
    }
    if !fits {
        return Err(Error::InfeasiblePacking { video_index });
    }

    // spread the free space over count+1 gaps via sorted uniform cuts
    let free = num_frames - lengths.iter().sum::<usize>() - separators;
    let mut cuts: Vec<usize> = (0..count).map(|_| rng.gen_range(0..=free)).collect();
    cuts.sort_unstable();

    let mut placed = Vec::with_capacity(count);
    let mut cursor = 0usize;
    let mut previous_cut = 0usize;
    for (i, &len) in lengths.iter().enumerate() {
        let gap = cuts[i] - previous_cut + usize::from(i > 0);
        previous_cut = cuts[i];
        cursor += gap;
        placed.push((cursor, len));
        cursor += len;
    }
    Ok(placed)
}

/// Generates the full dataset for `cfg`. Identical configs produce
/// byte-identical datasets; the draw order is fixed (directions first, then
/// per video: frame count, instance count, packing, classes, noise in
/// row-major order).
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let directions = class_directions(&mut rng, cfg.num_classes, cfg.feature_dim);

    let mut videos = Vec::with_capacity(cfg.num_videos);
    for video_index in 0..cfg.num_videos {
        let num_frames = rng.gen_range(cfg.min_frames..=cfg.max_frames);
        let count = rng.gen_range(cfg.min_instances..=cfg.max_instances);
        let slots = pack_instances(&mut rng, cfg, num_frames, count, video_index)?;
        let classes: Vec<usize> = slots
            .iter()
            .map(|_| rng.gen_range(1..=cfg.num_classes))
            .collect();

        let mut features =
            vec![vec![0.0f64; cfg.feature_dim]; num_frames];
        for row in features.iter_mut() {
            for value in row.iter_mut() {
                *value = rng.sample(StandardNormal);
            }
        }
        for (&(start, len), &class_id) in slots.iter().zip(&classes) {
            let direction = &directions[class_id - 1];
            for offset in 0..len {
                let gain = cfg.snr * envelope(offset, len);
                for (value, d) in features[start + offset].iter_mut().zip(direction) {
                    *value += gain * d;
                }
            }
        }

        let annotations = slots
            .iter()
            .zip(&classes)
            .map(|(&(start, len), &class_id)| Annotation {
                start: start as f64 / cfg.frame_rate,
                end: (start + len) as f64 / cfg.frame_rate,
                class_id,
            })
            .collect();

        videos.push(VideoSample {
            id: format!("video_{video_index:04}"),
            frame_rate: cfg.frame_rate,
            annotations,
            features,
        });
    }

    let dataset = Dataset {
        version: DATASET_VERSION,
        feature_dim: cfg.feature_dim,
        num_classes: cfg.num_classes,
        class_names: (1..=cfg.num_classes)
            .map(|c| format!("class_{c}"))
            .collect(),
        videos,
    };
    dataset.validate()?;
    Ok(dataset)
}
