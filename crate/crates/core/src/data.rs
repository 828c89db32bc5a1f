//! Dataset container, its on-disk format, and the proposal dump format.
//!
//! A dataset is a single JSON document: a header (version, feature width,
//! class names) plus per-video records with annotations and the raw feature
//! rows. Serialization is deterministic (fixed field order, shortest
//! round-trip float text), so identical generator configs produce
//! byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assignment::GroundTruthSet;
use crate::error::{Error, Result};
use crate::graph::Real;
use crate::inference::Proposal;
use crate::interval::Interval;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub start: f64,
    pub end: f64,
    pub class_id: usize,
}

/// One untrimmed video: features are `T` rows of `feature_dim` values;
/// `frame_rate` maps frame indices to seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSample {
    pub id: String,
    pub frame_rate: f64,
    pub annotations: Vec<Annotation>,
    pub features: Vec<Vec<f64>>,
}

impl VideoSample {
    pub fn num_frames(&self) -> usize {
        self.features.len()
    }

    /// Video extent in seconds.
    pub fn duration(&self) -> f64 {
        self.num_frames() as f64 / self.frame_rate
    }

    /// Anchor times, one per frame, at the frame centers.
    pub fn anchors(&self) -> Vec<f64> {
        (0..self.num_frames())
            .map(|i| (i as f64 + 0.5) / self.frame_rate)
            .collect()
    }

    pub fn ground_truth(&self) -> Result<GroundTruthSet> {
        let instances = self
            .annotations
            .iter()
            .map(|a| Ok((Interval::new(a.start, a.end)?, a.class_id)))
            .collect::<Result<Vec<_>>>()?;
        GroundTruthSet::new(instances, self.duration())
    }

    /// Feature matrix in the requested precision.
    pub fn features_array<F: Real>(&self) -> Array2<F> {
        let rows = self.num_frames();
        let cols = if rows == 0 { 0 } else { self.features[0].len() };
        Array2::from_shape_fn((rows, cols), |(t, d)| F::from_f64(self.features[t][d]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub version: u32,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub videos: Vec<VideoSample>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.version != DATASET_VERSION {
            return Err(Error::DatasetFormat(format!(
                "unsupported dataset version {} (expected {DATASET_VERSION})",
                self.version
            )));
        }
        if self.class_names.len() != self.num_classes {
            return Err(Error::DatasetFormat(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for video in &self.videos {
            if video.id.is_empty() || video.id.contains(',') || video.id.contains('\n') {
                return Err(Error::DatasetFormat(format!(
                    "video id '{}' is empty or contains separators",
                    video.id
                )));
            }
            if !seen.insert(&video.id) {
                return Err(Error::DatasetFormat(format!(
                    "duplicate video id '{}'",
                    video.id
                )));
            }
            if !(video.frame_rate > 0.0) || !video.frame_rate.is_finite() {
                return Err(Error::DatasetFormat(format!(
                    "video '{}': frame rate must be positive",
                    video.id
                )));
            }
            if video.features.is_empty() {
                return Err(Error::DatasetFormat(format!(
                    "video '{}' has no frames",
                    video.id
                )));
            }
            for (t, row) in video.features.iter().enumerate() {
                if row.len() != self.feature_dim {
                    return Err(Error::DatasetFormat(format!(
                        "video '{}' frame {t}: {} feature values (expected {})",
                        video.id,
                        row.len(),
                        self.feature_dim
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DatasetFormat(format!(
                        "video '{}' frame {t}: non-finite feature value",
                        video.id
                    )));
                }
            }
            let duration = video.duration();
            for (i, a) in video.annotations.iter().enumerate() {
                if !a.start.is_finite() || !a.end.is_finite() || a.end <= a.start {
                    return Err(Error::DatasetFormat(format!(
                        "video '{}' annotation {i}: invalid segment [{}, {}]",
                        video.id, a.start, a.end
                    )));
                }
                if a.start < 0.0 || a.end > duration + 1e-9 {
                    return Err(Error::DatasetFormat(format!(
                        "video '{}' annotation {i}: segment [{}, {}] outside [0, {duration}]",
                        video.id, a.start, a.end
                    )));
                }
                if a.class_id == 0 || a.class_id > self.num_classes {
                    return Err(Error::DatasetFormat(format!(
                        "video '{}' annotation {i}: class id {} outside 1..={}",
                        video.id, a.class_id, self.num_classes
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_instances(&self) -> usize {
        self.videos.iter().map(|v| v.annotations.len()).sum()
    }

    /// Instance count per class id (1-based; index 0 unused).
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes + 1];
        for video in &self.videos {
            for a in &video.annotations {
                hist[a.class_id] += 1;
            }
        }
        hist
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        let dataset: Dataset = serde_json::from_str(&text)
            .map_err(|e| Error::DatasetFormat(format!("malformed dataset file: {e}")))?;
        dataset.validate()?;
        Ok(dataset)
    }

    /// Deterministic 80/20 split by video index: first 80% train, rest
    /// validation.
    pub fn split_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.videos.len();
        let train = n * 8 / 10;
        ((0..train).collect(), (train..n).collect())
    }
}

/// Writes proposals as line-delimited records under a fixed header. Floats
/// carry ten significant digits.
pub fn write_proposal_dump<W: Write>(
    mut writer: W,
    items: &[(String, Vec<Proposal>)],
) -> Result<()> {
    writeln!(writer, "video_id,start,end,score,class_id")?;
    for (video_id, proposals) in items {
        if video_id.contains(',') || video_id.contains('\n') {
            return Err(Error::ProposalFormat(format!(
                "video id '{video_id}' contains separators"
            )));
        }
        for p in proposals {
            writeln!(
                writer,
                "{},{:.9e},{:.9e},{:.9e},{}",
                video_id,
                p.interval.start(),
                p.interval.end(),
                p.score,
                p.class_id
            )?;
        }
    }
    Ok(())
}

/// Reads a proposal dump, grouping records by video in order of first
/// appearance. Loaded proposals carry no source frame (index 0).
pub fn read_proposal_dump<R: Read>(reader: R) -> Result<Vec<(String, Vec<Proposal>)>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::ProposalFormat("empty file (missing header)".into()))?;
    if header.trim() != "video_id,start,end,score,class_id" {
        return Err(Error::ProposalFormat(format!(
            "unexpected header '{header}'"
        )));
    }
    let mut grouped: Vec<(String, Vec<Proposal>)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::ProposalFormat(format!(
                "line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::ProposalFormat(format!("line {}: bad float '{s}'", lineno + 2)))
        };
        let start = parse(fields[1])?;
        let end = parse(fields[2])?;
        let score = parse(fields[3])?;
        let class_id: usize = fields[4].parse().map_err(|_| {
            Error::ProposalFormat(format!("line {}: bad class id '{}'", lineno + 2, fields[4]))
        })?;
        let proposal = Proposal {
            interval: Interval::new(start, end)?,
            score,
            class_id,
            source_frame: 0,
        };
        match grouped.iter_mut().find(|(id, _)| id == fields[0]) {
            Some((_, list)) => list.push(proposal),
            None => grouped.push((fields[0].to_string(), vec![proposal])),
        }
    }
    Ok(grouped)
}
