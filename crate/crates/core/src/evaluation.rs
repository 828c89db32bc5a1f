//! Detection metrics: greedy tIoU matching, uninterpolated average
//! precision, and mAP over threshold sets.

use std::collections::BTreeMap;

use crate::assignment::GroundTruthSet;
use crate::error::{Error, Result};
use crate::inference::Proposal;
use crate::interval::tiou;

/// tIoU thresholds used for reporting: the five-point set and the sparse
/// three-point set.
pub const THRESHOLDS_DENSE: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const THRESHOLDS_SPARSE: [f64; 3] = [0.5, 0.75, 0.95];

/// Greedy matching of one video's detections against its ground truth.
///
/// Detections are processed by descending score; each one matches the
/// unmatched same-class instance with the highest overlap, and counts as a
/// true positive when that overlap reaches `threshold`. Each instance is
/// matched at most once; later detections on it are false positives. The
/// returned flags align with the input order.
pub fn match_detections(
    dets: &[Proposal],
    gts: &GroundTruthSet,
    threshold: f64,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut taken = vec![false; gts.len()];
    let mut flags = vec![false; dets.len()];
    for &d in &order {
        let mut best: Option<(f64, usize)> = None;
        for (n, (interval, class_id)) in gts.instances().iter().enumerate() {
            if taken[n] || *class_id != dets[d].class_id {
                continue;
            }
            let overlap = tiou(dets[d].interval, *interval);
            if best.map_or(true, |(b, _)| overlap > b) {
                best = Some((overlap, n));
            }
        }
        if let Some((overlap, n)) = best {
            if overlap >= threshold {
                taken[n] = true;
                flags[d] = true;
            }
        }
    }
    flags
}

/// All-point (uninterpolated) average precision.
///
/// `flags` and `scores` describe one class's pooled detections; the pair is
/// ranked by descending score internally, so any strictly increasing score
/// rescaling leaves the result unchanged. Zero when the class has no
/// ground-truth instances.
pub fn average_precision(flags: &[bool], scores: &[f64], n_gt: usize) -> Result<f64> {
    if flags.len() != scores.len() {
        return Err(Error::MismatchedLengths {
            what: "flags vs scores",
            expected: flags.len(),
            got: scores.len(),
        });
    }
    if n_gt == 0 {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..flags.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if flags[i] {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / n_gt as f64)
}

/// Per-class results at every threshold.
#[derive(Debug, Clone)]
pub struct ClassReport {
    pub class_id: usize,
    pub n_gt: usize,
    /// One entry per threshold: (AP, true positives, false positives).
    pub per_threshold: Vec<(f64, usize, usize)>,
}

/// The full metric report: per-class APs and the class-mean mAP at each
/// threshold. Classes without ground truth are listed but excluded from the
/// mean.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub classes: Vec<ClassReport>,
    pub map: Vec<f64>,
}

impl EvalReport {
    /// mAP at a specific threshold, if it was evaluated.
    pub fn map_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - threshold).abs() < 1e-12)
            .map(|i| self.map[i])
    }

    /// mAP at 0.5 when present, otherwise the mean over thresholds. Used as
    /// the model-selection scalar.
    pub fn primary_map(&self) -> f64 {
        self.map_at(0.5).unwrap_or_else(|| {
            if self.map.is_empty() {
                0.0
            } else {
                self.map.iter().sum::<f64>() / self.map.len() as f64
            }
        })
    }

    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("class      n_gt");
        for t in &self.thresholds {
            out.push_str(&format!("  AP@{t:<4}"));
        }
        out.push('\n');
        for c in &self.classes {
            out.push_str(&format!("{:<10} {:>4}", c.class_id, c.n_gt));
            for (ap, _, _) in &c.per_threshold {
                out.push_str(&format!("  {ap:>6.4}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<10} {:>4}", "mAP", ""));
        for m in &self.map {
            out.push_str(&format!("  {m:>6.4}"));
        }
        out.push('\n');
        out
    }

    /// Machine-readable rows: `class_id,n_gt,threshold,ap,tp,fp` plus a
    /// trailing `map` row per threshold.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("class_id,n_gt,threshold,ap,tp,fp\n");
        for c in &self.classes {
            for (i, t) in self.thresholds.iter().enumerate() {
                let (ap, tp, fp) = c.per_threshold[i];
                out.push_str(&format!("{},{},{},{},{},{}\n", c.class_id, c.n_gt, t, ap, tp, fp));
            }
        }
        for (i, t) in self.thresholds.iter().enumerate() {
            out.push_str(&format!("map,,{},{},,\n", t, self.map[i]));
        }
        out
    }
}

/// Pools detections across videos per class and reports AP/mAP at each
/// threshold. Matching happens within each video; every detection video id
/// must exist in the ground truth map.
pub fn map_at_thresholds(
    dets: &[(String, Vec<Proposal>)],
    gts: &[(String, GroundTruthSet)],
    thresholds: &[f64],
) -> Result<EvalReport> {
    let gt_by_id: BTreeMap<&str, &GroundTruthSet> =
        gts.iter().map(|(id, g)| (id.as_str(), g)).collect();
    for (id, _) in dets {
        if !gt_by_id.contains_key(id.as_str()) {
            return Err(Error::VideoIdMismatch(id.clone()));
        }
    }

    // class universe: everything annotated or predicted
    let mut n_gt: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, g) in gts {
        for (_, class_id) in g.instances() {
            *n_gt.entry(*class_id).or_default() += 1;
        }
    }
    for (_, props) in dets {
        for p in props {
            n_gt.entry(p.class_id).or_default();
        }
    }

    let mut classes: Vec<ClassReport> = n_gt
        .iter()
        .map(|(&class_id, &count)| ClassReport {
            class_id,
            n_gt: count,
            per_threshold: Vec::with_capacity(thresholds.len()),
        })
        .collect();
    let mut map = Vec::with_capacity(thresholds.len());

    for &threshold in thresholds {
        // pooled (score, flag) pairs per class, deterministically ordered
        let mut pooled: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
        for (id, props) in dets {
            let flags = match_detections(props, gt_by_id[id.as_str()], threshold);
            for (p, &flag) in props.iter().zip(&flags) {
                pooled.entry(p.class_id).or_default().push((p.score, flag));
            }
        }
        let mut mean = 0.0;
        let mut eligible = 0usize;
        for report in classes.iter_mut() {
            let entries = pooled.remove(&report.class_id).unwrap_or_default();
            let scores: Vec<f64> = entries.iter().map(|(s, _)| *s).collect();
            let flags: Vec<bool> = entries.iter().map(|(_, f)| *f).collect();
            let ap = average_precision(&flags, &scores, report.n_gt)?;
            let tp = flags.iter().filter(|&&f| f).count();
            let fp = flags.len() - tp;
            report.per_threshold.push((ap, tp, fp));
            if report.n_gt > 0 {
                mean += ap;
                eligible += 1;
            }
        }
        map.push(if eligible > 0 { mean / eligible as f64 } else { 0.0 });
    }

    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        classes,
        map,
    })
}
