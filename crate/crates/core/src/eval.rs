//! Detection evaluation: score-descending greedy IoU matching and
//! precision/recall/F1 per class and pooled, at one or more IoU thresholds.
//!
//! Matching follows the usual detection protocol. It is not optimal when one
//! prediction reaches several ground truths; see the counterexample test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::PrototypeClass;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// (prediction index, ground-truth index, iou)
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Each prediction, in descending score order, claims the unclaimed ground
/// truth of highest IoU at or above `threshold`. Score ties keep input
/// order; IoU ties go to the lower ground-truth index.
pub fn match_detections(preds: &[(BBox, f64)], gts: &[BBox], threshold: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].1.total_cmp(&preds[a].1));
    let mut claimed = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for pi in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if claimed[gi] {
                continue;
            }
            let v = iou(&preds[pi].0, gt);
            if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            claimed[gi] = true;
            pairs.push((pi, gi, v));
        }
    }
    let tp = pairs.len() as u64;
    MatchResult {
        tp,
        fp: preds.len() as u64 - tp,
        fn_: gts.len() as u64 - tp,
        pairs,
    }
}

/// Confusion counts; summation is the aggregation across images and classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
        }
    }
}

impl From<&MatchResult> for Counts {
    fn from(m: &MatchResult) -> Self {
        Self::new(m.tp, m.fp, m.fn_)
    }
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of a match; each is 0 when its denominator is 0.
pub fn metrics(m: &MatchResult) -> Metrics {
    Counts::from(m).metrics()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl From<Counts> for ClassReport {
    fn from(counts: Counts) -> Self {
        Self {
            counts,
            metrics: counts.metrics(),
        }
    }
}

/// Report at one IoU threshold. Top-level figures pool the per-class counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub per_class: BTreeMap<PrototypeClass, ClassReport>,
}

impl EvalReport {
    pub fn from_class_counts(iou_threshold: f64, per_class: BTreeMap<PrototypeClass, Counts>) -> Self {
        let counts = per_class.values().fold(Counts::default(), |a, &c| a + c);
        let m = counts.metrics();
        Self {
            iou_threshold,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            counts,
            per_class: per_class.into_iter().map(|(k, c)| (k, c.into())).collect(),
        }
    }
}

/// One image's boxes in the evaluation file format. Ground-truth records
/// omit `scores`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: String,
    pub boxes: Vec<BBox>,
    pub classes: Vec<PrototypeClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl ImageRecord {
    fn check(&self) -> Result<()> {
        let n = self.boxes.len();
        let scores_ok = self.scores.as_ref().is_none_or(|s| s.len() == n);
        if self.classes.len() != n || !scores_ok {
            return Err(Error::Parse(format!(
                "image {}: boxes, classes and scores differ in length",
                self.image
            )));
        }
        Ok(())
    }

    fn scored(&self, class: PrototypeClass) -> Vec<(BBox, f64)> {
        (0..self.boxes.len())
            .filter(|&i| self.classes[i] == class)
            .map(|i| (self.boxes[i], self.scores.as_ref().map_or(1.0, |s| s[i])))
            .collect()
    }
}

/// Parse records from a JSON array or from JSON Lines.
pub fn parse_records(text: &str) -> Result<Vec<ImageRecord>> {
    let records: Vec<ImageRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<_>>()?
    };
    let mut seen = BTreeSet::new();
    for r in &records {
        r.check()?;
        if !seen.insert(r.image.as_str()) {
            return Err(Error::Parse(format!("duplicate image id {}", r.image)));
        }
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<ImageRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Image ids to leave out of evaluation, one per line; `#` starts a comment.
pub fn read_exclusions(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Match every ground-truth image against its predictions (none if absent)
/// per class, and aggregate. One report per threshold, in input order.
pub fn evaluate_records(
    preds: &[ImageRecord],
    gts: &[ImageRecord],
    thresholds: &[f64],
    exclusions: &BTreeSet<String>,
) -> Result<Vec<EvalReport>> {
    for &t in thresholds {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("IoU threshold {t} outside (0, 1]")));
        }
    }
    let gt_ids: BTreeSet<&str> = gts.iter().map(|g| g.image.as_str()).collect();
    if let Some(p) = preds.iter().find(|p| !gt_ids.contains(p.image.as_str())) {
        return Err(Error::IdMismatch(p.image.clone()));
    }
    let by_id: BTreeMap<&str, &ImageRecord> = preds.iter().map(|p| (p.image.as_str(), p)).collect();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let per_class = gts
                .par_iter()
                .filter(|g| !exclusions.contains(&g.image))
                .map(|g| {
                    let pred = by_id.get(g.image.as_str());
                    PrototypeClass::ALL
                        .iter()
                        .map(|&c| {
                            let p = pred.map(|p| p.scored(c)).unwrap_or_default();
                            let gt: Vec<BBox> = g.scored(c).into_iter().map(|(b, _)| b).collect();
                            (c, Counts::from(&match_detections(&p, &gt, t)))
                        })
                        .collect::<BTreeMap<_, _>>()
                })
                .reduce(BTreeMap::new, |mut a, b| {
                    for (c, n) in b {
                        *a.entry(c).or_default() += n;
                    }
                    a
                });
            // classes absent from both files stay out of the report
            let per_class = per_class.into_iter().filter(|(_, n)| *n != Counts::default()).collect();
            EvalReport::from_class_counts(t, per_class)
        })
        .collect())
}

pub fn evaluate_run(
    pred_file: &Path,
    gt_file: &Path,
    thresholds: &[f64],
    exclusions: Option<&Path>,
) -> Result<Vec<EvalReport>> {
    let preds = read_records(pred_file)?;
    let gts = read_records(gt_file)?;
    let excluded = exclusions.map(read_exclusions).transpose()?.unwrap_or_default();
    evaluate_records(&preds, &gts, thresholds, &excluded)
}

/// Percentages with one decimal, thresholds joined by `/`, one block of
/// Precision / Recall / F1-score rows for the pooled figures and each class.
pub fn render_table(reports: &[EvalReport]) -> String {
    let joined = |f: &dyn Fn(&EvalReport) -> String| reports.iter().map(f).collect::<Vec<_>>().join("/");
    let header = format!("IoU {}", joined(&|r| format!("{}", r.iou_threshold)));
    let mut rows: Vec<[String; 3]> = vec![["Class".into(), "Metric".into(), header]];
    let pct = |v: f64| format!("{:.1}", 100.0 * v);
    let mut block = |label: &str, get: &dyn Fn(&EvalReport) -> Option<Metrics>| {
        let value = |m: fn(&Metrics) -> f64| {
            joined(&|r| get(r).map_or("-".into(), |x| pct(m(&x))))
        };
        rows.push([label.into(), "Precision".into(), value(|m| m.precision)]);
        rows.push([String::new(), "Recall".into(), value(|m| m.recall)]);
        rows.push([String::new(), "F1-score".into(), value(|m| m.f1)]);
    };
    block("all", &|r| {
        Some(Metrics {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        })
    });
    let classes: BTreeSet<PrototypeClass> =
        reports.iter().flat_map(|r| r.per_class.keys().copied()).collect();
    for c in classes {
        block(c.as_str(), &|r| r.per_class.get(&c).map(|x| x.metrics));
    }
    let widths: Vec<usize> = (0..3).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line = format!("{:<w0$}  {:<w1$}  {}", r[0], r[1], r[2], w0 = widths[0], w1 = widths[1]);
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}
