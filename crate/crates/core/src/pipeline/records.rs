//! On-disk record formats for stage-one detections, character boxes and
//! stage-two output.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detection::PrototypeClass;
use crate::error::{Error, Result};
use crate::eval::ImageRecord;
use crate::geometry::BBox;
use crate::swap::MarkerValidation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub class: PrototypeClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    /// Mask image path, relative to the detection file unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub image: String,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharFile {
    pub image: String,
    pub chars: Vec<BBox>,
}

/// Parse one object, a JSON array of objects, or JSON Lines.
pub fn parse_many<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()));
    }
    if let Ok(one) = serde_json::from_str::<T>(text) {
        return Ok(vec![one]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn read_many<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_many(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Resolve a path found inside `file` relative to that file's directory.
pub fn resolve_beside(file: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        file.parent().unwrap_or(Path::new("")).join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    MaskAdjusted,
    CharAdjusted,
    Alg1Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapSplit {
    /// Swap column relative to the kept box.
    pub swap_x: u32,
    pub swap_column: u32,
    pub left_span: BBox,
    pub right_span: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptDetection {
    /// Index in the input detection list.
    pub index: usize,
    pub class: PrototypeClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    pub source_box: BBox,
    pub provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap: Option<SwapSplit>,
    /// Corrected crop, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BelowMinScore,
    MissingMask,
    InvalidMarker,
    NoCharacters,
    /// No character center falls inside the window around the prototype.
    EmptyWindow,
    FlatWindow,
    NoOverlap,
    OverlapLostAfterPruning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDetection {
    pub index: usize,
    pub class: PrototypeClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    pub reason: RejectReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<MarkerValidation>,
}

/// Stage-two result for one image. Every input detection appears exactly
/// once, kept or rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoOutput {
    pub image: String,
    pub input_count: usize,
    /// Set when boxes were mapped onto a resized image: `[sx, sy]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<[f64; 2]>,
    pub kept: Vec<KeptDetection>,
    pub rejected: Vec<RejectedDetection>,
}

impl StageTwoOutput {
    /// Conservation check: each input index occurs exactly once.
    pub fn check_conservation(&self) -> Result<()> {
        let mut seen = vec![0u32; self.input_count];
        let indices = self
            .kept
            .iter()
            .map(|k| k.index)
            .chain(self.rejected.iter().map(|r| r.index));
        for i in indices {
            match seen.get_mut(i) {
                Some(n) => *n += 1,
                None => {
                    return Err(Error::Invariant(format!(
                        "{}: detection index {i} out of range",
                        self.image
                    )))
                }
            }
        }
        if self.kept.len() + self.rejected.len() != self.input_count || seen.iter().any(|&n| n != 1) {
            return Err(Error::Invariant(format!(
                "{}: {} kept + {} rejected != {} input detections",
                self.image,
                self.kept.len(),
                self.rejected.len(),
                self.input_count
            )));
        }
        Ok(())
    }

    /// Kept detections in the evaluation file format.
    pub fn to_eval_record(&self) -> ImageRecord {
        ImageRecord {
            image: self.image.clone(),
            boxes: self.kept.iter().map(|k| k.bbox).collect(),
            classes: self.kept.iter().map(|k| k.class).collect(),
            scores: Some(self.kept.iter().map(|k| k.score).collect()),
        }
    }
}

impl DetectionFile {
    /// All input detections in the evaluation file format.
    pub fn to_eval_record(&self) -> ImageRecord {
        ImageRecord {
            image: self.image.clone(),
            boxes: self.detections.iter().map(|d| d.bbox).collect(),
            classes: self.detections.iter().map(|d| d.class).collect(),
            scores: Some(self.detections.iter().map(|d| d.score).collect()),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
