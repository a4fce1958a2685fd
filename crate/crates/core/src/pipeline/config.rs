//! Run configuration: defaults, a flat `key = value` file format, and
//! range checks.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlap::{OverlapConfig, WindowAnchor};
use crate::swap::SwapConfig;

/// Which characters an overlap prototype is refined against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharScope {
    /// Every character of the image.
    #[default]
    Image,
    /// Characters whose center lies inside the prototype box.
    Proto,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Swap,
    Overlap,
    #[default]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Extension sweep: first, last and step of `tau`.
    pub tau_start: u32,
    pub tau_end: u32,
    pub tau_step: u32,
    /// Ordinate jitter half-interval.
    pub jitter_d: u32,
    /// Largest location shift drawn for each expanded sample.
    pub max_shift: u32,
    pub contrast_count: usize,
    /// Generated seed markers when no marker masks are given.
    pub markers: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            tau_start: 2,
            tau_end: 150,
            tau_step: 5,
            jitter_d: 1,
            max_shift: 20,
            contrast_count: 10,
            markers: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub fixtures: usize,
    pub kind: FixtureKind,
    pub fp_per_image: usize,
    /// Largest per-edge perturbation applied to true detections.
    pub box_jitter: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            fixtures: 10,
            kind: FixtureKind::Mixed,
            fp_per_image: 1,
            box_jitter: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub detections: Option<PathBuf>,
    pub chars: Option<PathBuf>,
    /// Directory holding the images named by the detection records.
    pub images: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    /// Image ids to leave out of evaluation.
    pub exclude: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub iou: Vec<f64>,
    pub min_score: f64,
    /// Probability at or above which a mask pixel is foreground.
    pub mask_threshold: f64,
    pub swap: SwapConfig,
    pub overlap: OverlapConfig,
    pub char_scope: CharScope,
    pub overlays: bool,
    pub crops: bool,
    /// Optional image normalisation before refinement.
    pub resize: Option<(u32, u32)>,
    pub augment: AugmentParams,
    pub synth: SynthParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detections: None,
            chars: None,
            images: None,
            gt: None,
            exclude: None,
            out: PathBuf::from("out"),
            seed: 0,
            workers: 0,
            iou: vec![0.5, 0.75],
            min_score: 0.0,
            mask_threshold: 0.5,
            swap: SwapConfig::default(),
            overlap: OverlapConfig::default(),
            char_scope: CharScope::Image,
            overlays: true,
            crops: true,
            resize: None,
            augment: AugmentParams::default(),
            synth: SynthParams::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

/// Comma-separated IoU thresholds.
pub fn parse_thresholds(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| parse::<f64>("iou", t.trim()))
        .collect()
}

fn parse_size(key: &str, value: &str) -> Result<(u32, u32)> {
    let (w, h) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("{key}: expected WxH, got {value:?}")))?;
    Ok((parse(key, w.trim())?, parse(key, h.trim())?))
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "detections" => self.detections = path(),
            "chars" => self.chars = path(),
            "images" => self.images = path(),
            "gt" => self.gt = path(),
            "exclude" => self.exclude = path(),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "iou" => self.iou = parse_thresholds(value)?,
            "min_score" => self.min_score = parse(key, value)?,
            "mask_threshold" => self.mask_threshold = parse(key, value)?,
            "smooth_window" => self.swap.smooth_window = parse(key, value)?,
            "min_height" => self.swap.min_height = Some(parse(key, value)?),
            "max_gap_frac" => self.swap.max_gap_frac = parse(key, value)?,
            "margin" => self.swap.margin = parse(key, value)?,
            "gamma" => self.overlap.gamma = Some(parse(key, value)?),
            "alpha" => self.overlap.alpha = Some(parse(key, value)?),
            "beta" => self.overlap.beta = Some(parse(key, value)?),
            "anchor" => {
                self.overlap.anchor = match value {
                    "left_edge" => WindowAnchor::LeftEdge,
                    "center" => WindowAnchor::Center,
                    _ => return Err(Error::Config(format!("anchor: expected left_edge or center, got {value:?}"))),
                }
            }
            "char_scope" => {
                self.char_scope = match value {
                    "image" => CharScope::Image,
                    "proto" => CharScope::Proto,
                    _ => return Err(Error::Config(format!("char_scope: expected image or proto, got {value:?}"))),
                }
            }
            "overlays" => self.overlays = parse_bool(key, value)?,
            "crops" => self.crops = parse_bool(key, value)?,
            "resize" => self.resize = Some(parse_size(key, value)?),
            "tau_start" => self.augment.tau_start = parse(key, value)?,
            "tau_end" => self.augment.tau_end = parse(key, value)?,
            "tau_step" => self.augment.tau_step = parse(key, value)?,
            "jitter_d" => self.augment.jitter_d = parse(key, value)?,
            "max_shift" => self.augment.max_shift = parse(key, value)?,
            "contrast_count" => self.augment.contrast_count = parse(key, value)?,
            "markers" => self.augment.markers = parse(key, value)?,
            "fixtures" => self.synth.fixtures = parse(key, value)?,
            "kind" => {
                self.synth.kind = match value {
                    "swap" => FixtureKind::Swap,
                    "overlap" => FixtureKind::Overlap,
                    "mixed" => FixtureKind::Mixed,
                    _ => return Err(Error::Config(format!("kind: expected swap, overlap or mixed, got {value:?}"))),
                }
            }
            "fp_per_image" => self.synth.fp_per_image = parse(key, value)?,
            "box_jitter" => self.synth.box_jitter = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a `key=value` pair given as one string.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// Apply every setting in a config file. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Reject out-of-range parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.iou.is_empty() || self.iou.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return bad(format!("iou thresholds must lie in (0, 1], got {:?}", self.iou));
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return bad(format!("min_score must lie in [0, 1], got {}", self.min_score));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold <= 1.0) {
            return bad(format!("mask_threshold must lie in (0, 1], got {}", self.mask_threshold));
        }
        if self.swap.smooth_window == 0 {
            return bad("smooth_window must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.swap.max_gap_frac) {
            return bad(format!("max_gap_frac must lie in [0, 1], got {}", self.swap.max_gap_frac));
        }
        if self.swap.min_height.is_some_and(|h| !(h >= 0.0)) {
            return bad("min_height must be non-negative".into());
        }
        for (name, v) in [
            ("gamma", self.overlap.gamma),
            ("alpha", self.overlap.alpha),
            ("beta", self.overlap.beta),
        ] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.resize.is_some_and(|(w, h)| w == 0 || h == 0) {
            return bad("resize dimensions must be positive".into());
        }
        let a = &self.augment;
        if a.tau_start == 0 || a.tau_step == 0 || a.tau_end < a.tau_start {
            return bad("need 1 <= tau_start <= tau_end and tau_step >= 1".into());
        }
        Ok(())
    }
}
