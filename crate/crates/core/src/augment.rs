//! Training-data construction: scale expansion of swap markers, dynamic
//! location change of target boxes, positive/negative contrast composites,
//! and the per-pixel cross-entropy used to score mask predictions.

use image::{GrayImage, Luma};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};
use crate::mask::{mask_tight_bbox, BinaryMask, ProbabilityMap};
use crate::synth::{rng, BACKGROUND, INK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// An image with one target box and a pixel label mask of the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: GrayImage,
    pub target_box: BBox,
    pub label_mask: BinaryMask,
    pub polarity: Polarity,
}

impl LabeledSample {
    pub fn new(
        image: GrayImage,
        target_box: BBox,
        label_mask: BinaryMask,
        polarity: Polarity,
    ) -> Result<Self> {
        let dims = image.dimensions();
        if label_mask.dimensions() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: label_mask.dimensions(),
            });
        }
        if !target_box.fits_in(dims.0, dims.1) {
            return Err(Error::InvalidGeometry(format!(
                "target box {target_box:?} outside {}x{} image",
                dims.0, dims.1
            )));
        }
        if polarity == Polarity::Positive && label_mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            image,
            target_box,
            label_mask,
            polarity,
        })
    }

    pub fn crop(&self) -> (GrayImage, BinaryMask) {
        let b = self.target_box;
        let img = image::imageops::crop_imm(&self.image, b.x, b.y, b.w, b.h).to_image();
        let mask = self.label_mask.crop(&b).expect("target box fits the mask");
        (img, mask)
    }
}

/// Extreme points of a marker stroke at its left and right ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveEdgePoints {
    pub left_top: Point,
    pub left_bottom: Point,
    pub right_top: Point,
    pub right_bottom: Point,
}

impl CurveEdgePoints {
    /// Top and bottom foreground pixels of the leftmost and rightmost columns.
    pub fn from_mask(mask: &BinaryMask) -> Result<Self> {
        let tight = mask_tight_bbox(mask)?;
        let column = |x: u32| -> (u32, u32) {
            let rows: Vec<u32> = (0..mask.height()).filter(|&y| mask.get(x, y)).collect();
            (rows[0], *rows.last().expect("column has foreground"))
        };
        let (x0, x1) = (tight.x, tight.right() - 1);
        let (lt, lb) = column(x0);
        let (rt, rb) = column(x1);
        if x0 >= x1 || lt >= lb || rt >= rb {
            return Err(Error::InvalidGeometry(
                "stroke ends must be at least two pixels thick and the marker two columns wide".into(),
            ));
        }
        let p = |x: u32, y: u32| Point::new(f64::from(x), f64::from(y));
        Ok(Self {
            left_top: p(x0, lt),
            left_bottom: p(x0, lb),
            right_top: p(x1, rt),
            right_bottom: p(x1, rb),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Horizontal extension per side per step.
    pub tau: u32,
    /// Ordinate jitter half-interval.
    pub d: u32,
    pub steps: u32,
    pub seed: u64,
}

/// One scale-expansion output together with the edge points it ended on.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub step: u32,
    pub sample: LabeledSample,
    pub edges: CurveEdgePoints,
}

/// Integer edge end: column plus top and bottom rows.
#[derive(Debug, Clone, Copy)]
struct EdgeEnd {
    x: i64,
    top: i64,
    bottom: i64,
}

impl EdgeEnd {
    fn from_points(top: &Point, bottom: &Point) -> Self {
        Self {
            x: top.px.round() as i64,
            top: top.py.round() as i64,
            bottom: bottom.py.round() as i64,
        }
    }
}

fn jitter_pair(r: &mut impl Rng, end: EdgeEnd, d: i64, height: i64) -> (i64, i64) {
    for _ in 0..16 {
        let top = end.top + r.gen_range(-d..=d);
        let bottom = end.bottom + r.gen_range(-d..=d);
        if 0 <= top && top < bottom && bottom < height {
            return (top, bottom);
        }
    }
    (end.top, end.bottom)
}

/// Fill columns between `from` (exclusive) and `to` (inclusive) with a
/// stroke whose top and bottom interpolate linearly; each column overlaps
/// its inner neighbour so the stroke stays 4-connected.
fn fill_extension(sample: &mut LabeledSample, from: EdgeEnd, to: EdgeEnd, ink: u8) {
    let span = (to.x - from.x).abs();
    let dir = (to.x - from.x).signum();
    let (mut prev_lo, mut prev_hi) = (from.top.min(from.bottom), from.top.max(from.bottom));
    for j in 1..=span {
        let t = j as f64 / span as f64;
        let top = from.top as f64 + t * (to.top - from.top) as f64;
        let bottom = from.bottom as f64 + t * (to.bottom - from.bottom) as f64;
        let mut lo = top.min(bottom).round() as i64;
        let mut hi = top.max(bottom).round() as i64;
        if hi < prev_lo {
            hi = prev_lo;
        }
        if lo > prev_hi {
            lo = prev_hi;
        }
        let x = (from.x + dir * j) as u32;
        for y in lo..=hi {
            sample.label_mask.set(x, y as u32, true);
            sample.image.put_pixel(x, y as u32, Luma([ink]));
        }
        (prev_lo, prev_hi) = (lo, hi);
    }
}

/// Extend both ends of a marker stroke outward by `tau` per step, jittering
/// the new edge ordinates by at most `d`. Emits one sample per step; after
/// step `k` the marker's tight width has grown by exactly `2 k tau`.
pub fn scale_expand(
    marker: &LabeledSample,
    edges: &CurveEdgePoints,
    cfg: &ExpansionConfig,
) -> Result<Vec<Expansion>> {
    if cfg.tau == 0 {
        return Err(Error::InvalidGeometry("tau must be at least 1".into()));
    }
    let (width, height) = marker.image.dimensions();
    let mut r = rng(cfg.seed);
    let d = i64::from(cfg.d);
    let tau = i64::from(cfg.tau);
    let mut left = EdgeEnd::from_points(&edges.left_top, &edges.left_bottom);
    let mut right = EdgeEnd::from_points(&edges.right_top, &edges.right_bottom);
    // reuse the stroke's own ink where it is visibly dark
    let ink = match marker.image.get_pixel(left.x as u32, left.top as u32)[0] {
        v if v < 128 => v,
        _ => INK,
    };
    let mut current = marker.clone();
    let mut out = Vec::with_capacity(cfg.steps as usize);
    for step in 1..=cfg.steps {
        if left.x - tau < 0 || right.x + tau >= i64::from(width) {
            return Err(Error::ExtensionOutOfBounds { step });
        }
        let (lt, lb) = jitter_pair(&mut r, left, d, i64::from(height));
        let (rt, rb) = jitter_pair(&mut r, right, d, i64::from(height));
        let new_left = EdgeEnd { x: left.x - tau, top: lt, bottom: lb };
        let new_right = EdgeEnd { x: right.x + tau, top: rt, bottom: rb };
        fill_extension(&mut current, left, new_left, ink);
        fill_extension(&mut current, right, new_right, ink);
        left = new_left;
        right = new_right;
        current.target_box = current.target_box.union(&mask_tight_bbox(&current.label_mask)?);
        let p = |x: i64, y: i64| Point::new(x as f64, y as f64);
        out.push(Expansion {
            step,
            sample: current.clone(),
            edges: CurveEdgePoints {
                left_top: p(left.x, left.top),
                left_bottom: p(left.x, left.bottom),
                right_top: p(right.x, right.top),
                right_bottom: p(right.x, right.bottom),
            },
        });
    }
    Ok(out)
}

/// One single-step expansion per extension amount in `start..=end` by `step`.
pub fn expansion_sweep(
    marker: &LabeledSample,
    edges: &CurveEdgePoints,
    (start, end, step): (u32, u32, u32),
    d: u32,
    seed: u64,
) -> Result<Vec<Expansion>> {
    (start..=end)
        .step_by(step.max(1) as usize)
        .enumerate()
        .map(|(i, tau)| {
            let cfg = ExpansionConfig {
                tau,
                d,
                steps: 1,
                seed: seed.wrapping_add(i as u64),
            };
            Ok(scale_expand(marker, edges, &cfg)?.remove(0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

/// Move the target box `l` pixels sideways. The box's columns travel
/// unchanged; the `l`-wide strip it moves over is placed on its other side.
pub fn dynamic_location_shift(
    sample: &LabeledSample,
    l: u32,
    direction: Direction,
) -> Result<LabeledSample> {
    let b = sample.target_box;
    let width = sample.image.width();
    if l == 0 {
        return Ok(sample.clone());
    }
    // column band [band_start, band_end) is rotated
    let (band_start, band_end, new_x) = match direction {
        Direction::Left => {
            let start = b.x.checked_sub(l).ok_or(Error::ShiftOutOfBounds)?;
            (start, b.right(), start)
        }
        Direction::Right => {
            if b.right() + l > width {
                return Err(Error::ShiftOutOfBounds);
            }
            (b.x, b.right() + l, b.x + l)
        }
    };
    // source column for each destination column inside the band
    let source = |x: u32| -> u32 {
        match direction {
            Direction::Left => {
                if x < band_start + b.w {
                    x + l
                } else {
                    x - b.w
                }
            }
            Direction::Right => {
                if x < band_start + l {
                    x + b.w
                } else {
                    x - l
                }
            }
        }
    };
    let map = |x: u32| if x >= band_start && x < band_end { source(x) } else { x };
    let (w, h) = sample.image.dimensions();
    let image = GrayImage::from_fn(w, h, |x, y| *sample.image.get_pixel(map(x), y));
    let label_mask = BinaryMask::from_fn(w, h, |x, y| sample.label_mask.get(map(x), y));
    Ok(LabeledSample {
        image,
        target_box: BBox { x: new_x, ..b },
        label_mask,
        polarity: sample.polarity,
    })
}

/// A positive crop and a negative crop side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastComposite {
    /// Positive sample whose target box is the positive crop's placement.
    pub sample: LabeledSample,
    pub negative_box: BBox,
    pub positive_index: usize,
    pub negative_index: usize,
}

/// `n` composites, each pairing a uniformly drawn positive crop with a
/// uniformly drawn negative crop in random order.
pub fn synth_contrast_set(
    positives: &[LabeledSample],
    negatives: &[LabeledSample],
    n: usize,
    seed: u64,
) -> Result<Vec<ContrastComposite>> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let pi = r.gen_range(0..positives.len());
            let ni = r.gen_range(0..negatives.len());
            let positive_first = r.gen_bool(0.5);
            let (pimg, pmask) = positives[pi].crop();
            let (nimg, _) = negatives[ni].crop();
            let width = pimg.width() + nimg.width();
            let height = pimg.height().max(nimg.height());
            let (px, nx) = if positive_first {
                (0, pimg.width())
            } else {
                (nimg.width(), 0)
            };
            let py = (height - pimg.height()) / 2;
            let ny = (height - nimg.height()) / 2;
            let mut image = GrayImage::from_pixel(width, height, Luma([BACKGROUND]));
            image::imageops::replace(&mut image, &pimg, i64::from(px), i64::from(py));
            image::imageops::replace(&mut image, &nimg, i64::from(nx), i64::from(ny));
            let mut label_mask = BinaryMask::new(width, height);
            label_mask.paste(&pmask, px, py);
            let target_box = BBox::new(px, py, pimg.width(), pimg.height());
            let sample = LabeledSample::new(image, target_box, label_mask, Polarity::Positive)?;
            Ok(ContrastComposite {
                sample,
                negative_box: BBox::new(nx, ny, nimg.width(), nimg.height()),
                positive_index: pi,
                negative_index: ni,
            })
        })
        .collect()
}

/// Probability clip applied before taking logarithms.
pub const CLIP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Binary cross-entropy summed (or averaged) over all pixels.
pub fn mask_cross_entropy(
    pred: &ProbabilityMap,
    label: &BinaryMask,
    reduction: Reduction,
) -> Result<f64> {
    if pred.dimensions() != label.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: label.dimensions(),
            actual: pred.dimensions(),
        });
    }
    let total: f64 = pred
        .values()
        .iter()
        .zip(label.bits())
        .map(|(&p, &l)| {
            let p = p.clamp(CLIP_EPS, 1.0 - CLIP_EPS);
            if l {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / pred.values().len() as f64,
    })
}
