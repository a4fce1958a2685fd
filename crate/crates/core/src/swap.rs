//! Second-stage processing of swap-marker (type I) detections.
//!
//! A marker mask is accepted when its column projection has a single peak
//! (the crossing stroke), its row projection has two peaks (the upper and
//! lower lobes), and neither projection breaks into pieces. Accepted
//! detections have their box snapped to the mask, grown over the characters
//! the marker arcs over, and split at the column of maximum ink.

use image::{ImageBuffer, Pixel};
use serde::{Deserialize, Serialize};

use crate::detection::{PrototypeClass, PrototypeDetection};
use crate::error::{Error, Result};
use crate::geometry::{geometric_center, horizontal_overlap, BBox};
use crate::mask::{
    argmax_plateau_mid, default_min_height, mask_tight_bbox, peak_plateaus, project, smooth, Axis,
    BinaryMask, ProjectionProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapConfig {
    /// Moving-average window for projection smoothing (odd).
    pub smooth_window: usize,
    /// Peak floor; `None` means 10% of each smoothed profile's maximum.
    pub min_height: Option<f64>,
    /// Longest allowed zero run inside a projection, as a fraction of its support.
    pub max_gap_frac: f64,
    /// Padding added around the mask's tight box.
    pub margin: u32,
}

impl Default for SwapConfig {
    fn default() -> Self {
        Self {
            smooth_window: 3,
            min_height: None,
            max_gap_frac: 0.15,
            margin: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerValidation {
    pub valid: bool,
    pub x_peaks: usize,
    pub y_peaks: usize,
    pub continuity_ok: bool,
    pub max_gap: usize,
}

impl MarkerValidation {
    fn empty() -> Self {
        Self {
            valid: false,
            x_peaks: 0,
            y_peaks: 0,
            continuity_ok: false,
            max_gap: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapResult {
    /// Box after snapping to the mask, before character growth.
    pub mask_box: BBox,
    pub adjusted_box: BBox,
    /// Swap column relative to `adjusted_box.x`.
    pub swap_x: u32,
    pub left_span: BBox,
    pub right_span: BBox,
}

impl SwapResult {
    /// Swap column in image coordinates.
    pub fn swap_column(&self) -> u32 {
        self.adjusted_box.x + self.swap_x
    }

    pub fn char_adjusted(&self) -> bool {
        self.adjusted_box != self.mask_box
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SwapOutcome {
    Rejected(MarkerValidation),
    Accepted(SwapResult),
}

fn peaks(profile: &ProjectionProfile, cfg: &SwapConfig) -> Vec<(usize, usize)> {
    let s = smooth(&profile.counts, cfg.smooth_window);
    let floor = cfg.min_height.unwrap_or_else(|| default_min_height(&s));
    peak_plateaus(&s, floor)
}

fn continuity(profile: &ProjectionProfile, max_gap_frac: f64) -> (bool, usize) {
    let gap = profile.max_internal_gap();
    let support = profile.support().map_or(0, |(a, b)| b - a + 1);
    (gap as f64 <= max_gap_frac * support as f64, gap)
}

/// Check the projection signature of a marker mask.
pub fn validate_marker(mask: &BinaryMask, cfg: &SwapConfig) -> Result<MarkerValidation> {
    if mask.width() < 2 || mask.height() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "marker mask {}x{} is smaller than 2x2",
            mask.width(),
            mask.height()
        )));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let px = project(mask, Axis::X);
    let py = project(mask, Axis::Y);
    let x_peaks = peaks(&px, cfg).len();
    let y_peaks = peaks(&py, cfg).len();
    let (cx, gx) = continuity(&px, cfg.max_gap_frac);
    let (cy, gy) = continuity(&py, cfg.max_gap_frac);
    let continuity_ok = cx && cy;
    Ok(MarkerValidation {
        valid: x_peaks == 1 && y_peaks == 2 && continuity_ok,
        x_peaks,
        y_peaks,
        continuity_ok,
        max_gap: gx.max(gy),
    })
}

/// Snap a type I box to the tight box of its mask, padded by `margin` and
/// clamped to `bounds` when given.
pub fn adjust_box_to_mask(
    det: &PrototypeDetection,
    margin: u32,
    bounds: Option<(u32, u32)>,
) -> Result<BBox> {
    if det.class != PrototypeClass::TypeI {
        return Err(Error::WrongClass(det.class));
    }
    let mask = det.mask.as_ref().ok_or(Error::MissingMask)?;
    let tight = mask_tight_bbox(mask)?;
    let img = BBox::new(det.bbox.x + tight.x, det.bbox.y + tight.y, tight.w, tight.h);
    Ok(img.pad(margin, bounds))
}

/// Re-express a mask registered to `from` in the frame of `to`. Foreground
/// outside `to` is dropped.
pub fn register_mask(mask: &BinaryMask, from: &BBox, to: &BBox) -> BinaryMask {
    let mut out = BinaryMask::new(to.w, to.h);
    for (x, y) in mask.foreground() {
        let (ix, iy) = (from.x + x, from.y + y);
        if to.contains_pixel(ix, iy) {
            out.set(ix - to.x, iy - to.y, true);
        }
    }
    out
}

/// Grow `bbox` over the characters the marker arcs over: those overlapping
/// the marker's column support whose center lies below the upper lobe.
/// `mask` is registered to `bbox`.
pub fn adjust_box_with_chars(
    bbox: &BBox,
    mask: &BinaryMask,
    chars: &[BBox],
    smooth_window: usize,
) -> BBox {
    let Ok(support) = mask_tight_bbox(mask) else {
        return *bbox;
    };
    let span = BBox::new(bbox.x + support.x, bbox.y + support.y, support.w, support.h);
    let py = project(mask, Axis::Y);
    let s = smooth(&py.counts, smooth_window);
    let upper_lobe = peak_plateaus(&s, default_min_height(&s))
        .first()
        .map_or(support.y as f64, |&(a, b)| (a + b) as f64 / 2.0);
    let upper_row = f64::from(bbox.y) + upper_lobe;

    chars
        .iter()
        .filter(|c| horizontal_overlap(c, &span) > 0 && geometric_center(c).py > upper_row)
        .fold(*bbox, |acc, c| acc.union(c))
}

/// Column of maximum smoothed ink, ties at the plateau midpoint.
pub fn find_swap_point(mask: &BinaryMask, smooth_window: usize) -> Result<u32> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let s = smooth(&project(mask, Axis::X).counts, smooth_window);
    argmax_plateau_mid(&s)
        .map(|i| i as u32)
        .ok_or(Error::EmptyMask)
}

/// Exchange the parts of `region` left and right of `swap_x`.
pub fn correct_swap<P>(
    region: &ImageBuffer<P, Vec<P::Subpixel>>,
    swap_x: u32,
) -> Result<ImageBuffer<P, Vec<P::Subpixel>>>
where
    P: Pixel,
{
    let (w, h) = region.dimensions();
    if swap_x == 0 || swap_x >= w {
        return Err(Error::SwapPointOutOfRange { swap_x, width: w });
    }
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let src = if x < w - swap_x { x + swap_x } else { x - (w - swap_x) };
        *region.get_pixel(src, y)
    }))
}

/// Full type I refinement: validate, snap to mask, grow over characters, locate the swap.
pub fn refine_swap(
    det: &PrototypeDetection,
    chars: &[BBox],
    cfg: &SwapConfig,
    bounds: Option<(u32, u32)>,
) -> Result<SwapOutcome> {
    if det.class != PrototypeClass::TypeI {
        return Err(Error::WrongClass(det.class));
    }
    let mask = det.mask.as_ref().ok_or(Error::MissingMask)?;
    if mask.is_empty() {
        return Ok(SwapOutcome::Rejected(MarkerValidation::empty()));
    }
    let validation = validate_marker(mask, cfg)?;
    if !validation.valid {
        return Ok(SwapOutcome::Rejected(validation));
    }
    let mask_box = adjust_box_to_mask(det, cfg.margin, bounds)?;
    let registered = register_mask(mask, &det.bbox, &mask_box);
    let adjusted_box = adjust_box_with_chars(&mask_box, &registered, chars, cfg.smooth_window);
    let column = det.bbox.x + find_swap_point(mask, cfg.smooth_window)?;
    let swap_x = column - adjusted_box.x;
    if swap_x == 0 || swap_x >= adjusted_box.w {
        return Err(Error::SwapPointOutOfRange {
            swap_x,
            width: adjusted_box.w,
        });
    }
    let left_span = BBox::new(adjusted_box.x, adjusted_box.y, swap_x, adjusted_box.h);
    let right_span = BBox::new(column, adjusted_box.y, adjusted_box.w - swap_x, adjusted_box.h);
    Ok(SwapOutcome::Accepted(SwapResult {
        mask_box,
        adjusted_box,
        swap_x,
        left_span,
        right_span,
    }))
}
