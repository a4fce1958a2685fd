//! Seeded generators for ideal markers and synthetic text-line scenes with
//! recorded ground truth.
//!
//! Characters are drawn as a few random strokes inside their boxes; markers
//! are axis-aligned polylines: an upper lobe over the left segment, a
//! vertical crossing stroke, and a lower lobe under the right segment.

use image::{GrayImage, Luma};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::PrototypeClass;
use crate::error::{Error, Result};
use crate::geometry::{geometric_center, horizontal_overlap, BBox};
use crate::mask::{mask_tight_bbox, BinaryMask};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const BACKGROUND: u8 = 255;
pub const INK: u8 = 0;
const CHAR_INK: u8 = 60;

/// Ground truth recorded by [`gen_ideal_marker`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerTruth {
    pub crossing_x: u32,
    pub bbox: BBox,
}

/// Polyline marker geometry, all coordinates half-open.
#[derive(Debug, Clone, Copy)]
struct MarkerShape {
    left: u32,
    right: u32,
    crossing_x: u32,
    top: u32,
    bottom: u32,
    stroke: u32,
}

impl MarkerShape {
    fn cross_start(&self) -> u32 {
        self.crossing_x - self.stroke / 2
    }

    fn draw(&self, mask: &mut BinaryMask) {
        let c0 = self.cross_start();
        let c1 = c0 + self.stroke;
        mask.fill_rect(self.left, self.top, c1, self.top + self.stroke);
        mask.fill_rect(c0, self.top, c1, self.bottom);
        mask.fill_rect(c0, self.bottom - self.stroke, self.right, self.bottom);
    }
}

/// An ideal swap marker on a `width x height` canvas: single-peaked column
/// projection centred on `crossing_x`, two-peaked row projection.
///
/// Each lobe must span at least a fifth of the canvas and the crossing
/// stroke must leave at least five rows between the lobes.
pub fn gen_ideal_marker(
    width: u32,
    height: u32,
    stroke: u32,
    crossing_x: u32,
    seed: u64,
) -> Result<(BinaryMask, MarkerTruth)> {
    let bad = |msg: String| Err(Error::InvalidGeometry(msg));
    if stroke == 0 {
        return bad("stroke thickness must be at least 1".into());
    }
    if crossing_x <= stroke || crossing_x + stroke >= width {
        return bad(format!("crossing {crossing_x} too close to the edge"));
    }
    if crossing_x < width / 5 || crossing_x > width - width / 5 {
        return bad(format!("crossing {crossing_x} leaves a lobe shorter than width/5"));
    }
    if height < 2 * stroke + 9 {
        return bad(format!("height {height} too small for stroke {stroke}"));
    }
    let min_lobe = width / 5;
    if min_lobe < 3 * stroke + 3 {
        return bad(format!("width {width} too small for stroke {stroke}"));
    }
    let mut r = rng(seed);
    let shape = MarkerShape {
        left: r.gen_range(0..=2),
        right: width - r.gen_range(0..=2),
        crossing_x,
        top: r.gen_range(0..=2),
        bottom: height - r.gen_range(0..=2),
        stroke,
    };
    let mut mask = BinaryMask::new(width, height);
    shape.draw(&mut mask);
    let bbox = mask_tight_bbox(&mask)?;
    Ok((mask, MarkerTruth { crossing_x, bbox }))
}

/// Draw a crude glyph: a few strokes inside the box.
pub(crate) fn draw_glyph(img: &mut GrayImage, b: &BBox, r: &mut impl Rng, ink: u8) {
    let strokes = r.gen_range(2..=4);
    for _ in 0..strokes {
        let p0 = (r.gen_range(b.x..b.right()), r.gen_range(b.y..b.bottom()));
        let p1 = (r.gen_range(b.x..b.right()), r.gen_range(b.y..b.bottom()));
        draw_line(img, p0, p1, ink);
    }
}

fn draw_line(img: &mut GrayImage, (x0, y0): (u32, u32), (x1, y1): (u32, u32), ink: u8) {
    let (mut x, mut y) = (i64::from(x0), i64::from(y0));
    let (x1, y1) = (i64::from(x1), i64::from(y1));
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        for (ox, oy) in [(0, 0), (1, 0), (0, 1)] {
            let (px, py) = (x + ox, y + oy);
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, Luma([ink]));
            }
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Paint mask foreground into an image.
pub fn stamp(img: &mut GrayImage, mask: &BinaryMask, ox: u32, oy: u32, ink: u8) {
    for (x, y) in mask.foreground() {
        if ox + x < img.width() && oy + y < img.height() {
            img.put_pixel(ox + x, oy + y, Luma([ink]));
        }
    }
}

/// A short line of text with no modification, used for negative samples.
pub fn gen_text_patch(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    let mut img = GrayImage::from_pixel(width, height, Luma([BACKGROUND]));
    let h = (height * 3 / 5).max(2);
    let y = (height - h) / 2;
    let mut x = 1;
    while x + 6 < width {
        let w = r.gen_range(4..=(h.max(6))).min(width - x - 1);
        draw_glyph(&mut img, &BBox::new(x, y, w, h), &mut r, CHAR_INK);
        x += w + r.gen_range(1..=3);
    }
    img
}

/// A text line with a swap marker over two adjacent segments.
#[derive(Debug, Clone)]
pub struct SwapScene {
    pub image: GrayImage,
    pub chars: Vec<BBox>,
    /// Marker foreground in image coordinates.
    pub marker: BinaryMask,
    pub marker_box: BBox,
    /// Marker box padded by two pixels, united with both segments.
    pub ground_truth: BBox,
    /// Column of the crossing stroke.
    pub swap_column: u32,
    /// Character index ranges of the two exchanged segments.
    pub left_segment: (usize, usize),
    pub right_segment: (usize, usize),
}

/// Ground-truth padding around synthetic markers.
pub const TRUTH_MARGIN: u32 = 2;

pub fn gen_swap_scene(seed: u64) -> Result<SwapScene> {
    let mut r = rng(seed);
    let n = r.gen_range(8..=14usize);
    let h = r.gen_range(18..=26u32);
    let stroke = r.gen_range(1..=3u32);
    let y_main = 12 + stroke + r.gen_range(0..=4);
    let mut chars = Vec::with_capacity(n);
    let mut x = r.gen_range(6..=14u32);
    for _ in 0..n {
        let w = r.gen_range(14..=22u32);
        chars.push(BBox::new(x, y_main, w, h));
        x += w + r.gen_range(2..=6);
    }
    let width = x + 10;
    let height = y_main + h + 12 + stroke + 10;

    let len_a = r.gen_range(1..=3usize);
    let len_b = (len_a as i64 + r.gen_range(-1..=1i64)).clamp(1, 3) as usize;
    let i0 = r.gen_range(1..=n - len_a - len_b - 1);
    let (i1, i2) = (i0 + len_a, i0 + len_a + len_b);

    let first = chars[i0];
    let last = chars[i2 - 1];
    let crossing_x = (chars[i1 - 1].right() + chars[i1].x) / 2;
    let shape = MarkerShape {
        left: first.x + r.gen_range(0..=first.w / 4),
        right: last.right() - r.gen_range(0..=last.w / 4),
        crossing_x,
        top: y_main - 6 - stroke,
        bottom: y_main + h + 6 + stroke,
        stroke,
    };
    let mut marker = BinaryMask::new(width, height);
    shape.draw(&mut marker);
    let marker_box = mask_tight_bbox(&marker)?;

    let mut image = GrayImage::from_pixel(width, height, Luma([BACKGROUND]));
    for c in &chars {
        draw_glyph(&mut image, c, &mut r, CHAR_INK);
    }
    stamp(&mut image, &marker, 0, 0, INK);

    let ground_truth = chars[i0..i2]
        .iter()
        .fold(marker_box.pad(TRUTH_MARGIN, Some((width, height))), |acc, c| acc.union(c));
    Ok(SwapScene {
        image,
        chars,
        marker,
        marker_box,
        ground_truth,
        swap_column: crossing_x,
        left_segment: (i0, i1),
        right_segment: (i1, i2),
    })
}

/// A text line with an overlap group, plus the prototype box a first-stage
/// detector would report for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapScene {
    pub class: PrototypeClass,
    pub width: u32,
    pub height: u32,
    pub proto: BBox,
    /// Main-row characters first, then the overlap group.
    pub chars: Vec<BBox>,
    pub n_main: usize,
    pub ground_truth: BBox,
}

impl OverlapScene {
    pub fn main_row(&self) -> &[BBox] {
        &self.chars[..self.n_main]
    }

    pub fn overlap_group(&self) -> &[BBox] {
        &self.chars[self.n_main..]
    }

    /// Horizontal mirror image of the scene. The prototype is re-anchored on
    /// the mirrored overlap group.
    pub fn mirrored(&self) -> OverlapScene {
        let chars: Vec<BBox> = self.chars.iter().map(|c| c.mirror_x(self.width)).collect();
        let ground_truth = self.ground_truth.mirror_x(self.width);
        let proto = prototype_for(&chars[..self.n_main], &chars[self.n_main..], &ground_truth);
        OverlapScene {
            chars,
            ground_truth,
            proto,
            ..self.clone()
        }
    }

    pub fn render(&self, seed: u64) -> GrayImage {
        let mut r = rng(seed);
        let mut img = GrayImage::from_pixel(self.width, self.height, Luma([BACKGROUND]));
        for c in &self.chars {
            draw_glyph(&mut img, c, &mut r, CHAR_INK);
        }
        img
    }
}

/// Union of the group and the main-row characters it covers horizontally.
fn overlap_truth(main: &[BBox], group: &[BBox]) -> BBox {
    let span = BBox::union_all(group).expect("non-empty group");
    main.iter()
        .filter(|m| m.right().min(span.right()) > m.x.max(span.x))
        .fold(span, |acc, m| acc.union(m))
}

/// Prototype box whose left edge sits midway between the leftmost group
/// character's center and the nearest main-row center.
fn prototype_for(main: &[BBox], group: &[BBox], truth: &BBox) -> BBox {
    let lead = group.iter().min_by_key(|c| c.x).expect("non-empty group");
    let lead_cx = geometric_center(lead).px;
    let nearest = main
        .iter()
        .map(|m| geometric_center(m).px)
        .min_by(|a, b| (a - lead_cx).abs().total_cmp(&(b - lead_cx).abs()))
        .expect("non-empty main row");
    let anchor = ((lead_cx + nearest) / 2.0).round() as u32;
    let anchor = anchor.min(truth.right() - 1);
    BBox::new(anchor, truth.y, truth.right() - anchor, truth.h)
}

/// Overlap scene for a type II, III or IV prototype.
///
/// Type II stacks a same-size group above or below the main row; type III
/// squeezes smaller characters between neighbouring main characters; type
/// IV writes a same-size group over the row with a half-height offset.
/// Requires `n_main > n_ov >= 1`.
pub fn gen_overlap_scene(
    class: PrototypeClass,
    n_main: usize,
    n_ov: usize,
    seed: u64,
) -> Result<OverlapScene> {
    if class == PrototypeClass::TypeI {
        return Err(Error::InvalidGeometry("type I is not an overlap prototype".into()));
    }
    if n_ov == 0 || n_main < 2 || n_main <= n_ov {
        return Err(Error::InvalidGeometry(format!(
            "need n_main > n_ov >= 1 and n_main >= 2, got {n_main}/{n_ov}"
        )));
    }
    let mut r = rng(seed);
    let w = r.gen_range(16..=28u32);
    let h = r.gen_range(20..=32u32);
    let below = r.gen_bool(0.5);
    let y_main = h + 8;
    let mut main = Vec::with_capacity(n_main);
    let mut x = r.gen_range(8..=18u32);
    for _ in 0..n_main {
        main.push(BBox::new(x, y_main, w, h));
        x += w + r.gen_range(1..=w / 4);
    }
    let width = x + 8;
    let height = y_main + 2 * h + 8;
    let main_cy = f64::from(y_main) + f64::from(h) / 2.0;

    let mut group = Vec::with_capacity(n_ov);
    match class {
        PrototypeClass::TypeII | PrototypeClass::TypeIV => {
            let (lo, hi) = if class == PrototypeClass::TypeII {
                (0.65, 0.9)
            } else {
                (0.55, 0.7)
            };
            let dy = (f64::from(h) * r.gen_range(lo..hi)).round() as u32;
            let shift_max = if class == PrototypeClass::TypeII { w / 4 } else { w / 8 };
            let shift = r.gen_range(-(shift_max as i64)..=shift_max as i64);
            let k = r.gen_range(0..=n_main - n_ov);
            for m in &main[k..k + n_ov] {
                let y = if below { y_main + dy } else { y_main - dy };
                let gx = (i64::from(m.x) + shift).max(0) as u32;
                group.push(BBox::new(gx, y, w, h));
            }
        }
        PrototypeClass::TypeIII => {
            let (gw, gh) = ((w * 3 / 5).max(4), (h * 3 / 5).max(4));
            let dyc = f64::from(h) * r.gen_range(0.6..0.8);
            let cy = if below { main_cy + dyc } else { main_cy - dyc };
            let k = r.gen_range(0..n_main - n_ov);
            for i in 0..n_ov {
                let (a, b) = (main[k + i], main[k + i + 1]);
                let cx = f64::from(a.right() + b.x) / 2.0;
                let gx = (cx - f64::from(gw) / 2.0).round() as u32;
                let gy = (cy - f64::from(gh) / 2.0).round() as u32;
                group.push(BBox::new(gx, gy, gw, gh));
            }
        }
        PrototypeClass::TypeI => unreachable!(),
    }

    let ground_truth = overlap_truth(&main, &group);
    let proto = prototype_for(&main, &group, &ground_truth);
    let mut chars = main;
    chars.extend(group);
    Ok(OverlapScene {
        class,
        width,
        height,
        proto,
        chars,
        n_main,
        ground_truth,
    })
}

/// Indices of main-row characters the group overlaps horizontally.
pub fn covered_main_indices(scene: &OverlapScene) -> Vec<usize> {
    let span = BBox::union_all(scene.overlap_group()).expect("non-empty group");
    scene
        .main_row()
        .iter()
        .enumerate()
        .filter(|(_, m)| horizontal_overlap(m, &span) > 0)
        .map(|(i, _)| i)
        .collect()
}
