//! Axis-aligned boxes and points in pixel units.
//!
//! All box arithmetic uses half-open intervals: a box `[x, y, w, h]` covers
//! columns `x..x + w` and rows `y..y + h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x, y, w, h]` with `w, h >= 1`.
///
/// Serializes as a four-element integer array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = Error;

    fn try_from([x, y, w, h]: [u32; 4]) -> Result<Self> {
        BBox::try_new(x, y, w, h)
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    /// Panics when `w` or `h` is zero; use [`BBox::try_new`] for untrusted input.
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self::try_new(x, y, w, h).expect("box width and height must be positive")
    }

    pub fn try_new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Box spanning the half-open ranges `x0..x1`, `y0..y1`.
    pub fn from_corners(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        Self::try_new(
            x0,
            y0,
            x1.saturating_sub(x0),
            y1.saturating_sub(y0),
        )
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x: self.x.min(other.x),
            y: self.y.min(other.y),
            w: self.right().max(other.right()) - self.x.min(other.x),
            h: self.bottom().max(other.bottom()) - self.y.min(other.y),
        }
    }

    /// Union of a non-empty sequence of boxes.
    pub fn union_all<'a>(boxes: impl IntoIterator<Item = &'a BBox>) -> Option<BBox> {
        boxes.into_iter().fold(None, |acc, b| match acc {
            None => Some(*b),
            Some(u) => Some(u.union(b)),
        })
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.right() >= other.right()
            && self.bottom() >= other.bottom()
    }

    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    /// True when the box lies inside a `width x height` image.
    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    /// Translate by a signed offset; `None` if the origin would become negative.
    pub fn translate(&self, dx: i64, dy: i64) -> Option<BBox> {
        let x = u32::try_from(i64::from(self.x) + dx).ok()?;
        let y = u32::try_from(i64::from(self.y) + dy).ok()?;
        Some(BBox { x, y, ..*self })
    }

    /// Grow by `margin` on every side, clamped at zero and, when given, at the image bounds.
    pub fn pad(&self, margin: u32, bounds: Option<(u32, u32)>) -> BBox {
        let x0 = self.x.saturating_sub(margin);
        let y0 = self.y.saturating_sub(margin);
        let (mut x1, mut y1) = (self.right() + margin, self.bottom() + margin);
        if let Some((bw, bh)) = bounds {
            x1 = x1.min(bw.max(x0 + 1));
            y1 = y1.min(bh.max(y0 + 1));
        }
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Clip to a `width x height` image; `None` when nothing remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        (x1 > self.x && y1 > self.y).then(|| BBox::new(self.x, self.y, x1 - self.x, y1 - self.y))
    }

    /// Mirror horizontally inside an image of the given width.
    pub fn mirror_x(&self, width: u32) -> BBox {
        BBox {
            x: width - self.right(),
            ..*self
        }
    }
}

/// Point with real-valued pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub px: f64,
    pub py: f64,
}

impl Point {
    pub fn new(px: f64, py: f64) -> Self {
        Self { px, py }
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Geometric center `(x + w/2, y + h/2)`.
pub fn geometric_center(b: &BBox) -> Point {
    Point::new(
        f64::from(b.x) + f64::from(b.w) / 2.0,
        f64::from(b.y) + f64::from(b.h) / 2.0,
    )
}

/// Length of the intersection of the two column ranges.
pub fn horizontal_overlap(a: &BBox, b: &BBox) -> u32 {
    a.right().min(b.right()).saturating_sub(a.x.max(b.x))
}

/// Median of a non-empty slice; the mean of the two middle values for even lengths.
pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}
