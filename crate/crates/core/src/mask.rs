//! Binary masks, probability maps and projection profiles.

use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Row-major foreground raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (bits.len() as u32, 1),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Fill the half-open rectangle `x0..x1, y0..y1`, clipped to the mask.
    pub fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, true);
            }
        }
    }

    pub fn crop(&self, b: &BBox) -> Result<BinaryMask> {
        if !b.fits_in(self.width, self.height) {
            return Err(Error::InvalidGeometry(format!(
                "crop {:?} outside {}x{} mask",
                b, self.width, self.height
            )));
        }
        Ok(BinaryMask::from_fn(b.w, b.h, |x, y| self.get(b.x + x, b.y + y)))
    }

    /// Copy `src` into this mask with its origin at `(ox, oy)`; pixels falling outside are dropped.
    pub fn paste(&mut self, src: &BinaryMask, ox: u32, oy: u32) {
        for y in 0..src.height {
            for x in 0..src.width {
                let (tx, ty) = (ox + x, oy + y);
                if tx < self.width && ty < self.height {
                    self.set(tx, ty, src.get(x, y));
                }
            }
        }
    }

    /// Foreground coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    pub fn mirror_x(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    /// Foreground as 255, background as 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Pixels with value `>= threshold` become foreground.
    pub fn from_gray(img: &GrayImage, threshold: u8) -> BinaryMask {
        BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[0] >= threshold)
    }

    /// Save as 8-bit PNG, or as ASCII PGM when the extension is `pgm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        save_gray(&self.to_gray(), path)
    }

    /// Load a grayscale PNG or PGM; values `>= 128` are foreground.
    pub fn load(path: &Path) -> Result<BinaryMask> {
        Ok(BinaryMask::from_gray(&load_gray(path)?, 128))
    }
}

/// Per-pixel foreground probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (values.len() as u32, 1),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: u32, height: u32, p: f64) -> Self {
        Self {
            width,
            height,
            values: vec![p; width as usize * height as usize],
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            values: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Gray levels scaled to `[0, 1]`.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            values: img.pixels().map(|p| f64::from(p[0]) / 255.0).collect(),
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Probabilities `>= threshold` become foreground.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&p| p >= threshold).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// One count per column.
    X,
    /// One count per row.
    Y,
}

/// Foreground counts along one axis of a mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionProfile {
    pub axis: Axis,
    pub counts: Vec<u32>,
}

impl ProjectionProfile {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// First and last index with a non-zero count.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.counts.iter().position(|&c| c > 0)?;
        let last = self.counts.iter().rposition(|&c| c > 0)?;
        Some((first, last))
    }

    /// Longest run of zeros strictly inside the support.
    pub fn max_internal_gap(&self) -> usize {
        let Some((first, last)) = self.support() else {
            return 0;
        };
        let mut best = 0;
        let mut run = 0;
        for &c in &self.counts[first..=last] {
            if c == 0 {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }
}

/// Column (X) or row (Y) foreground counts.
pub fn project(mask: &BinaryMask, axis: Axis) -> ProjectionProfile {
    let mut counts = match axis {
        Axis::X => vec![0u32; mask.width as usize],
        Axis::Y => vec![0u32; mask.height as usize],
    };
    for (x, y) in mask.foreground() {
        match axis {
            Axis::X => counts[x as usize] += 1,
            Axis::Y => counts[y as usize] += 1,
        }
    }
    ProjectionProfile { axis, counts }
}

/// Centered moving average with zeros beyond both ends. Even windows are
/// widened by one.
pub fn smooth(counts: &[u32], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    let full = (2 * half + 1) as f64;
    let n = counts.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let sum: u64 = counts[lo..hi].iter().map(|&c| u64::from(c)).sum();
            sum as f64 / full
        })
        .collect()
}

/// Maximal plateaus of equal value that are strictly higher than both
/// neighbours (the profile ends count as lower) and exceed `min_height`.
/// Returned as inclusive `(start, end)` index pairs.
pub fn peak_plateaus(values: &[f64], min_height: f64) -> Vec<(usize, usize)> {
    let mut peaks = Vec::new();
    let n = values.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let v = values[i];
        let left_lower = i == 0 || values[i - 1] < v;
        let right_lower = j + 1 == n || values[j + 1] < v;
        if v > min_height && left_lower && right_lower {
            peaks.push((i, j));
        }
        i = j + 1;
    }
    peaks
}

/// Number of peaks in the smoothed profile.
pub fn count_peaks(profile: &ProjectionProfile, smooth_window: usize, min_height: f64) -> usize {
    peak_plateaus(&smooth(&profile.counts, smooth_window), min_height).len()
}

/// Default peak floor: 10% of the smoothed profile maximum.
pub fn default_min_height(smoothed: &[f64]) -> f64 {
    0.1 * smoothed.iter().copied().fold(0.0, f64::max)
}

/// Index of the maximum; ties resolve to the midpoint of the first maximal plateau.
pub fn argmax_plateau_mid(values: &[f64]) -> Option<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = values.iter().position(|&v| v == max)?;
    let len = values[start..].iter().take_while(|&&v| v == max).count();
    Some(start + (len - 1) / 2)
}

/// Smallest box containing every foreground pixel.
pub fn mask_tight_bbox(mask: &BinaryMask) -> Result<BBox> {
    let xs = project(mask, Axis::X).support().ok_or(Error::EmptyMask)?;
    let ys = project(mask, Axis::Y).support().ok_or(Error::EmptyMask)?;
    Ok(BBox::new(
        xs.0 as u32,
        ys.0 as u32,
        (xs.1 - xs.0 + 1) as u32,
        (ys.1 - ys.0 + 1) as u32,
    ))
}

pub(crate) fn load_gray(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path)?.into_luma8())
}

pub(crate) fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let enc = PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Ascii));
        img.write_with_encoder(enc)?;
    } else {
        img.save_with_format(path, image::ImageFormat::Png)?;
    }
    Ok(())
}
