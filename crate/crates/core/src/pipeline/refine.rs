//! `refine`: route first-stage detections through swap or overlap
//! refinement, image by image.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{GrayImage, Luma, Rgb, RgbImage};
use rayon::prelude::*;

use super::config::{CharScope, RunConfig};
use super::records::{
    read_many, resolve_beside, write_json, CharFile, DetectionFile, DetectionRecord, KeptDetection,
    Provenance, RejectReason, RejectedDetection, StageTwoOutput, SwapSplit,
};
use crate::detection::{PrototypeClass, PrototypeDetection};
use crate::error::{Error, Result};
use crate::eval::ImageRecord;
use crate::geometry::BBox;
use crate::mask::{load_gray, save_gray, BinaryMask, ProbabilityMap};
use crate::overlap::{filter_center_in, refine_overlap, FalsePositiveReason, Verdict};
use crate::swap::{correct_swap, refine_swap, SwapOutcome};

pub const REFINED_FILE: &str = "refined.json";
/// Kept detections in the evaluation format.
pub const PREDICTIONS_FILE: &str = "predictions.json";
/// Unrefined input detections in the evaluation format.
pub const STAGE_ONE_FILE: &str = "stage_one.json";

const KEPT_COLOR: Rgb<u8> = Rgb([0, 170, 0]);
const REJECTED_COLOR: Rgb<u8> = Rgb([220, 0, 0]);

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// File-system-safe stem for an image id.
pub(crate) fn stem(image: &str) -> String {
    let base = Path::new(image)
        .file_stem()
        .map_or_else(|| image.to_string(), |s| s.to_string_lossy().into_owned());
    base.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required")))?;
    if !p.exists() {
        return Err(Error::io(p, std::io::ErrorKind::NotFound.into()));
    }
    Ok(p)
}

/// Map of image id to character boxes; duplicate ids are an error.
fn char_map(files: Vec<CharFile>) -> Result<BTreeMap<String, Vec<BBox>>> {
    let mut map = BTreeMap::new();
    for f in files {
        if map.insert(f.image.clone(), f.chars).is_some() {
            return Err(Error::Parse(format!("duplicate character record for {}", f.image)));
        }
    }
    Ok(map)
}

/// Refine every detection file record and write `refined.json`,
/// `predictions.json`, `stage_one.json`, corrected crops and overlays.
pub fn cmd_refine(cfg: &RunConfig) -> Result<Vec<StageTwoOutput>> {
    cfg.validate()?;
    let det_path = require(&cfg.detections, "detections")?;
    let files: Vec<DetectionFile> = read_many(det_path)?;
    let mut ids = std::collections::BTreeSet::new();
    if let Some(dup) = files.iter().find(|f| !ids.insert(f.image.as_str())) {
        return Err(Error::Parse(format!("duplicate detection record for {}", dup.image)));
    }
    let chars = match &cfg.chars {
        Some(_) => char_map(read_many(require(&cfg.chars, "chars")?)?)?,
        None => BTreeMap::new(),
    };
    let images = match &cfg.images {
        Some(_) => Some(require(&cfg.images, "images")?),
        None => None,
    };
    if cfg.resize.is_some() && images.is_none() {
        return Err(Error::Config("resize needs --images".into()));
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let pool = worker_pool(cfg.workers)?;
    let empty = Vec::new();
    let outputs: Vec<StageTwoOutput> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let c = chars.get(&f.image).unwrap_or(&empty);
                refine_image(f, c, det_path, images, cfg)
            })
            .collect::<Result<_>>()
    })?;
    for o in &outputs {
        o.check_conservation()?;
    }

    write_json(&cfg.out.join(REFINED_FILE), &outputs)?;
    let preds: Vec<ImageRecord> = outputs.iter().map(StageTwoOutput::to_eval_record).collect();
    write_json(&cfg.out.join(PREDICTIONS_FILE), &preds)?;
    let stage_one: Vec<ImageRecord> = files.iter().map(DetectionFile::to_eval_record).collect();
    write_json(&cfg.out.join(STAGE_ONE_FILE), &stage_one)?;
    Ok(outputs)
}

fn scale_box(b: &BBox, (sx, sy): (f64, f64), (w, h): (u32, u32)) -> BBox {
    let edge = |v: u32, s: f64, max: u32| ((f64::from(v) * s).round() as u32).min(max);
    let x0 = edge(b.x, sx, w - 1);
    let y0 = edge(b.y, sy, h - 1);
    let x1 = edge(b.right(), sx, w).max(x0 + 1);
    let y1 = edge(b.bottom(), sy, h).max(y0 + 1);
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// Geometry shared by every detection of one image.
struct ImageContext<'a> {
    image: Option<GrayImage>,
    /// Dimensions of the image as stored, before any resize.
    source_dims: Option<(u32, u32)>,
    scale: Option<(f64, f64)>,
    chars: Vec<BBox>,
    det_path: &'a Path,
    cfg: &'a RunConfig,
}

impl ImageContext<'_> {
    fn bounds(&self) -> Option<(u32, u32)> {
        self.image.as_ref().map(GrayImage::dimensions)
    }

    fn map_box(&self, b: &BBox) -> BBox {
        match (self.scale, self.bounds()) {
            (Some(s), Some(dims)) => scale_box(b, s, dims),
            _ => *b,
        }
    }

    /// Load a mask given either at box size or at full image size, threshold
    /// it, and bring it to the (possibly resized) box.
    fn load_mask(&self, rel: &str, source_box: &BBox, bbox: &BBox) -> Result<BinaryMask> {
        let path = resolve_beside(self.det_path, rel);
        let gray = load_gray(&path)?;
        let dims = gray.dimensions();
        let mask = ProbabilityMap::from_gray(&gray).binarize(self.cfg.mask_threshold);
        let boxed = if dims == (source_box.w, source_box.h) {
            mask
        } else if self.source_dims.is_none_or(|d| d == dims) {
            mask.crop(source_box).map_err(|_| Error::DimensionMismatch {
                expected: (source_box.w, source_box.h),
                actual: dims,
            })?
        } else {
            return Err(Error::DimensionMismatch {
                expected: (source_box.w, source_box.h),
                actual: dims,
            });
        };
        if boxed.dimensions() == (bbox.w, bbox.h) {
            return Ok(boxed);
        }
        let resized = imageops::resize(&boxed.to_gray(), bbox.w, bbox.h, FilterType::Nearest);
        Ok(BinaryMask::from_gray(&resized, 128))
    }
}

fn refine_image(
    file: &DetectionFile,
    chars: &[BBox],
    det_path: &Path,
    images: Option<&Path>,
    cfg: &RunConfig,
) -> Result<StageTwoOutput> {
    let mut image = images.map(|dir| load_gray(&dir.join(&file.image))).transpose()?;
    let source_dims = image.as_ref().map(GrayImage::dimensions);
    let mut scale = None;
    if let (Some((w, h)), Some(img)) = (cfg.resize, image.as_mut()) {
        let (iw, ih) = img.dimensions();
        scale = Some((f64::from(w) / f64::from(iw), f64::from(h) / f64::from(ih)));
        *img = imageops::resize(img, w, h, FilterType::Triangle);
    }
    let mut ctx = ImageContext {
        image,
        source_dims,
        scale,
        chars: Vec::new(),
        det_path,
        cfg,
    };
    ctx.chars = chars.iter().map(|c| ctx.map_box(c)).collect();

    let mut out = StageTwoOutput {
        image: file.image.clone(),
        input_count: file.detections.len(),
        scale: scale.map(|(sx, sy)| [sx, sy]),
        kept: Vec::new(),
        rejected: Vec::new(),
    };
    for (index, det) in file.detections.iter().enumerate() {
        match refine_detection(index, det, &ctx) {
            Ok(k) => out.kept.push(k),
            Err(r) => out.rejected.push(*r),
        }
    }

    if let Some(img) = &ctx.image {
        if cfg.crops {
            write_crops(&mut out, img, &cfg.out)?;
        }
        if cfg.overlays {
            // diagnostics only: a failed overlay never fails the run
            if let Err(e) = write_overlay(&out, img, &cfg.out) {
                eprintln!("warning: overlay for {}: {e}", file.image);
            }
        }
    }
    Ok(out)
}

fn refine_detection(
    index: usize,
    det: &DetectionRecord,
    ctx: &ImageContext,
) -> Result<KeptDetection, Box<RejectedDetection>> {
    let bbox = ctx.map_box(&det.bbox);
    let reject = |reason: RejectReason, detail: Option<String>| {
        Box::new(RejectedDetection {
            index,
            class: det.class,
            bbox,
            score: det.score,
            reason,
            detail,
            validation: None,
        })
    };
    let error = |e: Error| reject(RejectReason::Error, Some(e.to_string()));
    if det.score < ctx.cfg.min_score {
        return Err(reject(RejectReason::BelowMinScore, None));
    }
    let kept = |bbox_out: BBox, provenance: Vec<Provenance>| KeptDetection {
        index,
        class: det.class,
        bbox: bbox_out,
        score: det.score,
        source_box: bbox,
        provenance,
        swap: None,
        crop: None,
    };

    if det.class == PrototypeClass::TypeI {
        let Some(rel) = &det.mask else {
            return Err(reject(RejectReason::MissingMask, None));
        };
        let mask = ctx.load_mask(rel, &det.bbox, &bbox).map_err(error)?;
        let pd = PrototypeDetection::new(bbox, det.class, det.score, Some(mask)).map_err(error)?;
        return match refine_swap(&pd, &ctx.chars, &ctx.cfg.swap, ctx.bounds()).map_err(error)? {
            SwapOutcome::Rejected(v) => {
                let mut r = reject(RejectReason::InvalidMarker, None);
                r.validation = Some(v);
                Err(r)
            }
            SwapOutcome::Accepted(s) => {
                let mut provenance = vec![Provenance::MaskAdjusted];
                if s.char_adjusted() {
                    provenance.push(Provenance::CharAdjusted);
                }
                let mut k = kept(s.adjusted_box, provenance);
                k.swap = Some(SwapSplit {
                    swap_x: s.swap_x,
                    swap_column: s.swap_column(),
                    left_span: s.left_span,
                    right_span: s.right_span,
                });
                Ok(k)
            }
        };
    }

    let chars = match ctx.cfg.char_scope {
        CharScope::Image => ctx.chars.clone(),
        CharScope::Proto => filter_center_in(&bbox, &ctx.chars),
    };
    let Some(params) = ctx.cfg.overlap.resolve(&chars) else {
        return Err(reject(RejectReason::NoCharacters, None));
    };
    match refine_overlap(&bbox, &chars, &params) {
        Ok(r) => match (r.verdict, r.final_box) {
            (Verdict::Refined, Some(b)) => Ok(kept(b, vec![Provenance::Alg1Refined])),
            _ => Err(reject(
                match r.reason {
                    Some(FalsePositiveReason::FlatWindow) => RejectReason::FlatWindow,
                    Some(FalsePositiveReason::NoOverlap) => RejectReason::NoOverlap,
                    _ => RejectReason::OverlapLostAfterPruning,
                },
                None,
            )),
        },
        Err(Error::NoCenterInWindow) => Err(reject(RejectReason::EmptyWindow, None)),
        Err(e) => Err(error(e)),
    }
}

fn write_crops(out: &mut StageTwoOutput, img: &GrayImage, out_dir: &Path) -> Result<()> {
    let name = stem(&out.image);
    for k in out.kept.iter_mut() {
        let Some(s) = k.swap else { continue };
        let b = k.bbox;
        let region = imageops::crop_imm(img, b.x, b.y, b.w, b.h).to_image();
        let corrected = correct_swap(&region, s.swap_x)?;
        let rel = format!("crops/{name}_{}.png", k.index);
        let path = out_dir.join(&rel);
        std::fs::create_dir_all(out_dir.join("crops")).map_err(|e| Error::io(out_dir, e))?;
        save_gray(&corrected, &path)?;
        k.crop = Some(rel);
    }
    Ok(())
}

fn draw_rect(img: &mut RgbImage, b: &BBox, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let Some(b) = b.clip(w, h) else { return };
    for x in b.x..b.right() {
        img.put_pixel(x, b.y, color);
        img.put_pixel(x, b.bottom() - 1, color);
    }
    for y in b.y..b.bottom() {
        img.put_pixel(b.x, y, color);
        img.put_pixel(b.right() - 1, y, color);
    }
}

fn write_overlay(out: &StageTwoOutput, img: &GrayImage, out_dir: &Path) -> Result<()> {
    let mut rgb = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let Luma([v]) = *img.get_pixel(x, y);
        Rgb([v, v, v])
    });
    for r in &out.rejected {
        draw_rect(&mut rgb, &r.bbox, REJECTED_COLOR);
    }
    for k in &out.kept {
        draw_rect(&mut rgb, &k.bbox, KEPT_COLOR);
    }
    let dir = out_dir.join("overlays");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(format!("{}.png", stem(&out.image)));
    rgb.save(&path)?;
    Ok(())
}
