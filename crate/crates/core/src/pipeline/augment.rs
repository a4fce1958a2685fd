//! `augment`: scale-expansion sweeps, location-shifted copies and contrast
//! composites written as PNG pairs with JSON sidecars.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::records::write_json;
use crate::augment::{
    dynamic_location_shift, expansion_sweep, synth_contrast_set, CurveEdgePoints, Direction,
    LabeledSample, Polarity,
};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mask::{load_gray, mask_tight_bbox, save_gray, BinaryMask, ProbabilityMap};
use crate::synth::{gen_ideal_marker, gen_text_patch, rng, stamp, BACKGROUND, INK};

pub const AUGMENT_MANIFEST: &str = "augment.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub markers: Vec<String>,
    pub expansions: usize,
    pub shifts: usize,
    pub composites: usize,
}

#[derive(Serialize)]
struct ExpansionSidecar<'a> {
    marker: &'a str,
    tau: u32,
    d: u32,
    target_box: BBox,
    polarity: Polarity,
    edges: CurveEdgePoints,
    tight_width: u32,
}

#[derive(Serialize)]
struct ShiftSidecar<'a> {
    marker: &'a str,
    tau: u32,
    shift: u32,
    direction: Direction,
    target_box: BBox,
    polarity: Polarity,
}

#[derive(Serialize)]
struct CompositeSidecar {
    target_box: BBox,
    negative_box: BBox,
    positive_index: usize,
    negative_index: usize,
    polarity: Polarity,
}

/// Marker mask files: a single file, or every `.png`/`.pgm` in a directory.
fn marker_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no marker masks in {}", path.display())));
    }
    Ok(files)
}

/// Place a marker mask on a canvas wide enough for the whole sweep and any shift.
fn seed_sample(mask: &BinaryMask, cfg: &RunConfig) -> Result<(LabeledSample, CurveEdgePoints)> {
    let tight = mask_tight_bbox(mask)?;
    let marker = mask.crop(&tight)?;
    let a = &cfg.augment;
    let pad_x = a.tau_end + a.max_shift + 2;
    let pad_y = a.jitter_d + 4;
    let (w, h) = (tight.w + 2 * pad_x, tight.h + 2 * pad_y);
    let mut label = BinaryMask::new(w, h);
    label.paste(&marker, pad_x, pad_y);
    let mut image = GrayImage::from_pixel(w, h, Luma([BACKGROUND]));
    stamp(&mut image, &label, 0, 0, INK);
    let target = BBox::new(pad_x, pad_y, tight.w, tight.h);
    let edges = CurveEdgePoints::from_mask(&label)?;
    Ok((LabeledSample::new(image, target, label, Polarity::Positive)?, edges))
}

fn save_pair(dir: &Path, name: &str, s: &LabeledSample) -> Result<()> {
    save_gray(&s.image, &dir.join(format!("{name}.png")))?;
    s.label_mask.save(&dir.join(format!("{name}_mask.png")))
}

/// Run the expansion sweep on every seed marker, shift each result, and
/// build contrast composites from the expanded markers and text patches.
/// All inputs are checked before anything is written.
pub fn cmd_augment(cfg: &RunConfig) -> Result<AugmentSummary> {
    cfg.validate()?;
    let a = &cfg.augment;
    let mut master = rng(cfg.seed);

    let seeds: Vec<(String, BinaryMask)> = match &cfg.images {
        Some(path) => marker_files(path)?
            .into_iter()
            .map(|p| {
                let gray = load_gray(&p)?;
                let name = super::refine::stem(&p.to_string_lossy());
                Ok((name, ProbabilityMap::from_gray(&gray).binarize(cfg.mask_threshold)))
            })
            .collect::<Result<_>>()?,
        None => (0..a.markers)
            .map(|i| {
                let crossing = master.gen_range(48..=72);
                let (m, _) = gen_ideal_marker(120, 36, 3, crossing, master.gen())?;
                Ok((format!("marker_{i:02}"), m))
            })
            .collect::<Result<_>>()?,
    };
    if seeds.is_empty() {
        return Err(Error::Config("no seed markers".into()));
    }
    let prepared: Vec<(String, LabeledSample, CurveEdgePoints)> = seeds
        .iter()
        .map(|(name, m)| {
            let (s, e) = seed_sample(m, cfg)
                .map_err(|e| Error::Config(format!("seed marker {name}: {e}")))?;
            Ok((name.clone(), s, e))
        })
        .collect::<Result<_>>()?;

    let dirs = ["expansion", "shift", "contrast"].map(|d| cfg.out.join(d));
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut summary = AugmentSummary {
        markers: prepared.iter().map(|p| p.0.clone()).collect(),
        expansions: 0,
        shifts: 0,
        composites: 0,
    };
    let mut positives = Vec::new();
    for (name, sample, edges) in &prepared {
        let sweep = expansion_sweep(sample, edges, (a.tau_start, a.tau_end, a.tau_step), a.jitter_d, master.gen())?;
        for (i, x) in sweep.into_iter().enumerate() {
            let tau = a.tau_start + i as u32 * a.tau_step;
            let file = format!("{name}_tau{tau:03}");
            save_pair(&dirs[0], &file, &x.sample)?;
            write_json(
                &dirs[0].join(format!("{file}.json")),
                &ExpansionSidecar {
                    marker: name,
                    tau,
                    d: a.jitter_d,
                    target_box: x.sample.target_box,
                    polarity: x.sample.polarity,
                    edges: x.edges,
                    tight_width: mask_tight_bbox(&x.sample.label_mask)?.w,
                },
            )?;
            summary.expansions += 1;

            let shift = master.gen_range(0..=a.max_shift);
            let direction = if master.gen_bool(0.5) { Direction::Left } else { Direction::Right };
            let moved = dynamic_location_shift(&x.sample, shift, direction)?;
            save_pair(&dirs[1], &file, &moved)?;
            write_json(
                &dirs[1].join(format!("{file}.json")),
                &ShiftSidecar {
                    marker: name,
                    tau,
                    shift,
                    direction,
                    target_box: moved.target_box,
                    polarity: moved.polarity,
                },
            )?;
            summary.shifts += 1;
            positives.push(x.sample);
        }
    }

    let negatives: Vec<LabeledSample> = (0..4)
        .map(|_| {
            let img = gen_text_patch(160, 40, master.gen());
            LabeledSample::new(img, BBox::new(0, 0, 160, 40), BinaryMask::new(160, 40), Polarity::Negative)
        })
        .collect::<Result<_>>()?;
    let composites = synth_contrast_set(&positives, &negatives, a.contrast_count, master.gen())?;
    for (k, c) in composites.iter().enumerate() {
        let file = format!("composite_{k:04}");
        save_pair(&dirs[2], &file, &c.sample)?;
        write_json(
            &dirs[2].join(format!("{file}.json")),
            &CompositeSidecar {
                target_box: c.sample.target_box,
                negative_box: c.negative_box,
                positive_index: c.positive_index,
                negative_index: c.negative_index,
                polarity: c.sample.polarity,
            },
        )?;
    }
    summary.composites = composites.len();
    write_json(&cfg.out.join(AUGMENT_MANIFEST), &summary)?;
    Ok(summary)
}
