//! `synth`: write synthetic stage-one fixtures with known ground truth.
//!
//! Each fixture image holds one true target (a swap marker or an overlap
//! group) and a configurable number of injected false positives. Swap
//! false positives carry solid-blob or outline masks; overlap false
//! positives are prototype boxes anchored on a plain stretch of the main row.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{FixtureKind, RunConfig};
use super::records::{write_json, CharFile, DetectionFile, DetectionRecord};
use crate::detection::PrototypeClass;
use crate::error::{Error, Result};
use crate::eval::ImageRecord;
use crate::geometry::{geometric_center, BBox};
use crate::mask::{save_gray, BinaryMask};
use crate::overlap::OverlapParams;
use crate::synth::{gen_overlap_scene, gen_swap_scene, rng};

pub const DETECTIONS_FILE: &str = "detections.json";
pub const CHARS_FILE: &str = "chars.json";
pub const GT_FILE: &str = "gt.json";
pub const MANIFEST_FILE: &str = "fixtures.json";

/// What a fixture image contains, by detection index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub image: String,
    pub class: PrototypeClass,
    pub seed: u64,
    pub true_detections: Vec<usize>,
    pub false_positives: Vec<usize>,
}

/// Perturb each edge by at most `j` pixels, staying inside the image.
fn jitter_box(r: &mut impl Rng, b: &BBox, j: u32, (w, h): (u32, u32)) -> BBox {
    if j == 0 {
        return *b;
    }
    let j = i64::from(j);
    let mut edge = |v: u32, max: u32| (i64::from(v) + r.gen_range(-j..=j)).clamp(0, i64::from(max)) as u32;
    let x0 = edge(b.x, w - 1);
    let y0 = edge(b.y, h - 1);
    let x1 = edge(b.right(), w).max(x0 + 1);
    let y1 = edge(b.bottom(), h).max(y0 + 1);
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// Box-sized mask with no marker signature: a filled block or a rectangle outline.
fn decoy_mask(w: u32, h: u32, outline: bool) -> BinaryMask {
    let (mx, my) = (w / 6, h / 6);
    let mut m = BinaryMask::new(w, h);
    if outline {
        let t = 2.min(w / 4).max(1);
        m.fill_rect(mx, my, w - mx, my + t);
        m.fill_rect(mx, h - my - t, w - mx, h - my);
        m.fill_rect(mx, my, mx + t, h - my);
        m.fill_rect(w - mx - t, my, w - mx, h - my);
    } else {
        m.fill_rect(mx, my, w - mx, h - my);
    }
    m
}

struct Fixture {
    entry: FixtureEntry,
    detections: DetectionFile,
    chars: CharFile,
    gt: ImageRecord,
}

fn swap_fixture(id: &str, seed: u64, cfg: &RunConfig, out: &Path) -> Result<Fixture> {
    let scene = gen_swap_scene(seed)?;
    let dims = scene.image.dimensions();
    let mut r = rng(seed ^ 0x5eed);
    let image = format!("{id}.png");
    save_gray(&scene.image, &out.join("images").join(&image))?;

    let mut dets = Vec::new();
    let write_mask = |k: usize, m: &BinaryMask| -> Result<String> {
        let rel = format!("masks/{id}_{k}.png");
        m.save(&out.join(&rel))?;
        Ok(rel)
    };
    let b = jitter_box(&mut r, &scene.ground_truth, cfg.synth.box_jitter, dims);
    let mask = scene.marker.crop(&b)?;
    dets.push(DetectionRecord {
        class: PrototypeClass::TypeI,
        bbox: b,
        score: r.gen_range(0.6..1.0),
        mask: Some(write_mask(0, &mask)?),
    });

    let n = scene.chars.len();
    let mut fps = Vec::new();
    for k in 0..cfg.synth.fp_per_image {
        let len = r.gen_range(2..=3usize).min(n);
        let i = r.gen_range(0..=n - len);
        let run = BBox::union_all(&scene.chars[i..i + len]).expect("non-empty run");
        let b = jitter_box(&mut r, &run.pad(6, Some(dims)), cfg.synth.box_jitter, dims);
        let mask = decoy_mask(b.w, b.h, k % 2 == 1);
        fps.push(dets.len());
        dets.push(DetectionRecord {
            class: PrototypeClass::TypeI,
            bbox: b,
            score: r.gen_range(0.3..1.0),
            mask: Some(write_mask(dets.len(), &mask)?),
        });
    }
    Ok(Fixture {
        entry: FixtureEntry {
            image: image.clone(),
            class: PrototypeClass::TypeI,
            seed,
            true_detections: vec![0],
            false_positives: fps,
        },
        detections: DetectionFile {
            image: image.clone(),
            detections: dets,
        },
        chars: CharFile {
            image: image.clone(),
            chars: scene.chars,
        },
        gt: ImageRecord {
            image,
            boxes: vec![scene.ground_truth],
            classes: vec![PrototypeClass::TypeI],
            scores: None,
        },
    })
}

fn overlap_fixture(
    id: &str,
    class: PrototypeClass,
    seed: u64,
    cfg: &RunConfig,
    out: &Path,
) -> Result<Fixture> {
    let mut r = rng(seed ^ 0x0e7a);
    let n_ov = r.gen_range(1..=3usize);
    let n_main = n_ov + r.gen_range(5..=8usize);
    let scene = gen_overlap_scene(class, n_main, n_ov, seed)?;
    let dims = (scene.width, scene.height);
    let image = format!("{id}.png");
    save_gray(&scene.render(seed), &out.join("images").join(&image))?;

    let j = cfg.synth.box_jitter;
    let mut dets = vec![DetectionRecord {
        class,
        bbox: jitter_box(&mut r, &scene.proto, j, dims),
        score: r.gen_range(0.6..1.0),
        mask: None,
    }];

    // main-row characters whose center window holds no group center
    let gamma = OverlapParams::from_chars(&scene.chars).map_or(0.0, |p| p.gamma);
    let group: Vec<f64> = scene.overlap_group().iter().map(|c| geometric_center(c).px).collect();
    let candidates: Vec<&BBox> = scene
        .main_row()
        .iter()
        .filter(|m| {
            let cx = geometric_center(m).px;
            group.iter().all(|g| (g - cx).abs() > gamma + f64::from(j) + 1.0)
        })
        .collect();
    let mut fps = Vec::new();
    for _ in 0..cfg.synth.fp_per_image {
        if candidates.is_empty() {
            break;
        }
        let m = candidates[r.gen_range(0..candidates.len())];
        let x = geometric_center(m).px.round() as u32;
        let w = (2 * m.w).min(scene.width - x);
        let b = jitter_box(&mut r, &BBox::new(x, m.y, w, m.h), j, dims);
        fps.push(dets.len());
        dets.push(DetectionRecord {
            class,
            bbox: b,
            score: r.gen_range(0.3..1.0),
            mask: None,
        });
    }
    Ok(Fixture {
        entry: FixtureEntry {
            image: image.clone(),
            class,
            seed,
            true_detections: vec![0],
            false_positives: fps,
        },
        detections: DetectionFile {
            image: image.clone(),
            detections: dets,
        },
        chars: CharFile {
            image: image.clone(),
            chars: scene.chars.clone(),
        },
        gt: ImageRecord {
            image,
            boxes: vec![scene.ground_truth],
            classes: vec![class],
            scores: None,
        },
    })
}

/// Write `images/`, `masks/`, `detections.json`, `chars.json`, `gt.json`
/// and a `fixtures.json` manifest under the output directory.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<FixtureEntry>> {
    cfg.validate()?;
    let out = &cfg.out;
    for sub in ["images", "masks"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut master = rng(cfg.seed);
    let overlap_classes = [PrototypeClass::TypeII, PrototypeClass::TypeIII, PrototypeClass::TypeIV];
    let mut fixtures = Vec::with_capacity(cfg.synth.fixtures);
    for i in 0..cfg.synth.fixtures {
        let seed: u64 = master.gen();
        let id = format!("fixture_{i:04}");
        let swap = match cfg.synth.kind {
            FixtureKind::Swap => true,
            FixtureKind::Overlap => false,
            FixtureKind::Mixed => i % 2 == 0,
        };
        let f = if swap {
            swap_fixture(&id, seed, cfg, out)?
        } else {
            let class = overlap_classes[(i / 2) % 3];
            overlap_fixture(&id, class, seed, cfg, out)?
        };
        fixtures.push(f);
    }
    let entries: Vec<FixtureEntry> = fixtures.iter().map(|f| f.entry.clone()).collect();
    let dets: Vec<&DetectionFile> = fixtures.iter().map(|f| &f.detections).collect();
    let chars: Vec<&CharFile> = fixtures.iter().map(|f| &f.chars).collect();
    let gts: Vec<&ImageRecord> = fixtures.iter().map(|f| &f.gt).collect();
    write_json(&out.join(DETECTIONS_FILE), &dets)?;
    write_json(&out.join(CHARS_FILE), &chars)?;
    write_json(&out.join(GT_FILE), &gts)?;
    write_json(&out.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}
