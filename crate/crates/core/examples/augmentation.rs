//! Scale expansion, location shift, contrast composites and the mask
//! cross-entropy on a generated marker.
//!
//! cargo run --example augmentation

use abtext::augment::{
    dynamic_location_shift, expansion_sweep, mask_cross_entropy, synth_contrast_set, CurveEdgePoints,
    Direction, LabeledSample, Polarity, Reduction,
};
use abtext::geometry::BBox;
use abtext::mask::{mask_tight_bbox, BinaryMask, ProbabilityMap};
use abtext::synth::{gen_ideal_marker, gen_text_patch, stamp, BACKGROUND, INK};
use image::{GrayImage, Luma};

fn main() -> abtext::Result<()> {
    let (marker, truth) = gen_ideal_marker(120, 36, 3, 60, 1)?;
    let (w, h, ox, oy) = (420, 60, 150, 12);
    let mut label = BinaryMask::new(w, h);
    label.paste(&marker, ox, oy);
    let mut image = GrayImage::from_pixel(w, h, Luma([BACKGROUND]));
    stamp(&mut image, &label, 0, 0, INK);
    let target = truth.bbox.translate(i64::from(ox), i64::from(oy)).expect("inside canvas");
    let seed = LabeledSample::new(image, target, label, Polarity::Positive)?;
    let edges = CurveEdgePoints::from_mask(&seed.label_mask)?;

    let base = mask_tight_bbox(&seed.label_mask)?.w;
    let sweep = expansion_sweep(&seed, &edges, (2, 62, 20), 1, 3)?;
    for (tau, x) in (2..=62).step_by(20).zip(&sweep) {
        let grown = mask_tight_bbox(&x.sample.label_mask)?.w;
        println!("tau {tau}: width {base} -> {grown}");
    }

    let moved = dynamic_location_shift(&seed, 25, Direction::Right)?;
    println!(
        "shifted box {:?} -> {:?}, crop unchanged: {}",
        seed.target_box,
        moved.target_box,
        moved.crop().0 == seed.crop().0
    );

    let negatives = vec![LabeledSample::new(
        gen_text_patch(160, 40, 9),
        BBox::new(0, 0, 160, 40),
        BinaryMask::new(160, 40),
        Polarity::Negative,
    )?];
    for c in synth_contrast_set(std::slice::from_ref(&seed), &negatives, 3, 5)? {
        println!(
            "composite {}x{}: positive at {:?}, text patch at {:?}",
            c.sample.image.width(),
            c.sample.image.height(),
            c.sample.target_box,
            c.negative_box
        );
    }

    let (wm, hm) = seed.label_mask.dimensions();
    let perfect = ProbabilityMap::from_mask(&seed.label_mask);
    let unsure = ProbabilityMap::filled(wm, hm, 0.5);
    println!(
        "cross-entropy: perfect {:.3e}, uniform 0.5 {:.1} (mean {:.4})",
        mask_cross_entropy(&perfect, &seed.label_mask, Reduction::Sum)?,
        mask_cross_entropy(&unsure, &seed.label_mask, Reduction::Sum)?,
        mask_cross_entropy(&unsure, &seed.label_mask, Reduction::Mean)?,
    );
    Ok(())
}
