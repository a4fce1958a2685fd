//! Validate a generated swap marker, refine a detection on a synthetic
//! text line, and undo the swap inside the adjusted box.
//!
//! cargo run --example marker_validation

use abtext::detection::{PrototypeClass, PrototypeDetection};
use abtext::swap::{correct_swap, find_swap_point, refine_swap, validate_marker, SwapConfig, SwapOutcome};
use abtext::synth::{gen_ideal_marker, gen_swap_scene};

fn main() -> abtext::Result<()> {
    let cfg = SwapConfig::default();

    let (marker, truth) = gen_ideal_marker(120, 36, 3, 57, 7)?;
    let v = validate_marker(&marker, &cfg)?;
    println!(
        "ideal marker: valid={} x_peaks={} y_peaks={} max_gap={}",
        v.valid, v.x_peaks, v.y_peaks, v.max_gap
    );
    let found = find_swap_point(&marker, cfg.smooth_window)?;
    println!("swap point: found {found}, drawn at {}", truth.crossing_x);

    let scene = gen_swap_scene(11)?;
    let mask = scene.marker.crop(&scene.ground_truth)?;
    let det = PrototypeDetection::new(scene.ground_truth, PrototypeClass::TypeI, 0.9, Some(mask))?;
    let dims = scene.image.dimensions();
    match refine_swap(&det, &scene.chars, &cfg, Some(dims))? {
        SwapOutcome::Accepted(r) => {
            println!(
                "accepted: mask box {:?} -> adjusted {:?}, swap column {}",
                r.mask_box,
                r.adjusted_box,
                r.swap_column()
            );
            let b = r.adjusted_box;
            let crop = image::imageops::crop_imm(&scene.image, b.x, b.y, b.w, b.h).to_image();
            let fixed = correct_swap(&crop, r.swap_x)?;
            let back = correct_swap(&fixed, b.w - r.swap_x)?;
            println!("corrected crop {}x{}, swapping back restores it: {}", fixed.width(), fixed.height(), back == crop);
        }
        SwapOutcome::Rejected(v) => println!("rejected: {v:?}"),
    }
    Ok(())
}
