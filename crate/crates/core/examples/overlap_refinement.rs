//! Refine an overlap prototype box against character boxes, then show a
//! false positive anchored on a plain stretch of the same line.
//!
//! cargo run --example overlap_refinement

use abtext::detection::PrototypeClass;
use abtext::geometry::{iou, BBox};
use abtext::overlap::{refine_overlap, OverlapConfig, OverlapParams, WindowAnchor};
use abtext::synth::gen_overlap_scene;

fn main() -> abtext::Result<()> {
    let scene = gen_overlap_scene(PrototypeClass::TypeIII, 9, 2, 42)?;
    let params = OverlapParams::from_chars(&scene.chars).expect("scene has characters");
    println!(
        "gamma={:.1} alpha={:.1} beta={:.1}",
        params.gamma, params.alpha, params.beta
    );

    let r = refine_overlap(&scene.proto, &scene.chars, &params)?;
    println!("prototype {:?}: {:?}", scene.proto, r.verdict);
    println!("  main queue {} chars, overlap queue {} chars", r.q_main.len(), r.q_ov.len());
    if let Some(b) = r.final_box {
        println!("  final box {b:?}, IoU with truth {:.3}", iou(&b, &scene.ground_truth));
    }

    // a box starting on the last main-row character sees no second row
    let last = scene.main_row().last().copied().expect("main row");
    let decoy = BBox::new(last.x, last.y, last.w, last.h);
    match refine_overlap(&decoy, &scene.chars, &params) {
        Ok(r) => println!("decoy {decoy:?}: {:?} {:?}", r.verdict, r.reason),
        Err(e) => println!("decoy {decoy:?}: {e}"),
    }

    let centered = OverlapConfig {
        anchor: WindowAnchor::Center,
        ..OverlapConfig::default()
    }
    .resolve(&scene.chars)
    .expect("scene has characters");
    let r = refine_overlap(&scene.proto, &scene.chars, &centered)?;
    println!("center-anchored window: {:?} {:?}", r.verdict, r.final_box);
    Ok(())
}
