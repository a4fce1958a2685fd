//! End to end on disk: write synthetic fixtures, refine their stage-one
//! detections, and evaluate both stages against the fixture ground truth.
//!
//! cargo run --example pipeline_fixture [OUT_DIR]

use std::path::PathBuf;

use abtext::pipeline::{cmd_eval, cmd_refine, cmd_synth, RunConfig, DETECTIONS_FILE, CHARS_FILE, GT_FILE, PREDICTIONS_FILE, STAGE_ONE_FILE};

fn main() -> abtext::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("abtext_pipeline_fixture"));
    let fixtures = root.join("fixtures");

    let mut cfg = RunConfig::default();
    cfg.out = fixtures.clone();
    cfg.seed = 7;
    cfg.synth.fixtures = 8;
    let entries = cmd_synth(&cfg)?;
    let fps: usize = entries.iter().map(|e| e.false_positives.len()).sum();
    println!("{} fixtures with {fps} injected false positives in {}", entries.len(), fixtures.display());

    let mut cfg = RunConfig::default();
    cfg.detections = Some(fixtures.join(DETECTIONS_FILE));
    cfg.chars = Some(fixtures.join(CHARS_FILE));
    cfg.images = Some(fixtures.join("images"));
    cfg.out = root.join("refined");
    let outputs = cmd_refine(&cfg)?;
    let kept: usize = outputs.iter().map(|o| o.kept.len()).sum();
    let rejected: usize = outputs.iter().map(|o| o.rejected.len()).sum();
    println!("refine: kept {kept}, rejected {rejected}");

    for (label, preds) in [("stage one", STAGE_ONE_FILE), ("refined", PREDICTIONS_FILE)] {
        let mut cfg = RunConfig::default();
        cfg.detections = Some(root.join("refined").join(preds));
        cfg.gt = Some(fixtures.join(GT_FILE));
        cfg.out = root.join("eval").join(label.replace(' ', "_"));
        let (_, table) = cmd_eval(&cfg)?;
        println!("\n{label}:\n{table}");
    }
    Ok(())
}
