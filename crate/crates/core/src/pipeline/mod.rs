//! Batch front end: refine first-stage detections, generate augmentation
//! data and fixtures, and evaluate predictions, reading and writing files.

mod augment;
mod config;
mod eval;
mod records;
mod refine;
mod synth;

pub use augment::{cmd_augment, AugmentSummary, AUGMENT_MANIFEST};
pub use config::{parse_thresholds, AugmentParams, CharScope, FixtureKind, RunConfig, SynthParams};
pub use eval::{cmd_eval, REPORT_JSON, REPORT_TABLE};
pub use records::{
    parse_many, read_many, CharFile, DetectionFile, DetectionRecord, KeptDetection, Provenance,
    RejectReason, RejectedDetection, StageTwoOutput, SwapSplit,
};
pub use refine::{cmd_refine, PREDICTIONS_FILE, REFINED_FILE, STAGE_ONE_FILE};
pub use synth::{cmd_synth, FixtureEntry, CHARS_FILE, DETECTIONS_FILE, GT_FILE, MANIFEST_FILE};
