//! Second-stage refinement of abnormal-text detections in handwritten text
//! lines.
//!
//! A first-stage detector proposes structure prototypes: type I swap
//! markers (with a mask) and type II to IV text overlaps. This crate checks
//! each proposal against the geometry it should have, rejects those that do
//! not fit, and tightens the boxes of those that do:
//!
//! - [`swap`] validates marker masks by their projection profiles, snaps and
//!   grows the box, and finds the swap column;
//! - [`overlap`] splits the characters around an overlap prototype into the
//!   main line and the overlapping group and derives the final box;
//! - [`augment`] builds training samples (scale expansion, location shift,
//!   contrast composites) and the mask cross-entropy;
//! - [`eval`] scores predictions with greedy IoU matching;
//! - [`synth`] generates seeded scenes with known ground truth;
//! - [`pipeline`] wires everything to files for batch runs.

pub mod augment;
pub mod detection;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod mask;
pub mod overlap;
pub mod pipeline;
pub mod swap;
pub mod synth;

pub use detection::{PrototypeClass, PrototypeDetection};
pub use error::{Error, Result};
pub use geometry::{BBox, Point};
pub use mask::{BinaryMask, ProbabilityMap};
