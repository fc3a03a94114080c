//! Multi-object tracking for high-resolution video built around cheap sparse
//! optical-flow propagation interleaved with scheduled window re-detection.
//!
//! The crate is organised as:
//! - [`model`]: shared raster/geometry/track types and the pipeline configuration
//! - [`vision`]: grayscale, image pyramids, Harris scoring, pyramidal Lucas-Kanade
//! - [`slicer`]: window grid slicing, priority classification and probe scheduling
//! - [`detector`]: detector contract, ground-truth oracle and external process client
//! - [`assoc`]: detection/tracklet association, confidence and lifecycle
//! - [`pipeline`]: per-frame orchestration
//! - [`metrics`]: CLEAR-MOT (MOTA) and IDF1 evaluation
//! - [`synth`]: deterministic synthetic sequences with exact ground truth
//! - [`mot`]: MOTChallenge-style CSV and mask sidecar I/O

pub mod assoc;
pub mod detector;
pub mod metrics;
pub mod model;
pub mod mot;
pub mod pipeline;
pub mod rng;
pub mod slicer;
pub mod synth;
pub mod vision;
