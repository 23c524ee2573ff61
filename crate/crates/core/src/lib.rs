//! Reconcile two candidate binary segmentation masks of an RGB image.
//!
//! Pixels where both masks agree are taken as fixed foreground/background
//! evidence. Per-patch Gaussian mixtures fitted on that evidence give every
//! pixel a foreground probability, and an exact min-cut solve of a binary
//! energy (intensity agreement plus colour-weighted smoothness) decides the
//! pixels where the masks disagree.
//!
//! Module map:
//! - [`imgio`]: PNG / PFM / box-list / config formats
//! - [`gmm`]: 3-D Gaussian mixtures fitted by EM
//! - [`probmap`]: per-patch foreground probability map
//! - [`energy`]: the binary program, its min-cut solver and brute-force oracle
//! - [`weakloss`]: box-supervision loss evaluators (MIL bags, projection, pairwise)
//! - [`metrics`]: Dice / precision / recall and mask-to-box conversion
//! - [`cli`]: the `mask-reconcile` command line

pub mod cli;
pub mod energy;
mod error;
pub mod exec;
pub mod gmm;
pub mod imgio;
pub mod metrics;
pub mod probmap;
pub mod synth;
pub mod weakloss;

pub use error::{Error, Result};
pub use exec::Execution;
pub use imgio::{BBox, BBoxList, BinaryMask, PipelineConfig, ProbMap, RgbImage, SolverKind};
