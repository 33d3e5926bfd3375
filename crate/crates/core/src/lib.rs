//! Woven-composite textile modeling pipeline: synthetic interlock textiles,
//! voxel label volumes, pseudo-CT rendering, keypoint-based per-slice yarn
//! extraction, reconstruction into meshed yarns and quantitative validation.

// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fsio;
pub mod geometry;
pub mod par;
pub mod pipeline;
pub mod reconstruct;
pub mod seeds;
pub mod segmenter;
pub mod synthgen;
pub mod validate;
pub mod voxelizer;

pub use error::{Error, Result};
