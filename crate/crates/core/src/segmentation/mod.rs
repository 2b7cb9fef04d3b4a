//! Occlusion-aware hand mask generation from 2D joints.

pub mod grabcut;
pub mod mask;
pub mod maxflow;
pub mod raster;
pub mod trimap;

pub use grabcut::{grabcut, GrabCutOptions, GrabCutResult};
pub use mask::HandMask;
pub use maxflow::{FlowGraph, MaxFlowResult};
pub use trimap::{build_trimap, build_trimap_with_band, HandTopology, Trimap, TrimapLabel, UNDECIDED_BAND_PX};

use image::RgbImage;

use crate::error::Result;

/// Trimap from the joints followed by GrabCut refinement.
pub fn hand_mask_from_joints(
    image: &RgbImage,
    joints2d: &[[f64; 2]],
    topology: &HandTopology,
    options: &GrabCutOptions,
) -> Result<GrabCutResult> {
    let trimap = build_trimap(joints2d, topology, image.width() as usize, image.height() as usize)?;
    grabcut(image, &trimap, options)
}
