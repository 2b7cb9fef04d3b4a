//! Model-based hand pose toolkit: an articulated skinned hand mesh with
//! corrective blend shapes and a PCA pose space, weak-perspective
//! re-projection, supervision losses, a dogleg fitter for 2D keypoint
//! detections, GrabCut-based hand masks, a synthetic data sampler, and
//! PCK-style evaluation.

pub mod camera;
pub mod error;
pub mod evaluation;
pub mod fitting;
pub mod hand_model;
pub mod model_io;
pub mod obj;
pub mod scalar;
pub mod segmentation;
pub mod synth;

pub use camera::{project, project_jacobian, rodrigues, Projected2D, ViewParams};
pub use error::{Error, Result};
pub use hand_model::{pose_hand, pose_hand_jacobian, HandParams, ModelConstants, PosedHand};
