use nalgebra::Vector3;

use super::{Detections2D, Joints3DTarget, LossWeights};
use crate::camera::{project, rodrigues, Projected2D, ViewParams};
use crate::error::{check_len, Error, Result};
use crate::hand_model::{pose_hand, HandParams, ModelConstants, PosedHand};
use crate::segmentation::HandMask;

/// L1 distance between projected keypoints and detections, over joints
/// with nonzero confidence.
pub fn loss_2d(projected: &Projected2D, target: &Detections2D) -> Result<f64> {
    check_len("projected keypoints", target.len(), projected.points.len())?;
    Ok(projected
        .points
        .iter()
        .zip(&target.points)
        .zip(&target.confidence)
        .filter(|(_, &p)| p > 0.0)
        .map(|((a, b), _)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs())
        .sum())
}

/// Squared Euclidean error of the globally rotated joints.
pub fn loss_3d(posed: &PosedHand, view_rot: &[f64; 3], target: &Joints3DTarget) -> Result<f64> {
    check_len("3D target joints", posed.joints.len(), target.points.len())?;
    check_len("3D presence flags", target.points.len(), target.present.len())?;
    let r = rodrigues(view_rot);
    Ok(posed
        .joints
        .iter()
        .zip(&target.points)
        .zip(&target.present)
        .filter(|(_, &present)| present)
        .map(|((j, x), _)| (r * Vector3::from_column_slice(j) - Vector3::from_column_slice(x)).norm_squared())
        .sum())
}

/// `|theta|^2 + alpha_beta |beta|^2`.
pub fn loss_reg(params: &HandParams, weights: &LossWeights) -> f64 {
    let theta: f64 = params.theta.iter().map(|t| t * t).sum();
    let beta: f64 = params.beta.iter().map(|b| b * b).sum();
    theta + weights.alpha_beta * beta
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskLoss {
    pub value: f64,
    /// The mask had no hand pixel, so the loss is pinned to 1.
    pub empty_mask: bool,
}

/// One minus the fraction of vertices whose rounded pixel is inside the mask.
pub fn loss_mask(projected_vertices: &Projected2D, mask: &HandMask) -> MaskLoss {
    if mask.is_empty() || projected_vertices.points.is_empty() {
        return MaskLoss {
            value: 1.0,
            empty_mask: mask.is_empty(),
        };
    }
    let inside = projected_vertices
        .points
        .iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .filter(|p| mask.contains(p[0].round() as i64, p[1].round() as i64))
        .count();
    MaskLoss {
        value: 1.0 - inside as f64 / projected_vertices.points.len() as f64,
        empty_mask: false,
    }
}

/// Supervision available for one sample; any subset may be present.
#[derive(Clone, Debug, Default)]
pub struct LossTargets<'a> {
    pub detections: Option<&'a Detections2D>,
    pub joints3d: Option<&'a Joints3DTarget>,
    pub mask: Option<&'a HandMask>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l2d: f64,
    pub l3d: f64,
    pub lmask: f64,
    pub lreg: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(l2d: f64, l3d: f64, lmask: f64, lreg: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            l2d,
            l3d,
            lmask,
            lreg,
            total: l2d + w.alpha_3d * l3d + w.alpha_mask * lmask + w.alpha_reg * lreg,
        }
    }
}

/// Weighted sum of the four losses; absent targets contribute zero.
pub fn total_loss(
    params: &HandParams,
    view: &ViewParams,
    targets: &LossTargets<'_>,
    weights: &LossWeights,
    c: &ModelConstants,
) -> Result<LossBreakdown> {
    if targets.detections.is_none() && targets.joints3d.is_none() && targets.mask.is_none() {
        return Err(Error::Contract("total_loss needs at least one supervision target".into()));
    }
    weights.validate()?;
    let posed = pose_hand(params, c)?;
    let l2d = match targets.detections {
        Some(d) => loss_2d(&project(&posed.joints, view)?, d)?,
        None => 0.0,
    };
    let l3d = match targets.joints3d {
        Some(t) => loss_3d(&posed, &view.rot, t)?,
        None => 0.0,
    };
    let lmask = match targets.mask {
        Some(m) => loss_mask(&project(&posed.vertices, view)?, m).value,
        None => 0.0,
    };
    Ok(LossBreakdown::combine(l2d, l3d, lmask, loss_reg(params, weights), weights))
}
