//! Keypoint metrics (PCK curves, mean joint distance) and the evaluation
//! preprocessing: root alignment, detector-box crops and left-hand flips.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hand_model::{self, ModelConstants, PosedHand};

pub const CROP_FACTOR: f64 = 2.2;
pub const CROP_SIZE: f64 = 320.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    /// Area under the curve normalized by the threshold range.
    pub auc: f64,
}

/// Default 3D thresholds: 20 to 50 mm in 1 mm steps.
pub fn default_thresholds_3d() -> Vec<f64> {
    (20..=50).map(f64::from).collect()
}

/// Default 2D thresholds: 0 to 30 px in 1 px steps.
pub fn default_thresholds_2d() -> Vec<f64> {
    (0..=30).map(f64::from).collect()
}

fn distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-joint Euclidean errors over joints flagged present (all when
/// `present` is `None`).
pub fn joint_errors<const D: usize>(pred: &[[f64; D]], gt: &[[f64; D]], present: Option<&[bool]>) -> Result<Vec<f64>> {
    check_len("predicted joints", gt.len(), pred.len())?;
    if let Some(p) = present {
        check_len("presence flags", gt.len(), p.len())?;
    }
    Ok(pred
        .iter()
        .zip(gt)
        .enumerate()
        .filter(|(i, _)| present.is_none_or(|p| p[*i]))
        .map(|(_, (a, b))| distance(a, b))
        .collect())
}

pub fn pck_from_errors(errors: &[f64], thresholds: &[f64]) -> Result<PckCurve> {
    if errors.is_empty() {
        return Err(Error::Contract("PCK needs at least one joint".into()));
    }
    if thresholds.is_empty() || thresholds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Contract("PCK thresholds must be non-empty and ascending".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let values: Vec<f64> = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / n)
        .collect();
    let auc = if thresholds.len() == 1 {
        values[0]
    } else {
        let span = thresholds[thresholds.len() - 1] - thresholds[0];
        let area: f64 = thresholds
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum();
        area / span
    };
    Ok(PckCurve {
        thresholds: thresholds.to_vec(),
        values,
        auc,
    })
}

/// Fraction of joints within each threshold.
pub fn pck<const D: usize>(pred: &[[f64; D]], gt: &[[f64; D]], thresholds: &[f64]) -> Result<PckCurve> {
    pck_from_errors(&joint_errors(pred, gt, None)?, thresholds)
}

pub fn mean_joint_distance<const D: usize>(pred: &[[f64; D]], gt: &[[f64; D]]) -> Result<f64> {
    let e = joint_errors(pred, gt, None)?;
    if e.is_empty() {
        return Err(Error::Contract("mean joint distance of zero joints".into()));
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Translates `pred` so its root coincides with the ground-truth root.
pub fn root_align(pred: &[[f64; 3]], gt: &[[f64; 3]], root_index: usize) -> Result<Vec<[f64; 3]>> {
    check_len("predicted joints", gt.len(), pred.len())?;
    if root_index >= gt.len() {
        return Err(Error::Contract(format!("root index {root_index} out of range")));
    }
    let shift: [f64; 3] = std::array::from_fn(|a| gt[root_index][a] - pred[root_index][a]);
    Ok(pred.iter().map(|p| std::array::from_fn(|a| p[a] + shift[a])).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub center: [f64; 2],
    /// Side of the square crop in source pixels (`2.2 l`).
    pub side: f64,
    pub output_size: f64,
}

impl CropSpec {
    fn gain(&self) -> f64 {
        self.output_size / self.side
    }

    /// Full-image pixel to crop pixel.
    pub fn to_crop(&self, p: [f64; 2]) -> [f64; 2] {
        let half = 0.5 * self.side;
        let g = self.gain();
        [(p[0] - self.center[0] + half) * g, (p[1] - self.center[1] + half) * g]
    }

    pub fn to_image(&self, p: [f64; 2]) -> [f64; 2] {
        let half = 0.5 * self.side;
        let g = self.gain();
        [p[0] / g + self.center[0] - half, p[1] / g + self.center[1] - half]
    }

    /// Top-left corner of the crop window in the full image.
    pub fn origin(&self) -> [f64; 2] {
        [self.center[0] - 0.5 * self.side, self.center[1] - 0.5 * self.side]
    }
}

/// Crop around a tight detector box of edge `edge` centred at `center`.
pub fn crop_transform(center: [f64; 2], edge: f64) -> Result<CropSpec> {
    if !(edge > 0.0) || !edge.is_finite() || center.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("crop box edge must be positive, got {edge}")));
    }
    Ok(CropSpec {
        center,
        side: CROP_FACTOR * edge,
        output_size: CROP_SIZE,
    })
}

/// Mirrors keypoints horizontally so a left hand can be fitted with the
/// right-hand model. Joint order is unchanged.
pub fn flip_left_hand(keypoints: &[[f64; 2]], image_width: usize) -> Vec<[f64; 2]> {
    let w = image_width as f64;
    keypoints.iter().map(|p| [w - 1.0 - p[0], p[1]]).collect()
}

pub fn palm_center(posed: &PosedHand, c: &ModelConstants) -> Result<[f64; 3]> {
    hand_model::palm_center(&posed.vertices, c)
}
