//! Supervision losses, the confidence-weighted 2D fitting objective and the
//! trust-region solver that minimizes it.

pub mod dogleg;
pub mod losses;
pub mod objective;

pub use dogleg::{solve_dogleg, DoglegOptions, DoglegReport, IterationRecord, LeastSquaresProblem, Termination};
pub use losses::{loss_2d, loss_3d, loss_mask, loss_reg, total_loss, LossBreakdown, LossTargets, MaskLoss};
pub use objective::{
    fit_detections, fit_objective_residuals, init_view, objective_terms, objective_value, pack_params, reprojection_rmse,
    unpack_params, Fit2dProblem,
    FitOptions, FitReport, FitWeights, Residuals,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D keypoint detections with per-joint confidences in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detections2D {
    pub points: Vec<[f64; 2]>,
    pub confidence: Vec<f64>,
}

impl Detections2D {
    /// Validates finiteness and clamps confidences into `[0, 1]`.
    pub fn new(points: Vec<[f64; 2]>, confidence: Vec<f64>) -> Result<Self> {
        if points.len() != confidence.len() {
            return Err(Error::Dimension {
                what: "detection confidences",
                expected: points.len(),
                got: confidence.len(),
            });
        }
        if points.iter().flatten().chain(&confidence).any(|v| !v.is_finite()) {
            return Err(Error::Domain("detections must be finite".into()));
        }
        let confidence = confidence.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Detections2D { points, confidence })
    }

    pub fn with_unit_confidence(points: Vec<[f64; 2]>) -> Self {
        let confidence = vec![1.0; points.len()];
        Detections2D { points, confidence }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ground-truth 3D joints; joints without annotation are flagged absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joints3DTarget {
    pub points: Vec<[f64; 3]>,
    pub present: Vec<bool>,
}

impl Joints3DTarget {
    pub fn complete(points: Vec<[f64; 3]>) -> Self {
        let present = vec![true; points.len()];
        Joints3DTarget { points, present }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha_3d: f64,
    pub alpha_mask: f64,
    pub alpha_reg: f64,
    pub alpha_beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha_3d: 1e2,
            alpha_mask: 1e2,
            alpha_reg: 1e1,
            alpha_beta: 1e4,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha_3d, self.alpha_mask, self.alpha_reg, self.alpha_beta];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("loss weights must be finite and >= 0: {w:?}")));
        }
        Ok(())
    }
}
