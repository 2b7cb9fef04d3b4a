//! Confidence-weighted 2D keypoint fitting:
//!
//! `E = sum_i p_i |s Pi(R J_i) + t - x_i|^2 + alpha_beta |beta|^2 + alpha_theta |theta|^2`
//!
//! written as least squares by stacking `sqrt(p_i)`-weighted reprojection
//! residuals, `sqrt(alpha_beta) beta` and `sqrt(alpha_theta) theta`.
//! Parameters are packed as `[rot(3), trans(2), scale, beta, theta]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dogleg::{solve_dogleg, DoglegOptions, IterationRecord, LeastSquaresProblem, Termination};
use super::Detections2D;
use crate::camera::{project, project_jacobian, ViewParams};
use crate::error::{check_len, Error, Result};
use crate::hand_model::{pose_hand_jacobian, pose_keypoints, HandParams, ModelConstants};

pub const VIEW_DOF: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitWeights {
    pub alpha_beta: f64,
    /// Weight of the pose prior; 1 in the plain objective.
    pub alpha_theta: f64,
}

impl Default for FitWeights {
    fn default() -> Self {
        FitWeights {
            alpha_beta: 1e4,
            alpha_theta: 1.0,
        }
    }
}

pub fn pack_params(view: &ViewParams, hand: &HandParams) -> DVector<f64> {
    let mut v = Vec::with_capacity(VIEW_DOF + hand.beta.len() + hand.theta.len());
    v.extend_from_slice(&view.rot);
    v.extend_from_slice(&view.trans);
    v.push(view.scale);
    v.extend_from_slice(&hand.beta);
    v.extend_from_slice(&hand.theta);
    DVector::from_vec(v)
}

pub fn unpack_params(x: &DVector<f64>, n_shape: usize, n_pose: usize) -> (ViewParams, HandParams) {
    assert_eq!(x.len(), VIEW_DOF + n_shape + n_pose);
    let view = ViewParams {
        rot: [x[0], x[1], x[2]],
        trans: [x[3], x[4]],
        scale: x[5],
    };
    let hand = HandParams {
        beta: x.rows(VIEW_DOF, n_shape).iter().copied().collect(),
        theta: x.rows(VIEW_DOF + n_shape, n_pose).iter().copied().collect(),
    };
    (view, hand)
}

#[derive(Clone, Debug)]
pub struct Residuals {
    pub values: DVector<f64>,
    /// Derivatives with respect to the packed parameter vector.
    pub jacobian: DMatrix<f64>,
}

fn residual_values(
    keypoints: &[[f64; 3]],
    view: &ViewParams,
    params: &HandParams,
    detections: &Detections2D,
    weights: &FitWeights,
) -> Result<DVector<f64>> {
    check_len("detections", keypoints.len(), detections.len())?;
    let proj = project(keypoints, view)?;
    let n = keypoints.len();
    let mut r = DVector::zeros(2 * n + params.beta.len() + params.theta.len());
    for (i, ((x, d), p)) in proj.points.iter().zip(&detections.points).zip(&detections.confidence).enumerate() {
        let w = p.sqrt();
        r[2 * i] = w * (x[0] - d[0]);
        r[2 * i + 1] = w * (x[1] - d[1]);
    }
    let sb = weights.alpha_beta.sqrt();
    let st = weights.alpha_theta.sqrt();
    for (k, b) in params.beta.iter().enumerate() {
        r[2 * n + k] = sb * b;
    }
    for (k, t) in params.theta.iter().enumerate() {
        r[2 * n + params.beta.len() + k] = st * t;
    }
    Ok(r)
}

/// Residual vector (with `|r|^2 = E`) and its Jacobian.
pub fn fit_objective_residuals(
    view: &ViewParams,
    params: &HandParams,
    detections: &Detections2D,
    weights: &FitWeights,
    c: &ModelConstants,
) -> Result<Residuals> {
    let kj = pose_hand_jacobian(params, c)?;
    let values = residual_values(&pose_keypoints(params, c)?, view, params, detections, weights)?;
    let proj_jac = project_jacobian(&kj.keypoints, &kj.jacobian, view)?;
    let n = kj.keypoints.len();
    let (ns, np) = (params.beta.len(), params.theta.len());
    let mut jacobian = DMatrix::zeros(values.len(), VIEW_DOF + ns + np);
    for i in 0..n {
        let w = detections.confidence[i].sqrt();
        for a in 0..2 {
            for col in 0..jacobian.ncols() {
                jacobian[(2 * i + a, col)] = w * proj_jac[(2 * i + a, col)];
            }
        }
    }
    let sb = weights.alpha_beta.sqrt();
    let st = weights.alpha_theta.sqrt();
    for k in 0..ns {
        jacobian[(2 * n + k, VIEW_DOF + k)] = sb;
    }
    for k in 0..np {
        jacobian[(2 * n + ns + k, VIEW_DOF + ns + k)] = st;
    }
    Ok(Residuals { values, jacobian })
}

/// Objective terms `(data, beta prior, theta prior)` evaluated directly.
pub fn objective_terms(
    view: &ViewParams,
    params: &HandParams,
    detections: &Detections2D,
    weights: &FitWeights,
    c: &ModelConstants,
) -> Result<(f64, f64, f64)> {
    let kp = pose_keypoints(params, c)?;
    check_len("detections", kp.len(), detections.len())?;
    let proj = project(&kp, view)?;
    let data = proj
        .points
        .iter()
        .zip(&detections.points)
        .zip(&detections.confidence)
        .map(|((x, d), p)| p * ((x[0] - d[0]).powi(2) + (x[1] - d[1]).powi(2)))
        .sum();
    let beta = weights.alpha_beta * params.beta.iter().map(|b| b * b).sum::<f64>();
    let theta = weights.alpha_theta * params.theta.iter().map(|t| t * t).sum::<f64>();
    Ok((data, beta, theta))
}

pub fn objective_value(
    view: &ViewParams,
    params: &HandParams,
    detections: &Detections2D,
    weights: &FitWeights,
    c: &ModelConstants,
) -> Result<f64> {
    let (d, b, t) = objective_terms(view, params, detections, weights, c)?;
    Ok(d + b + t)
}

/// Root-mean-square reprojection distance over joints with nonzero confidence.
pub fn reprojection_rmse(keypoints: &[[f64; 3]], view: &ViewParams, detections: &Detections2D) -> Result<f64> {
    check_len("detections", keypoints.len(), detections.len())?;
    let proj = project(keypoints, view)?;
    let (sum, n) = proj
        .points
        .iter()
        .zip(&detections.points)
        .zip(&detections.confidence)
        .filter(|(_, &p)| p > 0.0)
        .fold((0.0, 0usize), |(s, n), ((x, d), _)| {
            (s + (x[0] - d[0]).powi(2) + (x[1] - d[1]).powi(2), n + 1)
        });
    if n == 0 {
        return Err(Error::Contract("no joint with positive confidence".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Least-squares view of the objective. With `frozen_hand` set, only the
/// six view parameters are free.
pub struct Fit2dProblem<'a> {
    pub constants: &'a ModelConstants,
    pub detections: &'a Detections2D,
    pub weights: FitWeights,
    pub frozen_hand: Option<HandParams>,
}

impl Fit2dProblem<'_> {
    fn split(&self, x: &DVector<f64>) -> (ViewParams, HandParams) {
        match &self.frozen_hand {
            Some(hand) => (
                ViewParams {
                    rot: [x[0], x[1], x[2]],
                    trans: [x[3], x[4]],
                    scale: x[5],
                },
                hand.clone(),
            ),
            None => unpack_params(x, self.constants.n_shape(), self.constants.n_pose()),
        }
    }
}

impl LeastSquaresProblem for Fit2dProblem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let (view, hand) = self.split(x);
        if !(view.scale > 0.0) {
            return None;
        }
        let kp = pose_keypoints(&hand, self.constants).ok()?;
        residual_values(&kp, &view, &hand, self.detections, &self.weights).ok()
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (view, hand) = self.split(x);
        match fit_objective_residuals(&view, &hand, self.detections, &self.weights, self.constants) {
            Ok(res) if self.frozen_hand.is_some() => res.jacobian.columns(0, VIEW_DOF).into_owned(),
            Ok(res) => res.jacobian,
            // surfaces as a non-finite Jacobian error in the solver
            Err(_) => DMatrix::from_element(1, x.len(), f64::NAN),
        }
    }
}

/// Weak-perspective initialization from the bounding boxes and centroids of
/// the confident detections and the matching rest-pose keypoints.
pub fn init_view(detections: &Detections2D, rest_keypoints: &[[f64; 3]]) -> Result<ViewParams> {
    check_len("rest keypoints", detections.len(), rest_keypoints.len())?;
    let used: Vec<usize> = (0..detections.len()).filter(|&i| detections.confidence[i] > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::Init(format!(
            "need at least 3 joints with positive confidence, got {}",
            used.len()
        )));
    }
    let bbox_diag = |pts: &mut dyn Iterator<Item = [f64; 2]>| {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut sum = [0.0; 2];
        let mut n = 0.0;
        for p in pts {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
                sum[a] += p[a];
            }
            n += 1.0;
        }
        ((hi[0] - lo[0]).hypot(hi[1] - lo[1]), [sum[0] / n, sum[1] / n])
    };
    let (det_diag, det_c) = bbox_diag(&mut used.iter().map(|&i| detections.points[i]));
    let (rest_diag, rest_c) = bbox_diag(&mut used.iter().map(|&i| [rest_keypoints[i][0], rest_keypoints[i][1]]));
    if !(det_diag > 0.0) || !(rest_diag > 0.0) {
        return Err(Error::Init("degenerate bounding box".into()));
    }
    let scale = det_diag / rest_diag;
    Ok(ViewParams {
        rot: [0.0; 3],
        trans: [det_c[0] - scale * rest_c[0], det_c[1] - scale * rest_c[1]],
        scale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub solver: DoglegOptions,
    pub weights: FitWeights,
    /// Fit the view alone before releasing shape and pose.
    pub two_stage: bool,
    pub rigid_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: DoglegOptions::default(),
            weights: FitWeights::default(),
            two_stage: true,
            rigid_iterations: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub view: ViewParams,
    pub hand: HandParams,
    pub objective: f64,
    pub data_term: f64,
    pub beta_term: f64,
    pub theta_term: f64,
    pub reprojection_rmse: f64,
    /// Iterations of both stages, in order.
    pub trace: Vec<IterationRecord>,
    /// Packed parameters after each accepted step of either stage.
    pub accepted_points: Vec<DVector<f64>>,
    pub termination: Termination,
}

impl FitReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

pub fn fit_detections(
    c: &ModelConstants,
    detections: &Detections2D,
    init: Option<(ViewParams, HandParams)>,
    options: &FitOptions,
) -> Result<FitReport> {
    check_len("detections", c.n_keypoints(), detections.len())?;
    let (mut view, mut hand) = match init {
        Some((v, h)) => {
            h.check(c)?;
            v.validate()?;
            (v, h)
        }
        None => {
            let rest = pose_keypoints(&HandParams::zeros(c.n_shape(), c.n_pose()), c)?;
            (init_view(detections, &rest)?, HandParams::zeros(c.n_shape(), c.n_pose()))
        }
    };
    let mut trace = Vec::new();
    let mut accepted_points = Vec::new();
    if options.two_stage && options.rigid_iterations > 0 {
        let rigid = Fit2dProblem {
            constants: c,
            detections,
            weights: options.weights,
            frozen_hand: Some(hand.clone()),
        };
        let solver = DoglegOptions {
            max_iterations: options.rigid_iterations,
            ..options.solver.clone()
        };
        let x0 = pack_params(&view, &HandParams::zeros(0, 0));
        let rep = solve_dogleg(&rigid, x0, &solver)?;
        view = ViewParams {
            rot: [rep.x[0], rep.x[1], rep.x[2]],
            trans: [rep.x[3], rep.x[4]],
            scale: rep.x[5],
        };
        trace.extend(rep.trace);
        for p in rep.accepted_points {
            let v = ViewParams {
                rot: [p[0], p[1], p[2]],
                trans: [p[3], p[4]],
                scale: p[5],
            };
            accepted_points.push(pack_params(&v, &hand));
        }
    }
    let full = Fit2dProblem {
        constants: c,
        detections,
        weights: options.weights,
        frozen_hand: None,
    };
    let rep = solve_dogleg(&full, pack_params(&view, &hand), &options.solver)?;
    (view, hand) = unpack_params(&rep.x, c.n_shape(), c.n_pose());
    trace.extend(rep.trace);
    accepted_points.extend(rep.accepted_points);
    let (data_term, beta_term, theta_term) = objective_terms(&view, &hand, detections, &options.weights, c)?;
    let kp = pose_keypoints(&hand, c)?;
    let reprojection_rmse = reprojection_rmse(&kp, &view, detections)?;
    Ok(FitReport {
        view,
        hand,
        objective: data_term + beta_term + theta_term,
        data_term,
        beta_term,
        theta_term,
        reprojection_rmse,
        trace,
        accepted_points,
        termination: rep.termination,
    })
}
