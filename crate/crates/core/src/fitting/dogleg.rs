//! Powell's dogleg trust-region method for nonlinear least squares,
//! minimizing `|r(x)|^2` over a Gauss-Newton model.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    /// Residual vector at `x`, or `None` when `x` lies outside the domain.
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoglegOptions {
    pub max_iterations: usize,
    /// Stop when `|J^T r|_inf` falls below this.
    pub gtol: f64,
    /// Stop when the proposed step is shorter than this.
    pub steptol: f64,
    pub initial_radius: f64,
    /// Minimum actual/predicted reduction ratio for accepting a step.
    pub accept_ratio: f64,
}

impl Default for DoglegOptions {
    fn default() -> Self {
        DoglegOptions {
            max_iterations: 200,
            gtol: 1e-8,
            steptol: 1e-10,
            initial_radius: 1.0,
            accept_ratio: 0.05,
        }
    }
}

impl DoglegOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gtol >= 0.0
            && self.steptol >= 0.0
            && self.initial_radius > 0.0
            && self.initial_radius.is_finite()
            && (0.0..1.0).contains(&self.accept_ratio);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    StepSize,
    MaxIterations,
    /// The model predicted no decrease for a nonzero step (numerical floor).
    NoPredictedDecrease,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Objective after the iteration (unchanged when the step was rejected).
    pub objective: f64,
    /// Trust radius the step was computed with.
    pub radius: f64,
    pub step_norm: f64,
    pub rho: f64,
    pub accepted: bool,
    /// Whether the Gauss-Newton system was solvable.
    pub gauss_newton: bool,
}

#[derive(Clone, Debug)]
pub struct DoglegReport {
    pub x: DVector<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub trace: Vec<IterationRecord>,
    /// Parameters after every accepted step.
    pub accepted_points: Vec<DVector<f64>>,
    pub termination: Termination,
}

impl DoglegReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn check_finite(j: &DMatrix<f64>, iteration: usize) -> Result<()> {
    if j.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteJacobian { iteration })
    }
}

/// The dogleg step for gradient `g = J^T r` within `radius`. Returns the
/// step and whether the Gauss-Newton point was available.
fn dogleg_step(j: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> (DVector<f64>, bool) {
    let jg = j * g;
    let g2 = g.norm_squared();
    let jg2 = jg.norm_squared();
    let cauchy = if jg2 > 0.0 { -g * (g2 / jg2) } else { -g * (radius / g.norm()) };
    let gn = Cholesky::new(j.transpose() * j).map(|ch| -ch.solve(g)).filter(|p| p.iter().all(|v| v.is_finite()));
    let Some(gn) = gn else {
        // rank-deficient: constrained steepest descent
        let n = cauchy.norm();
        let step = if n > radius { cauchy * (radius / n) } else { cauchy };
        return (step, false);
    };
    if gn.norm() <= radius {
        return (gn, true);
    }
    let cn = cauchy.norm();
    if cn >= radius {
        return (cauchy * (radius / cn), true);
    }
    // |cauchy + tau (gn - cauchy)| = radius, tau in [0, 1]
    let d = &gn - &cauchy;
    let a = d.norm_squared();
    let b = 2.0 * cauchy.dot(&d);
    let c = cn * cn - radius * radius;
    let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    (cauchy + d * tau, true)
}

pub fn solve_dogleg<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    options: &DoglegOptions,
) -> Result<DoglegReport> {
    options.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial parameters must be finite".into()));
    }
    let mut x = x0;
    let mut r = problem
        .residuals(&x)
        .ok_or_else(|| Error::Domain("initial parameters outside the problem domain".into()))?;
    let mut f = r.norm_squared();
    let initial_objective = f;
    let mut j = problem.jacobian(&x);
    check_finite(&j, 0)?;
    let mut radius = options.initial_radius;
    let mut trace = Vec::new();
    let mut accepted_points = Vec::new();
    let mut termination = Termination::MaxIterations;

    for iteration in 0..options.max_iterations {
        let g = j.transpose() * &r;
        if g.amax() < options.gtol {
            termination = Termination::Gradient;
            break;
        }
        let (step, gauss_newton) = dogleg_step(&j, &g, radius);
        let step_norm = step.norm();
        if step_norm < options.steptol {
            termination = Termination::StepSize;
            break;
        }
        let model = (&r + &j * &step).norm_squared();
        let predicted = f - model;
        if !(predicted > 0.0) {
            termination = Termination::NoPredictedDecrease;
            break;
        }
        let candidate = &x + &step;
        let trial = problem.residuals(&candidate);
        let f_new = trial.as_ref().map_or(f64::INFINITY, |t| t.norm_squared());
        let rho = if f_new.is_finite() { (f - f_new) / predicted } else { f64::NEG_INFINITY };
        let accepted = rho > options.accept_ratio;
        let used_radius = radius;
        if rho < 0.25 {
            radius /= 4.0;
        } else if rho > 0.75 && step_norm >= 0.999 * radius {
            radius *= 2.0;
        }
        if accepted {
            x = candidate;
            r = trial.expect("accepted steps have residuals");
            f = f_new;
            j = problem.jacobian(&x);
            check_finite(&j, iteration + 1)?;
            accepted_points.push(x.clone());
        }
        trace.push(IterationRecord {
            objective: f,
            radius: used_radius,
            step_norm,
            rho,
            accepted,
            gauss_newton,
        });
    }
    Ok(DoglegReport {
        x,
        objective: f,
        initial_objective,
        trace,
        accepted_points,
        termination,
    })
}
