//! Weak-perspective camera: `x = s * Pi(R p) + t`, with `Pi` dropping depth.
//!
//! Image coordinates follow pixel annotations: x to the right, y down,
//! origin at the top-left corner.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Below this rotation angle the closed-form Rodrigues terms are replaced
/// by their Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewParams {
    /// Global rotation as an axis-angle vector (radians times unit axis).
    pub rot: [f64; 3],
    /// Image-plane translation in pixels.
    pub trans: [f64; 2],
    /// Pixels per model unit.
    pub scale: f64,
}

impl Default for ViewParams {
    fn default() -> Self {
        ViewParams {
            rot: [0.0; 3],
            trans: [0.0; 2],
            scale: 1.0,
        }
    }
}

impl ViewParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.rot.iter().chain(&self.trans).all(|v| v.is_finite());
        if !finite || !self.scale.is_finite() {
            return Err(Error::Domain("view parameters must be finite".into()));
        }
        if self.scale <= 0.0 {
            return Err(Error::Domain(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rodrigues(&self.rot)
    }
}

/// Projected image points, one `[u, v]` pair per input point.
#[derive(Clone, Debug, PartialEq)]
pub struct Projected2D {
    pub points: Vec<[f64; 2]>,
}

pub(crate) fn skew<S: Scalar>(w: &[S; 3]) -> [[S; 3]; 3] {
    let z = S::zero();
    [
        [z.clone(), -w[2].clone(), w[1].clone()],
        [w[2].clone(), z.clone(), -w[0].clone()],
        [-w[1].clone(), w[0].clone(), z],
    ]
}

/// Rotation matrix of an axis-angle vector, generic over the scalar type.
pub(crate) fn rodrigues_generic<S: Scalar>(w: &[S; 3]) -> [[S; 3]; 3] {
    let sq = w[0].clone() * w[0].clone() + w[1].clone() * w[1].clone() + w[2].clone() * w[2].clone();
    let k = skew(w);
    let angle_value = sq.value().sqrt();
    // R = I + a K + b K^2
    let (a, b) = if angle_value < SMALL_ANGLE {
        (S::constant(1.0), S::constant(0.5))
    } else {
        let angle = sq.sqrt();
        let a = angle.sin() / angle.clone();
        let b = (S::constant(1.0) - angle.cos()) / sq;
        (a, b)
    };
    let mut r: [[S; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| S::constant(if i == j { 1.0 } else { 0.0 }))
    });
    for i in 0..3 {
        for j in 0..3 {
            let mut k2 = S::zero();
            for m in 0..3 {
                k2 = k2 + k[i][m].clone() * k[m][j].clone();
            }
            r[i][j] = r[i][j].clone() + a.clone() * k[i][j].clone() + b.clone() * k2;
        }
    }
    r
}

pub fn rodrigues(axis_angle: &[f64; 3]) -> Matrix3<f64> {
    let r = rodrigues_generic(axis_angle);
    Matrix3::from_fn(|i, j| r[i][j])
}

/// Derivative of `R(w) p` with respect to `w`, as a 3x3 matrix whose column
/// `k` is `d(R p)/d w_k`.
pub fn rotate_point_jacobian(axis_angle: &[f64; 3], p: &Vector3<f64>) -> Matrix3<f64> {
    let w = Vector3::from_column_slice(axis_angle);
    let sq = w.norm_squared();
    let p_skew = p.cross_matrix();
    if sq.sqrt() < SMALL_ANGLE {
        // R ~ I + [w]x, so R p ~ p - [p]x w
        return -p_skew;
    }
    let r = rodrigues(axis_angle);
    let w_skew = w.cross_matrix();
    -r * p_skew * (w * w.transpose() + (r.transpose() - Matrix3::identity()) * w_skew) / sq
}

pub fn project(points3d: &[[f64; 3]], view: &ViewParams) -> Result<Projected2D> {
    view.validate()?;
    let r = view.rotation();
    let points = points3d
        .iter()
        .map(|p| {
            let q = r * Vector3::from_column_slice(p);
            [
                view.scale * q.x + view.trans[0],
                view.scale * q.y + view.trans[1],
            ]
        })
        .collect();
    Ok(Projected2D { points })
}

/// Jacobian of all projected coordinates with respect to
/// `(rot[3], trans[2], scale, model params...)`.
///
/// `point_jacobians` is the `(3n) x m` Jacobian of the 3D points with respect
/// to the model parameters; the result is `(2n) x (6 + m)`, rows ordered
/// `u0, v0, u1, v1, ...`.
pub fn project_jacobian(
    points3d: &[[f64; 3]],
    point_jacobians: &DMatrix<f64>,
    view: &ViewParams,
) -> Result<DMatrix<f64>> {
    view.validate()?;
    let n = points3d.len();
    check_len("point Jacobian rows", 3 * n, point_jacobians.nrows())?;
    let m = point_jacobians.ncols();
    let r = view.rotation();
    let s = view.scale;
    let mut jac = DMatrix::zeros(2 * n, 6 + m);
    for (i, p) in points3d.iter().enumerate() {
        let p = Vector3::from_column_slice(p);
        let rp = r * p;
        let drot = rotate_point_jacobian(&view.rot, &p);
        for a in 0..2 {
            let row = 2 * i + a;
            for k in 0..3 {
                jac[(row, k)] = s * drot[(a, k)];
            }
            jac[(row, 3 + a)] = 1.0;
            jac[(row, 5)] = rp[a];
            for c in 0..m {
                let mut v = 0.0;
                for b in 0..3 {
                    v += r[(a, b)] * point_jacobians[(3 * i + b, c)];
                }
                jac[(row, 6 + c)] = s * v;
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    // Independent oracle: unit quaternion from axis-angle, then the standard
    // quaternion-to-matrix formula.
    fn quat_from_axis_angle(w: &[f64; 3]) -> [f64; 4] {
        let angle = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if angle == 0.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let h = 0.5 * angle;
        let k = h.sin() / angle;
        [h.cos(), w[0] * k, w[1] * k, w[2] * k]
    }

    fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
        [
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ]
    }

    fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
        let [w, x, y, z] = q;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    fn quat_to_axis_angle(q: [f64; 4]) -> [f64; 3] {
        let q = if q[0] < 0.0 { q.map(|c| -c) } else { q };
        let s = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if s == 0.0 {
            return [0.0; 3];
        }
        let angle = 2.0 * s.atan2(q[0]);
        [q[1] / s * angle, q[2] / s * angle, q[3] / s * angle]
    }

    #[test]
    fn zero_is_identity() {
        assert_eq!(rodrigues(&[0.0; 3]), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = rodrigues(&[0.0, 0.0, FRAC_PI_2]) * Vector3::x();
        assert!((q - Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn weak_perspective_drops_depth() {
        let v = ViewParams::default();
        let p = project(&[[3.0, 4.0, 99.0]], &v).unwrap();
        assert_eq!(p.points, vec![[3.0, 4.0]]);
        let v = ViewParams {
            rot: [0.0; 3],
            trans: [10.0, 10.0],
            scale: 2.0,
        };
        let p = project(&[[3.0, 4.0, 0.0]], &v).unwrap();
        assert_eq!(p.points, vec![[16.0, 18.0]]);
    }

    #[test]
    fn non_positive_scale_rejected() {
        let v = ViewParams {
            scale: 0.0,
            ..ViewParams::default()
        };
        assert!(matches!(project(&[[0.0; 3]], &v), Err(Error::Domain(_))));
    }

    #[test]
    fn translation_and_scale_columns() {
        let pts = [[1.0, -2.0, 3.0], [0.5, 0.25, -4.0]];
        let view = ViewParams {
            rot: [0.3, -0.2, 0.9],
            trans: [12.0, -7.0],
            scale: 1.7,
        };
        let pj = DMatrix::zeros(6, 0);
        let jac = project_jacobian(&pts, &pj, &view).unwrap();
        let proj = project(&pts, &view).unwrap();
        for i in 0..2 {
            for a in 0..2 {
                assert_eq!(jac[(2 * i + a, 3)], if a == 0 { 1.0 } else { 0.0 });
                assert_eq!(jac[(2 * i + a, 4)], if a == 1 { 1.0 } else { 0.0 });
                let expect = (proj.points[i][a] - view.trans[a]) / view.scale;
                assert!((jac[(2 * i + a, 5)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_jacobian_small_angle_branch() {
        let p = Vector3::new(0.3, -1.1, 2.0);
        let w = [1e-10, -2e-10, 0.5e-10];
        let jac = rotate_point_jacobian(&w, &p);
        let h = 1e-6;
        for k in 0..3 {
            let mut wp = w;
            let mut wm = w;
            wp[k] += h;
            wm[k] -= h;
            let fd = (rodrigues(&wp) * p - rodrigues(&wm) * p) / (2.0 * h);
            assert!((jac.column(k) - fd).amax() < 1e-8);
        }
    }

    fn axis_angle() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-3.0f64..3.0)
    }

    proptest! {
        #[test]
        fn matches_quaternion_oracle(w in axis_angle()) {
            let r = rodrigues(&w);
            let q = quat_to_matrix(quat_from_axis_angle(&w));
            prop_assert!((r - q).amax() < 1e-12);
        }

        #[test]
        fn output_is_proper_rotation(w in prop::array::uniform3(-10.0f64..10.0)) {
            let r = rodrigues(&w);
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn composition_matches_quaternion_product(a in axis_angle(), b in axis_angle()) {
            let composed = quat_to_axis_angle(quat_mul(quat_from_axis_angle(&a), quat_from_axis_angle(&b)));
            let lhs = rodrigues(&a) * rodrigues(&b);
            prop_assert!((lhs - rodrigues(&composed)).amax() < 1e-10);
        }

        #[test]
        fn projection_matches_scalar_loop(
            pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 1..20),
            w in axis_angle(),
            t in prop::array::uniform2(-100.0f64..100.0),
            s in 0.1f64..5.0,
        ) {
            let view = ViewParams { rot: w, trans: t, scale: s };
            let got = project(&pts, &view).unwrap();
            let q = quat_from_axis_angle(&w);
            let r = quat_to_matrix(q);
            for (p, x) in pts.iter().zip(&got.points) {
                for a in 0..2 {
                    let mut acc = 0.0;
                    for b in 0..3 {
                        acc += r[(a, b)] * p[b];
                    }
                    prop_assert!((s * acc + t[a] - x[a]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn scale_homogeneity(
            p in prop::array::uniform3(-50.0f64..50.0),
            q in prop::array::uniform3(-50.0f64..50.0),
            w in axis_angle(),
            s in 0.1f64..5.0,
        ) {
            let unit = ViewParams { rot: w, trans: [3.0, -2.0], scale: 1.0 };
            let scaled = ViewParams { scale: s, ..unit.clone() };
            let a = project(&[p, q], &unit).unwrap().points;
            let b = project(&[p, q], &scaled).unwrap().points;
            let d1 = ((a[0][0] - a[1][0]).powi(2) + (a[0][1] - a[1][1]).powi(2)).sqrt();
            let d2 = ((b[0][0] - b[1][0]).powi(2) + (b[0][1] - b[1][1]).powi(2)).sqrt();
            prop_assert!((d2 - s * d1).abs() < 1e-9);
        }

        #[test]
        fn translation_equivariance(
            p in prop::array::uniform3(-50.0f64..50.0),
            w in axis_angle(),
            delta in prop::array::uniform2(-20.0f64..20.0),
        ) {
            let view = ViewParams { rot: w, trans: [100.0, 80.0], scale: 1.3 };
            let shifted = ViewParams { trans: [100.0 + delta[0], 80.0 + delta[1]], ..view.clone() };
            let a = project(&[p], &view).unwrap().points[0];
            let b = project(&[p], &shifted).unwrap().points[0];
            prop_assert!((b[0] - a[0] - delta[0]).abs() < 1e-12);
            prop_assert!((b[1] - a[1] - delta[1]).abs() < 1e-12);
        }
    }
}
