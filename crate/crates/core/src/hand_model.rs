//! Articulated hand mesh model: PCA pose decoding, corrective blend shapes,
//! joint regression, forward kinematics and linear blend skinning.
//!
//! Every stage is written once over [`Scalar`], so the same code produces
//! plain `f64` meshes and, instantiated with [`Dual`], exact forward-mode
//! Jacobians of the keypoints.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::rodrigues_generic;
use crate::error::{check_len, Error, Result};
use crate::scalar::{Dual, Scalar};

pub const NUM_FINGERTIPS: usize = 5;

/// Row-major sparse matrix stored as sorted `(row, col, value)` triplets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseMatrix {
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    entries.push((r as u32, c as u32, v));
                }
            }
        }
        SparseMatrix {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            out[r as usize][c as usize] += v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows];
        for &(r, _, v) in &self.entries {
            sums[r as usize] += v;
        }
        sums
    }
}

/// Sparse weight vector over mesh vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub len: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

/// All learned tensors of the hand model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// Mean mesh, one row per vertex (model units, millimetres).
    pub template: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    /// One displacement field per shape coefficient.
    pub shape_blend: Vec<Vec<[f64; 3]>>,
    /// `9 K` displacement fields indexed `9 k + 3 row + col` by the joint's
    /// rotation-matrix entry.
    pub pose_blend: Vec<Vec<[f64; 3]>>,
    /// `K x n_vertices`.
    pub joint_regressor: SparseMatrix,
    /// `n_vertices x K`.
    pub skin_weights: Vec<Vec<f64>>,
    /// Parent joint of each joint; `None` only for the root (joint 0).
    pub parent: Vec<Option<usize>>,
    /// Mean articulation, `3 (K - 1)` axis-angle entries (root excluded).
    pub pose_mean: Vec<f64>,
    /// `3 (K - 1) x n_pose` PCA components, stored row by row.
    pub pose_basis: Vec<Vec<f64>>,
    pub fingertip_vertex_ids: [u32; NUM_FINGERTIPS],
    pub palm_center_weights: Option<SparseVector>,
}

impl ModelConstants {
    pub fn n_vertices(&self) -> usize {
        self.template.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_joints(&self) -> usize {
        self.parent.len()
    }

    pub fn n_shape(&self) -> usize {
        self.shape_blend.len()
    }

    pub fn n_pose(&self) -> usize {
        self.pose_basis.first().map_or(0, Vec::len)
    }

    /// Skeleton joints followed by the fingertips.
    pub fn n_keypoints(&self) -> usize {
        self.n_joints() + NUM_FINGERTIPS
    }

    pub fn n_params(&self) -> usize {
        self.n_shape() + self.n_pose()
    }

    /// Joints ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let k = self.n_joints();
        let mut children = vec![Vec::new(); k];
        let mut roots = Vec::new();
        for (j, p) in self.parent.iter().enumerate() {
            match *p {
                None => roots.push(j),
                Some(p) if p < k && p != j => children[p].push(j),
                Some(p) => {
                    return Err(Error::InvalidModel(format!(
                        "joint {j} has invalid parent {p}"
                    )))
                }
            }
        }
        if roots != [0] {
            return Err(Error::InvalidModel(format!(
                "kinematic tree must have the single root 0, found roots {roots:?}"
            )));
        }
        let mut order = Vec::with_capacity(k);
        let mut stack = vec![0usize];
        while let Some(j) = stack.pop() {
            order.push(j);
            stack.extend(children[j].iter().rev());
        }
        if order.len() != k {
            return Err(Error::InvalidModel("parent table contains a cycle".into()));
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.n_vertices();
        let k = self.n_joints();
        if k < 2 {
            return Err(Error::InvalidModel("need at least two joints".into()));
        }
        self.topological_order()?;
        let finite3 = |rows: &[[f64; 3]]| rows.iter().flatten().all(|v| v.is_finite());
        if !finite3(&self.template) {
            return Err(Error::InvalidModel("template has non-finite entries".into()));
        }
        for f in &self.faces {
            if f.iter().any(|&i| i as usize >= nv) {
                return Err(Error::InvalidModel(format!("face {f:?} out of range")));
            }
        }
        for s in &self.shape_blend {
            check_len("shape blend shape vertices", nv, s.len())?;
            if !finite3(s) {
                return Err(Error::InvalidModel("non-finite shape blend shape".into()));
            }
        }
        check_len("pose blend shapes", 9 * k, self.pose_blend.len())?;
        for p in &self.pose_blend {
            check_len("pose blend shape vertices", nv, p.len())?;
            if !finite3(p) {
                return Err(Error::InvalidModel("non-finite pose blend shape".into()));
            }
        }
        let reg = &self.joint_regressor;
        check_len("joint regressor rows", k, reg.rows)?;
        check_len("joint regressor cols", nv, reg.cols)?;
        for &(r, c, v) in &reg.entries {
            if r as usize >= k || c as usize >= nv || !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "joint regressor entry ({r}, {c}, {v}) invalid"
                )));
            }
        }
        for (j, s) in reg.row_sums().iter().enumerate() {
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "joint regressor row {j} sums to {s}"
                )));
            }
        }
        check_len("skin weight rows", nv, self.skin_weights.len())?;
        for (i, row) in self.skin_weights.iter().enumerate() {
            check_len("skin weight columns", k, row.len())?;
            if row.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidModel(format!("negative skin weight at vertex {i}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "skin weights of vertex {i} sum to {s}"
                )));
            }
        }
        let dof = 3 * (k - 1);
        check_len("pose mean", dof, self.pose_mean.len())?;
        check_len("pose basis rows", dof, self.pose_basis.len())?;
        let n_pose = self.n_pose();
        for row in &self.pose_basis {
            check_len("pose basis columns", n_pose, row.len())?;
        }
        if self
            .pose_mean
            .iter()
            .chain(self.pose_basis.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("non-finite pose embedding".into()));
        }
        if let Some(&i) = self.fingertip_vertex_ids.iter().find(|&&i| i as usize >= nv) {
            return Err(Error::InvalidModel(format!("fingertip vertex {i} out of range")));
        }
        if let Some(palm) = &self.palm_center_weights {
            check_len("palm weight length", nv, palm.len)?;
            check_len("palm weight values", palm.indices.len(), palm.values.len())?;
            if palm.indices.iter().any(|&i| i as usize >= nv) {
                return Err(Error::InvalidModel("palm weight index out of range".into()));
            }
            let s: f64 = palm.values.iter().sum();
            if (s - 1.0).abs() > 1e-9 || palm.values.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidModel(format!("palm weights sum to {s}")));
            }
        }
        Ok(())
    }

    /// Rest joint locations of the mean template (`J * T_bar`).
    pub fn rest_joints(&self) -> Vec<[f64; 3]> {
        regress_joints(&self.template, self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandParams {
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
}

impl HandParams {
    pub fn zeros(n_shape: usize, n_pose: usize) -> Self {
        HandParams {
            beta: vec![0.0; n_shape],
            theta: vec![0.0; n_pose],
        }
    }

    pub fn check(&self, c: &ModelConstants) -> Result<()> {
        check_len("beta", c.n_shape(), self.beta.len())?;
        check_len("theta", c.n_pose(), self.theta.len())?;
        if self.beta.iter().chain(&self.theta).any(|v| !v.is_finite()) {
            return Err(Error::Domain("hand parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Output of the forward model.
#[derive(Clone, Debug, PartialEq)]
pub struct PosedHand {
    pub vertices: Vec<[f64; 3]>,
    /// Skeleton joints in joint order, followed by the 5 fingertip vertices.
    pub joints: Vec<[f64; 3]>,
    pub palm_center: Option<[f64; 3]>,
}

/// World-frame rigid transform `x -> rotation * x + translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let q = self.rotation * Vector3::from_column_slice(p) + self.translation;
        [q.x, q.y, q.z]
    }
}

/// Keypoint positions together with their derivatives.
#[derive(Clone, Debug)]
pub struct KeypointJacobian {
    pub keypoints: Vec<[f64; 3]>,
    /// `(3 n_keypoints) x (n_shape + n_pose)`, columns ordered beta then theta.
    pub jacobian: DMatrix<f64>,
}

type Mat3<S> = [[S; 3]; 3];
type Vec3<S> = [S; 3];

#[derive(Clone, Debug)]
struct Rigid<S> {
    rot: Mat3<S>,
    trans: Vec3<S>,
}

fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            a[i][0].clone() * b[0][j].clone()
                + a[i][1].clone() * b[1][j].clone()
                + a[i][2].clone() * b[2][j].clone()
        })
    })
}

fn mat_vec<S: Scalar>(a: &Mat3<S>, v: &Vec3<S>) -> Vec3<S> {
    std::array::from_fn(|i| {
        a[i][0].clone() * v[0].clone() + a[i][1].clone() * v[1].clone() + a[i][2].clone() * v[2].clone()
    })
}

fn vec_add<S: Scalar>(a: Vec3<S>, b: Vec3<S>) -> Vec3<S> {
    let [a0, a1, a2] = a;
    let [b0, b1, b2] = b;
    [a0 + b0, a1 + b1, a2 + b2]
}

fn vec_sub<S: Scalar>(a: Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    let [a0, a1, a2] = a;
    [a0 - b[0].clone(), a1 - b[1].clone(), a2 - b[2].clone()]
}

fn identity<S: Scalar>() -> Mat3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| S::constant(if i == j { 1.0 } else { 0.0 })))
}

fn constant3<S: Scalar>(p: &[f64; 3]) -> Vec3<S> {
    p.map(S::constant)
}

fn decode_pose_generic<S: Scalar>(theta: &[S], c: &ModelConstants) -> Vec<S> {
    c.pose_mean
        .iter()
        .zip(&c.pose_basis)
        .map(|(&mean, row)| {
            row.iter()
                .zip(theta)
                .fold(S::constant(mean), |acc, (&b, t)| acc + t.clone() * b)
        })
        .collect()
}

/// Local rotation of every joint; the root is held at identity.
fn joint_rotations<S: Scalar>(axis_angles: &[S], k: usize) -> Vec<Mat3<S>> {
    let mut rots = Vec::with_capacity(k);
    rots.push(identity());
    for j in 1..k {
        let w = [
            axis_angles[3 * (j - 1)].clone(),
            axis_angles[3 * (j - 1) + 1].clone(),
            axis_angles[3 * (j - 1) + 2].clone(),
        ];
        rots.push(rodrigues_generic(&w));
    }
    rots
}

fn shaped_vertex<S: Scalar>(v: usize, beta: &[S], c: &ModelConstants) -> Vec3<S> {
    let mut out: Vec3<S> = constant3(&c.template[v]);
    for (b, s) in beta.iter().zip(&c.shape_blend) {
        for a in 0..3 {
            out[a] = out[a].clone() + b.clone() * s[v][a];
        }
    }
    out
}

/// Pose-corrective displacement of vertex `v`: sum over joints of
/// `(R_k - I)` entries times the matching blend shapes.
fn pose_corrective<S: Scalar>(v: usize, rots: &[Mat3<S>], c: &ModelConstants) -> Vec3<S> {
    let mut out: Vec3<S> = std::array::from_fn(|_| S::zero());
    for (k, r) in rots.iter().enumerate().skip(1) {
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { r[i][j].clone() + -1.0 } else { r[i][j].clone() };
                let shape = &c.pose_blend[9 * k + 3 * i + j][v];
                for a in 0..3 {
                    out[a] = out[a].clone() + delta.clone() * shape[a];
                }
            }
        }
    }
    out
}

fn regress_generic<S: Scalar>(
    c: &ModelConstants,
    mut vertex: impl FnMut(usize) -> Vec3<S>,
) -> Vec<Vec3<S>> {
    let mut joints: Vec<Vec3<S>> = (0..c.n_joints())
        .map(|_| std::array::from_fn(|_| S::zero()))
        .collect();
    for &(r, col, w) in &c.joint_regressor.entries {
        let p = vertex(col as usize);
        let j = &mut joints[r as usize];
        for a in 0..3 {
            j[a] = j[a].clone() + p[a].clone() * w;
        }
    }
    joints
}

fn kinematics_generic<S: Scalar>(
    rots: &[Mat3<S>],
    rest_joints: &[Vec3<S>],
    c: &ModelConstants,
    order: &[usize],
) -> Vec<Rigid<S>> {
    let mut out: Vec<Option<Rigid<S>>> = vec![None; rots.len()];
    for &k in order {
        let global = match c.parent[k] {
            None => Rigid {
                rot: identity(),
                trans: std::array::from_fn(|_| S::zero()),
            },
            Some(p) => {
                let parent = out[p].as_ref().expect("parents precede children");
                // G_k(x) = G_p(R_k (x - j_k) + j_k)
                let local_t = vec_sub(rest_joints[k].clone(), &mat_vec(&rots[k], &rest_joints[k]));
                Rigid {
                    rot: mat_mul(&parent.rot, &rots[k]),
                    trans: vec_add(mat_vec(&parent.rot, &local_t), parent.trans.clone()),
                }
            }
        };
        out[k] = Some(global);
    }
    out.into_iter().map(|g| g.expect("all joints visited")).collect()
}

fn skin_vertex<S: Scalar>(p: &Vec3<S>, weights: &[f64], transforms: &[Rigid<S>]) -> Vec3<S> {
    let mut out: Vec3<S> = std::array::from_fn(|_| S::zero());
    for (w, g) in weights.iter().zip(transforms) {
        if *w == 0.0 {
            continue;
        }
        let q = vec_add(mat_vec(&g.rot, p), g.trans.clone());
        for a in 0..3 {
            out[a] = out[a].clone() + q[a].clone() * *w;
        }
    }
    out
}

/// Skeleton joints plus fingertips for parameters of any scalar type,
/// touching only the vertices the keypoints depend on.
fn keypoints_generic<S: Scalar>(beta: &[S], theta: &[S], c: &ModelConstants) -> Result<Vec<Vec3<S>>> {
    let order = c.topological_order()?;
    let axis = decode_pose_generic(theta, c);
    let rots = joint_rotations(&axis, c.n_joints());
    let rest = regress_generic(c, |v| shaped_vertex(v, beta, c));
    let transforms = kinematics_generic(&rots, &rest, c, &order);
    let mut out: Vec<Vec3<S>> = transforms
        .iter()
        .zip(&rest)
        .map(|(g, j)| vec_add(mat_vec(&g.rot, j), g.trans.clone()))
        .collect();
    for &v in &c.fingertip_vertex_ids {
        let v = v as usize;
        let deformed = vec_add(shaped_vertex(v, beta, c), pose_corrective(v, &rots, c));
        out.push(skin_vertex(&deformed, &c.skin_weights[v], &transforms));
    }
    Ok(out)
}

pub fn decode_pose(theta: &[f64], c: &ModelConstants) -> Result<Vec<f64>> {
    check_len("theta", c.n_pose(), theta.len())?;
    Ok(decode_pose_generic(theta, c))
}

/// Template deformed by shape and pose corrective blend shapes.
/// `axis_angles` holds the `3 (K - 1)` articulation entries.
pub fn deform_template(beta: &[f64], axis_angles: &[f64], c: &ModelConstants) -> Result<Vec<[f64; 3]>> {
    check_len("beta", c.n_shape(), beta.len())?;
    check_len("axis-angle pose", 3 * (c.n_joints() - 1), axis_angles.len())?;
    let rots = joint_rotations(axis_angles, c.n_joints());
    let at_rest = axis_angles.iter().all(|&v| v == 0.0);
    Ok((0..c.n_vertices())
        .map(|v| {
            let shaped = shaped_vertex(v, beta, c);
            if at_rest {
                shaped
            } else {
                vec_add(shaped, pose_corrective(v, &rots, c))
            }
        })
        .collect())
}

/// Joint locations regressed from mesh vertices.
pub fn regress_joints(vertices: &[[f64; 3]], c: &ModelConstants) -> Vec<[f64; 3]> {
    regress_generic(c, |v| vertices[v])
}

pub fn forward_kinematics(
    axis_angles: &[f64],
    rest_joints: &[[f64; 3]],
    c: &ModelConstants,
) -> Result<Vec<RigidTransform>> {
    check_len("axis-angle pose", 3 * (c.n_joints() - 1), axis_angles.len())?;
    check_len("rest joints", c.n_joints(), rest_joints.len())?;
    let order = c.topological_order()?;
    let rots = joint_rotations(axis_angles, c.n_joints());
    Ok(kinematics_generic(&rots, rest_joints, c, &order)
        .into_iter()
        .map(|g| RigidTransform {
            rotation: Matrix3::from_fn(|i, j| g.rot[i][j]),
            translation: Vector3::from_column_slice(&g.trans),
        })
        .collect())
}

pub fn skin(
    template_deformed: &[[f64; 3]],
    transforms: &[RigidTransform],
    c: &ModelConstants,
) -> Result<Vec<[f64; 3]>> {
    check_len("deformed template vertices", c.n_vertices(), template_deformed.len())?;
    check_len("transforms", c.n_joints(), transforms.len())?;
    Ok(template_deformed
        .iter()
        .zip(&c.skin_weights)
        .map(|(p, weights)| {
            let mut out = [0.0; 3];
            for (w, g) in weights.iter().zip(transforms) {
                if *w == 0.0 {
                    continue;
                }
                let q = g.apply(p);
                for a in 0..3 {
                    out[a] += w * q[a];
                }
            }
            out
        })
        .collect())
}

/// Weighted average of posed vertices under the model's palm weights.
pub fn palm_center(vertices: &[[f64; 3]], c: &ModelConstants) -> Result<[f64; 3]> {
    let palm = c
        .palm_center_weights
        .as_ref()
        .ok_or(Error::FeatureUnavailable("model has no palm-center weights"))?;
    check_len("vertices", c.n_vertices(), vertices.len())?;
    let mut out = [0.0; 3];
    for (&i, &w) in palm.indices.iter().zip(&palm.values) {
        for a in 0..3 {
            out[a] += w * vertices[i as usize][a];
        }
    }
    Ok(out)
}

pub fn pose_hand(params: &HandParams, c: &ModelConstants) -> Result<PosedHand> {
    params.check(c)?;
    let axis = decode_pose(&params.theta, c)?;
    let rest_pose = vec![0.0; axis.len()];
    let shaped = deform_template(&params.beta, &rest_pose, c)?;
    let rest_joints = regress_joints(&shaped, c);
    let deformed = deform_template(&params.beta, &axis, c)?;
    let transforms = forward_kinematics(&axis, &rest_joints, c)?;
    let vertices = skin(&deformed, &transforms, c)?;
    let mut joints: Vec<[f64; 3]> = transforms
        .iter()
        .zip(&rest_joints)
        .map(|(g, j)| g.apply(j))
        .collect();
    joints.extend(c.fingertip_vertex_ids.iter().map(|&v| vertices[v as usize]));
    let palm = match c.palm_center_weights {
        Some(_) => Some(palm_center(&vertices, c)?),
        None => None,
    };
    Ok(PosedHand {
        vertices,
        joints,
        palm_center: palm,
    })
}

/// Keypoints (skeleton joints then fingertips) without building the full mesh.
pub fn pose_keypoints(params: &HandParams, c: &ModelConstants) -> Result<Vec<[f64; 3]>> {
    params.check(c)?;
    keypoints_generic(&params.beta, &params.theta, c)
}

/// Keypoints and their Jacobian with respect to `(beta, theta)`, by
/// forward-mode dual numbers.
pub fn pose_hand_jacobian(params: &HandParams, c: &ModelConstants) -> Result<KeypointJacobian> {
    params.check(c)?;
    let n_shape = c.n_shape();
    let n_vars = c.n_params();
    let beta: Vec<Dual> = params
        .beta
        .iter()
        .enumerate()
        .map(|(i, &b)| Dual::variable(b, i, n_vars))
        .collect();
    let theta: Vec<Dual> = params
        .theta
        .iter()
        .enumerate()
        .map(|(i, &t)| Dual::variable(t, n_shape + i, n_vars))
        .collect();
    let duals = keypoints_generic(&beta, &theta, c)?;
    let mut jacobian = DMatrix::zeros(3 * duals.len(), n_vars);
    for (i, p) in duals.iter().enumerate() {
        for a in 0..3 {
            for v in 0..n_vars {
                jacobian[(3 * i + a, v)] = p[a].derivative(v);
            }
        }
    }
    let keypoints = duals.iter().map(|p| [p[0].re, p[1].re, p[2].re]).collect();
    Ok(KeypointJacobian {
        keypoints,
        jacobian,
    })
}

/// Number of joints in each finger chain when `n_joints - 1` articulated
/// joints are spread over at most five fingers.
pub fn finger_chain_lengths(n_joints: usize) -> Vec<usize> {
    let articulated = n_joints.saturating_sub(1);
    let fingers = articulated.min(NUM_FINGERTIPS);
    if fingers == 0 {
        return Vec::new();
    }
    (0..fingers)
        .map(|f| articulated / fingers + usize::from(f < articulated % fingers))
        .collect()
}

/// Parent table of a wrist-rooted hand whose fingers are consecutive joint
/// chains (thumb first). With 16 joints every finger has three joints.
pub fn finger_chain_parents(n_joints: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; n_joints.max(1)];
    let mut next = 1;
    for len in finger_chain_lengths(n_joints) {
        for i in 0..len {
            parent[next] = Some(if i == 0 { 0 } else { next - 1 });
            next += 1;
        }
    }
    parent
}
