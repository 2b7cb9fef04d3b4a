//! Procedural hand rigs and the synthetic pose/view sampler.
//!
//! Rigs stand in for learned model constants: a wrist-rooted tree of life-size
//! finger chains with vertices scattered around the bones, distance-falloff skin
//! weights, smooth random shape directions, small pose correctives, an
//! averaging joint regressor and an orthonormal PCA pose basis.

use std::io::Write;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::{project, rodrigues, ViewParams};
use crate::error::{Error, Result};
use crate::hand_model::{
    finger_chain_lengths, finger_chain_parents, pose_hand, pose_keypoints, HandParams, ModelConstants, SparseMatrix,
    SparseVector, NUM_FINGERTIPS,
};
use crate::segmentation::raster::fill_triangle;
use crate::segmentation::HandMask;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigSpec {
    pub n_joints: usize,
    pub n_vertices: usize,
    pub n_shape: usize,
    pub n_pose: usize,
    pub seed: u64,
    /// Defaults to `2 n_vertices - 18` (at least one face).
    #[serde(default)]
    pub n_faces: Option<usize>,
}

impl RigSpec {
    /// 16 joints, 778 vertices, 1538 faces, 10 shape and 10 pose coefficients.
    pub fn hand_scale(seed: u64) -> Self {
        RigSpec {
            n_joints: 16,
            n_vertices: 778,
            n_shape: 10,
            n_pose: 10,
            seed,
            n_faces: Some(1538),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_joints < 2 {
            return Err(Error::Contract("a rig needs at least 2 joints".into()));
        }
        if self.n_vertices < self.n_joints {
            return Err(Error::Contract("a rig needs at least as many vertices as joints".into()));
        }
        Ok(())
    }

    pub fn face_count(&self) -> usize {
        self.n_faces.unwrap_or_else(|| (2 * self.n_vertices).saturating_sub(18).max(1))
    }
}

const SKIN_SIGMA_MM: f64 = 10.0;
const VERTEX_SPREAD_MM: f64 = 8.0;
// a unit shape coefficient moves vertices by a few millimetres
const SHAPE_GAIN: f64 = 0.03;
const SHAPE_NOISE_MM: f64 = 1.0;
const POSE_CORRECTIVE_MM: f64 = 1.0;
const REGRESSOR_NEIGHBOURS: usize = 4;

fn sample_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn distance_to_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn nearest(points: &[Vector3<f64>], target: &Vector3<f64>, n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).filter(|i| !exclude.contains(i)).collect();
    idx.sort_by(|&a, &b| {
        (points[a] - target)
            .norm_squared()
            .total_cmp(&(points[b] - target).norm_squared())
            .then(a.cmp(&b))
    });
    idx.truncate(n);
    idx
}

pub fn make_rig(spec: &RigSpec) -> Result<ModelConstants> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.n_joints;
    let parent = finger_chain_parents(k);
    let chains = finger_chain_lengths(k);
    let n_fingers = chains.len();

    // rest skeleton, in millimetres, fingers pointing along +x
    let mut joints = vec![Vector3::zeros(); k];
    let mut bones: Vec<(usize, Vector3<f64>, Vector3<f64>)> = Vec::new();
    let mut tips = Vec::with_capacity(n_fingers);
    let mut bases = Vec::with_capacity(n_fingers);
    let mut next = 1;
    for (f, &len) in chains.iter().enumerate() {
        let spread = if n_fingers > 1 { f as f64 / (n_fingers - 1) as f64 - 0.5 } else { 0.0 };
        let (base, dir) = if f == 0 && n_fingers == NUM_FINGERTIPS {
            // thumb: low on the palm, angled outwards
            (Vector3::new(25.0, -35.0, 0.0), Vector3::new(0.7, -0.7, 0.1))
        } else {
            (Vector3::new(90.0, 70.0 * spread, 0.0), Vector3::new(1.0, 0.3 * spread, 0.0))
        };
        let jitter = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mut pos = base + jitter;
        let dir = dir.normalize();
        bones.push((0, Vector3::zeros(), pos));
        bases.push(pos);
        for i in 0..len {
            joints[next] = pos;
            // proximal bones are the longest
            let bone_len = match i {
                0 => rng.random_range(38.0..46.0),
                1 => rng.random_range(24.0..30.0),
                _ => rng.random_range(18.0..24.0),
            };
            let end = pos + dir * bone_len;
            bones.push((next, pos, end));
            if i + 1 == len {
                tips.push(end);
            }
            pos = end;
            next += 1;
        }
    }

    // vertices scattered around the bones
    let nv = spec.n_vertices;
    let mut verts = Vec::with_capacity(nv);
    for i in 0..nv {
        let (_, a, b) = &bones[i % bones.len()];
        let t: f64 = rng.random_range(0.0..1.0);
        let offset = Vector3::new(sample_normal(&mut rng), sample_normal(&mut rng), sample_normal(&mut rng));
        verts.push(a + (b - a) * t + offset * VERTEX_SPREAD_MM);
    }

    let skin_weights: Vec<Vec<f64>> = verts
        .iter()
        .map(|v| {
            let mut w = vec![0.0; k];
            for (owner, a, b) in &bones {
                let d = distance_to_segment(v, a, b);
                let val = (-d * d / (2.0 * SKIN_SIGMA_MM * SKIN_SIGMA_MM)).exp();
                w[*owner] = f64::max(w[*owner], val);
            }
            let max = w.iter().copied().fold(0.0, f64::max);
            if max <= 0.0 {
                // isolated vertex: follow the nearest bone rigidly
                let owner = bones
                    .iter()
                    .min_by(|x, y| distance_to_segment(v, &x.1, &x.2).total_cmp(&distance_to_segment(v, &y.1, &y.2)))
                    .map_or(0, |b| b.0);
                w.iter_mut().for_each(|x| *x = 0.0);
                w[owner] = 1.0;
                return w;
            }
            for x in w.iter_mut() {
                if *x < 1e-4 * max {
                    *x = 0.0;
                }
            }
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= sum);
            w
        })
        .collect();

    let mut entries = Vec::with_capacity(k * REGRESSOR_NEIGHBOURS);
    for (j, joint) in joints.iter().enumerate() {
        let mut near = nearest(&verts, joint, REGRESSOR_NEIGHBOURS, &[]);
        near.sort_unstable();
        let w = 1.0 / near.len() as f64;
        entries.extend(near.into_iter().map(|v| (j as u32, v as u32, w)));
    }
    let joint_regressor = SparseMatrix {
        rows: k,
        cols: nv,
        entries,
    };

    let shape_blend = (0..spec.n_shape)
        .map(|_| {
            let a = DMatrix::<f64>::from_fn(3, 3, |_, _| sample_normal(&mut rng) * SHAPE_GAIN);
            verts
                .iter()
                .map(|v| {
                    let d = &a * v;
                    std::array::from_fn(|c| d[c] + sample_normal(&mut rng) * SHAPE_NOISE_MM)
                })
                .collect()
        })
        .collect();
    let pose_blend = (0..9 * k)
        .map(|_| {
            (0..nv)
                .map(|_| std::array::from_fn(|_| sample_normal(&mut rng) * POSE_CORRECTIVE_MM))
                .collect()
        })
        .collect();

    let dof = 3 * (k - 1);
    let pose_basis = orthonormal_columns(dof, spec.n_pose, &mut rng);

    let mut fingertip_vertex_ids = [0u32; NUM_FINGERTIPS];
    let mut taken = Vec::new();
    for (f, id) in fingertip_vertex_ids.iter_mut().enumerate() {
        let tip = tips[f % tips.len()];
        let exclude = if taken.len() < nv { taken.clone() } else { Vec::new() };
        let v = nearest(&verts, &tip, 1, &exclude)[0];
        taken.push(v);
        *id = v as u32;
    }

    let palm_target = bases.iter().fold(Vector3::zeros(), |acc, b| acc + b) / (bases.len() as f64 + 1.0);
    let mut palm_ids = nearest(&verts, &palm_target, 4.min(nv), &[]);
    palm_ids.sort_unstable();
    let palm_center_weights = Some(SparseVector {
        len: nv,
        values: vec![1.0 / palm_ids.len() as f64; palm_ids.len()],
        indices: palm_ids.into_iter().map(|i| i as u32).collect(),
    });

    let faces = make_faces(&verts, spec.face_count());
    let c = ModelConstants {
        template: verts.iter().map(|v| [v.x, v.y, v.z]).collect(),
        faces,
        shape_blend,
        pose_blend,
        joint_regressor,
        skin_weights,
        parent,
        pose_mean: vec![0.0; dof],
        pose_basis,
        fingertip_vertex_ids,
        palm_center_weights,
    };
    c.validate()?;
    Ok(c)
}

/// `rows x cols` matrix whose columns are orthonormal (as many as the row
/// count allows; extra columns are unit-norm random directions).
fn orthonormal_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let g = DMatrix::<f64>::from_fn(rows, cols, |_, _| sample_normal(rng));
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    for c in 0..cols {
        let mut v = g.column(c).into_owned();
        if c < rows {
            for prev in 0..c {
                let q = out.column(prev).into_owned();
                v -= &q * q.dot(&v);
            }
        }
        let n = v.norm();
        out.set_column(c, &(v / n));
    }
    (0..rows).map(|r| out.row(r).iter().copied().collect()).collect()
}

/// Triangles joining each vertex to pairs of its nearest neighbours.
fn make_faces(verts: &[Vector3<f64>], n_faces: usize) -> Vec<[u32; 3]> {
    let nv = verts.len();
    if nv < 3 {
        return (0..n_faces).map(|_| [0, (1 % nv) as u32, (2 % nv) as u32]).collect();
    }
    let neighbours: Vec<Vec<usize>> = (0..nv)
        .map(|i| nearest(verts, &verts[i], 4.min(nv - 1), &[i]))
        .collect();
    (0..n_faces)
        .map(|f| {
            let a = f % nv;
            let round = f / nv;
            let nb = &neighbours[a];
            let b = nb[(2 * round) % nb.len()];
            let mut c = nb[(2 * round + 1) % nb.len()];
            if c == b {
                c = (0..nv).find(|&x| x != a && x != b).unwrap_or(a);
            }
            [a as u32, b as u32, c as u32]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Pose coefficients are drawn from `[-theta_range, theta_range]`.
    pub theta_range: f64,
    pub beta_range: f64,
    pub scale_range: (f64, f64),
    pub image_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            theta_range: 2.0,
            beta_range: 0.03,
            scale_range: (0.5, 2.0),
            image_size: 320,
        }
    }
}

/// Uniformly random rotation (uniform unit quaternion) as axis-angle.
pub fn random_rotation<R: Rng>(rng: &mut R) -> [f64; 3] {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let mut q = [a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()];
    if q[3] < 0.0 {
        q = q.map(|c| -c);
    }
    let s = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    if s == 0.0 {
        return [0.0; 3];
    }
    let angle = 2.0 * s.atan2(q[3]);
    [q[0] / s * angle, q[1] / s * angle, q[2] / s * angle]
}

pub fn sample_params<R: Rng>(rng: &mut R, n_shape: usize, n_pose: usize, cfg: &SamplerConfig) -> (HandParams, ViewParams) {
    let theta = (0..n_pose).map(|_| rng.random_range(-cfg.theta_range..=cfg.theta_range)).collect();
    let beta = (0..n_shape).map(|_| rng.random_range(-cfg.beta_range..=cfg.beta_range)).collect();
    let rot = random_rotation(rng);
    let size = cfg.image_size as f64;
    let trans = [rng.random_range(0.25 * size..0.75 * size), rng.random_range(0.25 * size..0.75 * size)];
    let (lo, hi) = cfg.scale_range;
    let scale = if lo == hi { lo } else { rng.random_range(lo.ln()..hi.ln()).exp() };
    (HandParams { beta, theta }, ViewParams { rot, trans, scale })
}

/// One JSON-lines dataset record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub rot: [f64; 3],
    pub trans: [f64; 2],
    pub scale: f64,
    /// Posed joints after the global rotation (no translation or scale);
    /// `null` marks an unannotated joint.
    pub joints3d: Vec<Option<[f64; 3]>>,
    /// `[u, v, confidence]` per keypoint.
    pub keypoints2d: Vec<[f64; 3]>,
}

impl SampleRecord {
    pub fn hand(&self) -> HandParams {
        HandParams {
            beta: self.beta.clone(),
            theta: self.theta.clone(),
        }
    }

    pub fn view(&self) -> ViewParams {
        ViewParams {
            rot: self.rot,
            trans: self.trans,
            scale: self.scale,
        }
    }
}

/// Rotated keypoints `R J(beta, theta)`.
pub fn rotated_keypoints(c: &ModelConstants, hand: &HandParams, rot: &[f64; 3]) -> Result<Vec<[f64; 3]>> {
    let r = rodrigues(rot);
    Ok(pose_keypoints(hand, c)?
        .iter()
        .map(|j| {
            let q = r * Vector3::from_column_slice(j);
            [q.x, q.y, q.z]
        })
        .collect())
}

/// Seed of sample `index` under dataset seed `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Draws sample `index`; a pure function of `(rig, seed, index, cfg, sigma)`.
pub fn generate_sample(c: &ModelConstants, seed: u64, index: u64, cfg: &SamplerConfig, sigma: f64) -> Result<SampleRecord> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, index));
    let (hand, view) = sample_params(&mut rng, c.n_shape(), c.n_pose(), cfg);
    let joints = pose_keypoints(&hand, c)?;
    let proj = project(&joints, &view)?;
    let noise = if sigma > 0.0 { Some(Normal::new(0.0, sigma).expect("sigma > 0")) } else { None };
    let keypoints2d = proj
        .points
        .iter()
        .map(|p| match &noise {
            None => [p[0], p[1], 1.0],
            Some(n) => {
                let (dx, dy) = (n.sample(&mut rng), n.sample(&mut rng));
                let err2 = dx * dx + dy * dy;
                [p[0] + dx, p[1] + dy, (-err2 / (2.0 * sigma * sigma)).exp()]
            }
        })
        .collect();
    let joints3d = rotated_keypoints(c, &hand, &view.rot)?.into_iter().map(Some).collect();
    Ok(SampleRecord {
        id: index,
        beta: hand.beta,
        theta: hand.theta,
        rot: view.rot,
        trans: view.trans,
        scale: view.scale,
        joints3d,
        keypoints2d,
    })
}

pub fn generate_samples(c: &ModelConstants, n: usize, seed: u64, cfg: &SamplerConfig, sigma: f64) -> Result<Vec<SampleRecord>> {
    (0..n as u64).map(|i| generate_sample(c, seed, i, cfg, sigma)).collect()
}

pub fn write_jsonl<W: Write>(records: &[SampleRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<SampleRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn generate_dataset(
    c: &ModelConstants,
    n: usize,
    seed: u64,
    cfg: &SamplerConfig,
    sigma: f64,
    out_path: impl AsRef<std::path::Path>,
) -> Result<Vec<SampleRecord>> {
    let records = generate_samples(c, n, seed, cfg, sigma)?;
    let file = std::fs::File::create(out_path)?;
    write_jsonl(&records, std::io::BufWriter::new(file))?;
    Ok(records)
}

/// Binary silhouette of the projected mesh.
pub fn render_silhouette(projected_vertices: &[[f64; 2]], faces: &[[u32; 3]], width: usize, height: usize) -> HandMask {
    let mut mask = HandMask::new(width, height);
    for f in faces {
        let tri = f.map(|i| projected_vertices[i as usize]);
        fill_triangle(tri, width, height, |x, y| mask.set(x, y, true));
    }
    mask
}

/// Silhouette of a sample rendered from its stored parameters.
pub fn sample_silhouette(c: &ModelConstants, record: &SampleRecord, width: usize, height: usize) -> Result<HandMask> {
    let posed = pose_hand(&record.hand(), c)?;
    let proj = project(&posed.vertices, &record.view())?;
    Ok(render_silhouette(&proj.points, &c.faces, width, height))
}
