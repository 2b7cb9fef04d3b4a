#![allow(dead_code)]

use handfit_core::hand_model::{ModelConstants, SparseMatrix, SparseVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random rig with an arbitrary parent table. Every regressor and
/// skin-weight row is a random convex combination.
pub fn random_rig(parent: Vec<Option<usize>>, n_vertices: usize, n_shape: usize, n_pose: usize, seed: u64) -> ModelConstants {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = parent.len();
    let r3 = |rng: &mut ChaCha8Rng, s: f64| -> [f64; 3] { std::array::from_fn(|_| rng.random_range(-s..s)) };
    let template = (0..n_vertices).map(|_| r3(&mut rng, 50.0)).collect();
    let shape_blend = (0..n_shape).map(|_| (0..n_vertices).map(|_| r3(&mut rng, 100.0)).collect()).collect();
    let pose_blend = (0..9 * k).map(|_| (0..n_vertices).map(|_| r3(&mut rng, 2.0)).collect()).collect();
    let convex = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(4)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    };
    let reg_rows: Vec<Vec<f64>> = (0..k).map(|_| convex(&mut rng, n_vertices)).collect();
    let skin_weights = (0..n_vertices).map(|_| convex(&mut rng, k)).collect();
    let dof = 3 * (k - 1);
    let pose_mean = (0..dof).map(|_| rng.random_range(-0.3..0.3)).collect();
    let pose_basis = (0..dof).map(|_| (0..n_pose).map(|_| rng.random_range(-0.3..0.3)).collect()).collect();
    let fingertip_vertex_ids = std::array::from_fn(|i| (i % n_vertices) as u32);
    let palm_ids: Vec<u32> = (0..n_vertices.min(3) as u32).collect();
    let palm_center_weights = Some(SparseVector {
        len: n_vertices,
        values: vec![1.0 / palm_ids.len() as f64; palm_ids.len()],
        indices: palm_ids,
    });
    let faces = (0..n_vertices.max(3) - 2).map(|i| [i as u32, i as u32 + 1, i as u32 + 2]).collect();
    let c = ModelConstants {
        template,
        faces,
        shape_blend,
        pose_blend,
        joint_regressor: SparseMatrix::from_dense(&reg_rows),
        skin_weights,
        parent,
        pose_mean,
        pose_basis,
        fingertip_vertex_ids,
        palm_center_weights,
    };
    c.validate().expect("random rig is valid");
    c
}

pub fn chain_parents(k: usize) -> Vec<Option<usize>> {
    (0..k).map(|i| i.checked_sub(1)).collect()
}

// --- independent reference implementation -------------------------------

pub type M3 = [[f64; 3]; 3];

/// Rotation matrix through the unit quaternion `(cos(a/2), sin(a/2) n)`.
pub fn quat_rotation(w: &[f64]) -> M3 {
    let angle = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if angle == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let s = (angle / 2.0).sin() / angle;
    let (a, b, c, d) = ((angle / 2.0).cos(), w[0] * s, w[1] * s, w[2] * s);
    [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a - b * b + c * c - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ]
}

pub fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &M3, v: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

/// Global transform of joint `k`, recomputed from scratch along its ancestor path.
pub fn global_transform(k: usize, local: &[M3], rest: &[[f64; 3]], parent: &[Option<usize>]) -> (M3, [f64; 3]) {
    let r = local[k];
    let rj = mat_vec(&r, &rest[k]);
    let own_t = [rest[k][0] - rj[0], rest[k][1] - rj[1], rest[k][2] - rj[2]];
    match parent[k] {
        None => (r, own_t),
        Some(p) => {
            let (pr, pt) = global_transform(p, local, rest, parent);
            let moved = mat_vec(&pr, &own_t);
            (mat_mul(&pr, &r), [moved[0] + pt[0], moved[1] + pt[1], moved[2] + pt[2]])
        }
    }
}

pub struct Reference {
    pub vertices: Vec<[f64; 3]>,
    pub joints: Vec<[f64; 3]>,
}

pub fn reference_pose(c: &ModelConstants, beta: &[f64], theta: &[f64]) -> Reference {
    let k = c.parent.len();
    let nv = c.template.len();
    let mut axis = c.pose_mean.clone();
    for (i, row) in c.pose_basis.iter().enumerate() {
        for (j, t) in theta.iter().enumerate() {
            axis[i] += row[j] * t;
        }
    }
    let mut local = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]; k];
    for j in 1..k {
        local[j] = quat_rotation(&axis[3 * (j - 1)..3 * j]);
    }
    let mut shaped = c.template.clone();
    for v in 0..nv {
        for (n, b) in beta.iter().enumerate() {
            for a in 0..3 {
                shaped[v][a] += b * c.shape_blend[n][v][a];
            }
        }
    }
    let dense = c.joint_regressor.to_dense();
    let rest: Vec<[f64; 3]> = (0..k)
        .map(|j| {
            let mut p = [0.0; 3];
            for v in 0..nv {
                for a in 0..3 {
                    p[a] += dense[j][v] * shaped[v][a];
                }
            }
            p
        })
        .collect();
    let mut deformed = shaped.clone();
    for j in 0..k {
        for r in 0..3 {
            for col in 0..3 {
                let delta = local[j][r][col] - if r == col { 1.0 } else { 0.0 };
                for v in 0..nv {
                    for a in 0..3 {
                        deformed[v][a] += delta * c.pose_blend[9 * j + 3 * r + col][v][a];
                    }
                }
            }
        }
    }
    let globals: Vec<(M3, [f64; 3])> = (0..k).map(|j| global_transform(j, &local, &rest, &c.parent)).collect();
    let apply = |g: &(M3, [f64; 3]), p: &[f64; 3]| -> [f64; 3] {
        let q = mat_vec(&g.0, p);
        [q[0] + g.1[0], q[1] + g.1[1], q[2] + g.1[2]]
    };
    let vertices: Vec<[f64; 3]> = (0..nv)
        .map(|v| {
            let mut out = [0.0; 3];
            for j in 0..k {
                let q = apply(&globals[j], &deformed[v]);
                for a in 0..3 {
                    out[a] += c.skin_weights[v][j] * q[a];
                }
            }
            out
        })
        .collect();
    let mut joints: Vec<[f64; 3]> = (0..k).map(|j| apply(&globals[j], &rest[j])).collect();
    joints.extend(c.fingertip_vertex_ids.iter().map(|&v| vertices[v as usize]));
    Reference { vertices, joints }
}

pub fn max_abs_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| (0..3).map(move |i| (p[i] - q[i]).abs()))
        .fold(0.0, f64::max)
}

/// `|a - b| / max(1, |a|, |b|)`: relative for large entries, absolute near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// --- graph oracles --------------------------------------------------------

/// Random directed graph as `(n, edges)` with integer capacities.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, density: f64) -> (usize, Vec<(usize, usize, u32)>) {
    let n = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(density) {
                edges.push((u, v, rng.random_range(0..=20)));
            }
        }
    }
    (n, edges)
}

/// Minimum s-t cut by enumerating every partition with `s` inside and `t` outside.
pub fn brute_force_min_cut(n: usize, edges: &[(usize, usize, u32)], s: usize, t: usize) -> u64 {
    let others: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
    let mut best = u64::MAX;
    for bits in 0u32..(1 << others.len()) {
        let mut inside = vec![false; n];
        inside[s] = true;
        for (i, &v) in others.iter().enumerate() {
            inside[v] = bits >> i & 1 == 1;
        }
        let cut = edges
            .iter()
            .filter(|&&(u, v, _)| inside[u] && !inside[v])
            .map(|&(_, _, c)| u64::from(c))
            .sum();
        best = best.min(cut);
    }
    best
}

/// Ford-Fulkerson with depth-first augmenting paths on a dense residual matrix.
pub fn ford_fulkerson(n: usize, edges: &[(usize, usize, u32)], s: usize, t: usize) -> u64 {
    let mut residual = vec![vec![0i64; n]; n];
    for &(u, v, c) in edges {
        residual[u][v] += i64::from(c);
    }
    let mut total = 0u64;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if prev[v] == usize::MAX && residual[u][v] > 0 {
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut bottleneck = i64::MAX;
        let mut v = t;
        while v != s {
            bottleneck = bottleneck.min(residual[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            residual[prev[v]][v] -= bottleneck;
            residual[v][prev[v]] += bottleneck;
            v = prev[v];
        }
        total += bottleneck as u64;
    }
}

// --- trimap oracle --------------------------------------------------------

/// Labels (0 background, 1 foreground, 2 undecided) from all-pairs squared
/// distances to the foreground pixels.
pub fn brute_force_band(fg: &[bool], width: usize, height: usize, band: f64) -> Vec<u8> {
    let seeds: Vec<(i64, i64)> = (0..width * height)
        .filter(|&i| fg[i])
        .map(|i| ((i % width) as i64, (i / width) as i64))
        .collect();
    (0..width * height)
        .map(|i| {
            if fg[i] {
                return 1;
            }
            let (x, y) = ((i % width) as i64, (i / width) as i64);
            let d2 = seeds.iter().map(|&(sx, sy)| (sx - x).pow(2) + (sy - y).pow(2)).min().unwrap_or(i64::MAX);
            if (d2 as f64) <= band * band { 2 } else { 0 }
        })
        .collect()
}
