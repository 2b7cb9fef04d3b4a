mod common;

use common::*;
use handfit_core::hand_model::*;
use handfit_core::synth::{make_rig, RigSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_hand(rng: &mut ChaCha8Rng, c: &ModelConstants) -> HandParams {
    HandParams {
        beta: (0..c.n_shape()).map(|_| rng.random_range(-0.03..0.03)).collect(),
        theta: (0..c.n_pose()).map(|_| rng.random_range(-2.0..2.0)).collect(),
    }
}

fn small_spec(seed: u64) -> RigSpec {
    RigSpec {
        n_joints: 16,
        n_vertices: 120,
        n_shape: 10,
        n_pose: 10,
        seed,
        n_faces: None,
    }
}

#[test]
fn decode_zero_is_mean_and_identity_basis_selects_column() {
    let mut c = random_rig(chain_parents(3), 8, 2, 6, 1);
    assert_eq!(decode_pose(&[0.0; 6], &c).unwrap(), c.pose_mean);
    c.pose_mean = vec![0.0; 6];
    c.pose_basis = (0..6).map(|i| (0..6).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    assert_eq!(decode_pose(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &c).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(decode_pose(&[0.0; 5], &c).is_err());
}

#[test]
fn decode_matches_dense_matvec() {
    let c = random_rig(chain_parents(5), 10, 3, 7, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let theta: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = decode_pose(&theta, &c).unwrap();
        for i in 0..got.len() {
            let mut want = c.pose_mean[i];
            for j in 0..7 {
                want += c.pose_basis[i][j] * theta[j];
            }
            assert!((got[i] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn deform_at_rest_ignores_pose_blend_shapes() {
    let c = random_rig(chain_parents(4), 12, 3, 4, 4);
    let rest = vec![0.0; 9];
    assert_eq!(deform_template(&[0.0; 3], &rest, &c).unwrap(), c.template);
    let got = deform_template(&[0.03, 0.0, 0.0], &rest, &c).unwrap();
    for v in 0..12 {
        for a in 0..3 {
            assert_eq!(got[v][a], c.template[v][a] + 0.03 * c.shape_blend[0][v][a]);
        }
    }
}

#[test]
fn deform_single_quarter_turn_matches_term_loop() {
    let c = random_rig(chain_parents(4), 12, 2, 4, 5);
    let mut axis = vec![0.0; 9];
    axis[5] = std::f64::consts::FRAC_PI_2; // joint 2 about z
    let got = deform_template(&[0.0, 0.0], &axis, &c).unwrap();
    let r = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
    for v in 0..12 {
        let mut want = c.template[v];
        for term in 0..9 * 4 {
            let (k, row, col) = (term / 9, (term % 9) / 3, term % 3);
            let coeff = if k == 2 { r[row][col] - if row == col { 1.0 } else { 0.0 } } else { 0.0 };
            for a in 0..3 {
                want[a] += coeff * c.pose_blend[term][v][a];
            }
        }
        for a in 0..3 {
            assert!((got[v][a] - want[a]).abs() < 1e-12, "vertex {v}");
        }
    }
}

#[test]
fn forward_kinematics_examples() {
    let c = random_rig(chain_parents(2), 4, 1, 3, 6);
    let rest = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
    for g in forward_kinematics(&[0.0; 3], &rest, &c).unwrap() {
        assert_eq!(g, RigidTransform::identity());
    }
    let g = forward_kinematics(&[0.0, 0.0, std::f64::consts::FRAC_PI_2], &rest, &c).unwrap();
    let p = g[1].apply(&[2.0, 0.0, 0.0]);
    assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15 && p[2].abs() < 1e-15);
}

#[test]
fn forward_kinematics_matches_recursive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for parent in [chain_parents(4), vec![None, Some(0), Some(0), Some(1), Some(3), Some(2)]] {
        let k = parent.len();
        let c = random_rig(parent.clone(), 6, 1, 3, 8);
        for _ in 0..20 {
            let axis: Vec<f64> = (0..3 * (k - 1)).map(|_| rng.random_range(-2.0..2.0)).collect();
            let rest: Vec<[f64; 3]> = (0..k).map(|_| std::array::from_fn(|_| rng.random_range(-50.0..50.0))).collect();
            let got = forward_kinematics(&axis, &rest, &c).unwrap();
            let mut local = vec![quat_rotation(&[0.0; 3]); k];
            for j in 1..k {
                local[j] = quat_rotation(&axis[3 * (j - 1)..3 * j]);
            }
            for j in 0..k {
                let (r, t) = global_transform(j, &local, &rest, &parent);
                for a in 0..3 {
                    assert!((got[j].translation[a] - t[a]).abs() < 1e-10);
                    for b in 0..3 {
                        assert!((got[j].rotation[(a, b)] - r[a][b]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn skin_matches_direct_sum() {
    let c = random_rig(chain_parents(4), 10, 1, 3, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let axis: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
    let rest = regress_joints(&c.template, &c);
    let transforms = forward_kinematics(&axis, &rest, &c).unwrap();
    let got = skin(&c.template, &transforms, &c).unwrap();
    for v in 0..10 {
        let mut want = [0.0; 3];
        for k in 0..4 {
            let q = transforms[k].apply(&c.template[v]);
            for a in 0..3 {
                want[a] += c.skin_weights[v][k] * q[a];
            }
        }
        for a in 0..3 {
            assert!((got[v][a] - want[a]).abs() < 1e-12);
        }
    }
    let identity = vec![RigidTransform::identity(); 4];
    let same = skin(&c.template, &identity, &c).unwrap();
    assert!(max_abs_diff(&same, &c.template) < 1e-12);
}

#[test]
fn fully_owned_vertex_follows_its_joint() {
    let mut c = random_rig(chain_parents(3), 6, 1, 6, 11);
    c.skin_weights[2] = vec![0.0, 0.0, 1.0];
    let axis = [0.0, 0.0, 0.0, 0.3, -1.2, 0.7];
    let rest = regress_joints(&c.template, &c);
    let g = forward_kinematics(&axis, &rest, &c).unwrap();
    let v = skin(&c.template, &g, &c).unwrap();
    assert_eq!(v[2], g[2].apply(&c.template[2]));
}

#[test]
fn pose_hand_matches_reference_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..3 {
        for c in [make_rig(&small_spec(seed)).unwrap(), random_rig(vec![None, Some(0), Some(1), Some(0), Some(3)], 15, 4, 5, seed)] {
            for _ in 0..5 {
                let p = sample_hand(&mut rng, &c);
                let got = pose_hand(&p, &c).unwrap();
                let want = reference_pose(&c, &p.beta, &p.theta);
                assert!(max_abs_diff(&got.vertices, &want.vertices) < 1e-9);
                assert!(max_abs_diff(&got.joints, &want.joints) < 1e-9);
                assert!(max_abs_diff(&pose_keypoints(&p, &c).unwrap(), &got.joints) < 1e-9);
            }
        }
    }
}

#[test]
fn hand_scale_rig_dimensions() {
    let c = make_rig(&RigSpec::hand_scale(0)).unwrap();
    let posed = pose_hand(&HandParams::zeros(10, 10), &c).unwrap();
    assert_eq!(posed.vertices.len(), 778);
    assert_eq!(c.n_faces(), 1538);
    assert_eq!(posed.joints.len(), 21);
    assert!(posed.palm_center.is_some());
}

#[test]
fn rest_pose_identity_on_random_rigs() {
    for seed in 0..10 {
        let c = random_rig(chain_parents(5), 20, 3, 4, 100 + seed);
        let posed = pose_hand(&HandParams::zeros(3, 4), &c).unwrap();
        // the random rig has a nonzero pose mean, so zero it for the rest check
        let mut c0 = c.clone();
        c0.pose_mean = vec![0.0; c.pose_mean.len()];
        let rest = pose_hand(&HandParams::zeros(3, 4), &c0).unwrap();
        assert!(max_abs_diff(&rest.vertices, &c0.template) < 1e-12);
        let regressed = regress_joints(&c0.template, &c0);
        assert!(max_abs_diff(&rest.joints[..5], &regressed) < 1e-12);
        assert!(posed.vertices.iter().all(|v| v.iter().all(|x| x.is_finite())));
    }
}

#[test]
fn fingertips_are_mesh_vertices_bitwise() {
    let c = make_rig(&small_spec(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let posed = pose_hand(&sample_hand(&mut rng, &c), &c).unwrap();
        for (f, &v) in c.fingertip_vertex_ids.iter().enumerate() {
            assert_eq!(posed.joints[16 + f], posed.vertices[v as usize]);
        }
    }
}

#[test]
fn rigidly_owned_vertices_keep_distances() {
    let mut c = random_rig(chain_parents(4), 12, 2, 4, 14);
    for v in [3, 5, 8] {
        c.skin_weights[v] = vec![0.0, 0.0, 1.0, 0.0];
    }
    // corrective offsets would deform the owned vertices, so drop them
    for shape in c.pose_blend.iter_mut() {
        for v in [3, 5, 8] {
            shape[v] = [0.0; 3];
        }
    }
    let dist = |p: &[f64; 3], q: &[f64; 3]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    let beta = vec![0.01, -0.02];
    let base = pose_hand(&HandParams { beta: beta.clone(), theta: vec![0.0; 4] }, &c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let theta = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let posed = pose_hand(&HandParams { beta: beta.clone(), theta }, &c).unwrap();
        for (a, b) in [(3, 5), (3, 8), (5, 8)] {
            let d0 = dist(&base.vertices[a], &base.vertices[b]);
            assert!((dist(&posed.vertices[a], &posed.vertices[b]) - d0).abs() < 1e-9);
        }
    }
}

#[test]
fn beta_columns_at_rest_equal_regressed_shape_directions() {
    let mut c = make_rig(&small_spec(4)).unwrap();
    c.pose_mean = vec![0.0; c.pose_mean.len()];
    let jac = pose_hand_jacobian(&HandParams::zeros(10, 10), &c).unwrap();
    let dense = c.joint_regressor.to_dense();
    for n in 0..10 {
        for j in 0..16 {
            for a in 0..3 {
                let want: f64 = (0..c.n_vertices()).map(|v| dense[j][v] * c.shape_blend[n][v][a]).sum();
                assert!((jac.jacobian[(3 * j + a, n)] - want).abs() < 1e-9);
            }
        }
        for (f, &v) in c.fingertip_vertex_ids.iter().enumerate() {
            for a in 0..3 {
                assert!((jac.jacobian[(3 * (16 + f) + a, n)] - c.shape_blend[n][v as usize][a]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_shape_blend_gives_zero_beta_columns() {
    let mut c = make_rig(&small_spec(5)).unwrap();
    for s in c.shape_blend.iter_mut() {
        s.iter_mut().for_each(|v| *v = [0.0; 3]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let jac = pose_hand_jacobian(&sample_hand(&mut rng, &c), &c).unwrap();
    assert!(jac.jacobian.columns(0, 10).iter().all(|&x| x == 0.0));
}

#[test]
fn jacobian_matches_central_differences() {
    let c = make_rig(&RigSpec::hand_scale(6)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = sample_hand(&mut rng, &c);
        let jac = pose_hand_jacobian(&p, &c).unwrap();
        assert!(max_abs_diff(&jac.keypoints, &pose_keypoints(&p, &c).unwrap()) < 1e-12);
        for col in 0..20 {
            let shift = |d: f64| {
                let mut q = p.clone();
                if col < 10 { q.beta[col] += d } else { q.theta[col - 10] += d }
                pose_keypoints(&q, &c).unwrap()
            };
            let (plus, minus) = (shift(h), shift(-h));
            for i in 0..21 {
                for a in 0..3 {
                    let fd = (plus[i][a] - minus[i][a]) / (2.0 * h);
                    worst = worst.max(rel_err(jac.jacobian[(3 * i + a, col)], fd));
                }
            }
        }
    }
    assert!(worst < 1e-5, "max relative error {worst}");
}

#[test]
fn validate_rejects_bad_constants() {
    let c = random_rig(chain_parents(3), 6, 1, 2, 18);
    let mut bad = c.clone();
    bad.skin_weights[0][0] += 0.1;
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.parent = vec![None, Some(2), Some(1)];
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.parent = vec![None, None, Some(1)];
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.fingertip_vertex_ids[0] = 6;
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.faces[0][2] = 99;
    assert!(bad.validate().is_err());
    let mut bad = c;
    bad.palm_center_weights.as_mut().unwrap().values[0] = 0.9;
    assert!(bad.validate().is_err());
}

#[test]
fn missing_palm_weights_is_reported() {
    let mut c = random_rig(chain_parents(3), 6, 1, 2, 19);
    c.palm_center_weights = None;
    assert!(matches!(
        palm_center(&c.template, &c),
        Err(handfit_core::Error::FeatureUnavailable(_))
    ));
    assert!(pose_hand(&HandParams::zeros(1, 2), &c).unwrap().palm_center.is_none());
}

#[test]
fn finger_chains() {
    assert_eq!(finger_chain_lengths(16), vec![3; 5]);
    assert_eq!(finger_chain_lengths(4), vec![1, 1, 1]);
    assert_eq!(finger_chain_lengths(8), vec![2, 2, 1, 1, 1]);
    let p = finger_chain_parents(16);
    assert_eq!(&p[..4], &[None, Some(0), Some(1), Some(2)]);
    assert_eq!(p[4], Some(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shape_is_linear_at_rest(
        b1 in prop::collection::vec(-0.03f64..0.03, 3),
        b2 in prop::collection::vec(-0.03f64..0.03, 3),
    ) {
        let mut c = random_rig(chain_parents(4), 15, 3, 4, 20);
        c.pose_mean = vec![0.0; 9];
        let verts = |b: &[f64]| pose_hand(&HandParams { beta: b.to_vec(), theta: vec![0.0; 4] }, &c).unwrap().vertices;
        let sum: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| x + y).collect();
        let (v1, v2, v12) = (verts(&b1), verts(&b2), verts(&sum));
        for v in 0..15 {
            for a in 0..3 {
                let lhs = v12[v][a] - c.template[v][a];
                let rhs = (v1[v][a] - c.template[v][a]) + (v2[v][a] - c.template[v][a]);
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rest_deform_ignores_pose_blend_contents(scale in -100.0f64..100.0, beta in prop::collection::vec(-0.03f64..0.03, 2)) {
        let mut c = random_rig(chain_parents(3), 8, 2, 2, 21);
        let plain = deform_template(&beta, &[0.0; 6], &c).unwrap();
        for s in c.pose_blend.iter_mut() {
            s.iter_mut().for_each(|v| *v = [scale; 3]);
        }
        prop_assert_eq!(deform_template(&beta, &[0.0; 6], &c).unwrap(), plain);
    }
}
