//! Forward kinematics checked against an independent homogeneous-transform
//! oracle and against the published Gen3 Lite reference postures.

use gen3lite_ik::dh::ACTUATOR_TO_FRAME_OFFSET;
use gen3lite_ik::*;
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One link transform assembled the long way: translate along z, rotate
/// about z, translate along x, rotate about x — four elementary 4×4 factors.
fn link_transform(theta: f64, a: f64, b: f64, alpha: f64) -> Matrix4<f64> {
    let mut tz = Matrix4::identity();
    tz[(2, 3)] = b;
    let (st, ct) = theta.sin_cos();
    let mut rz = Matrix4::identity();
    rz[(0, 0)] = ct;
    rz[(0, 1)] = -st;
    rz[(1, 0)] = st;
    rz[(1, 1)] = ct;
    let mut tx = Matrix4::identity();
    tx[(0, 3)] = a;
    let (sa, ca) = alpha.sin_cos();
    let mut rx = Matrix4::identity();
    rx[(1, 1)] = ca;
    rx[(1, 2)] = -sa;
    rx[(2, 1)] = sa;
    rx[(2, 2)] = ca;
    tz * rz * tx * rx
}

fn oracle_fk(joints: &JointAngles, chain: &DhChain) -> (Vector3<f64>, Matrix3<f64>) {
    let mut t = Matrix4::identity();
    for i in 0..6 {
        let theta = joints[i] + ACTUATOR_TO_FRAME_OFFSET[i];
        t *= link_transform(theta, chain.a[i], chain.b[i], chain.alpha[i]);
    }
    (
        Vector3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)]),
        t.fixed_view::<3, 3>(0, 0).into_owned(),
    )
}

fn random_joints(rng: &mut impl Rng, chain: &DhChain) -> JointAngles {
    JointAngles(std::array::from_fn(|i| {
        rng.random_range(chain.lower[i]..=chain.upper[i])
    }))
}

#[test]
fn fk_matches_homogeneous_transform_oracle() {
    let chain = DhChain::gen3_lite();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let joints = random_joints(&mut rng, &chain);
        let pose = forward_kinematics(&joints, &chain);
        let (p, q) = oracle_fk(&joints, &chain);
        assert!((pose.position - p).norm() < 1e-12);
        assert!((pose.orientation - q).norm() < 1e-12);
        assert!(pose.orthonormality_error() < 1e-10);
    }
}

#[test]
fn wrist_point_is_the_sixth_frame_origin() {
    let chain = DhChain::gen3_lite();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let joints = random_joints(&mut rng, &chain);
        let pose = forward_kinematics(&joints, &chain);
        let origins = frame_origins(&joints, &chain);
        assert!((wrist_vector(&pose, &chain) - origins[5]).norm() < 1e-12);
        assert!((origins[6] - pose.position).norm() < 1e-12);
    }
}

#[test]
fn reference_posture_fixture() {
    let chain = DhChain::gen3_lite();
    let joints = JointAngles([1.0, 1.0, 1.5, 0.0, 0.5, -1.5]);
    let pose = forward_kinematics(&joints, &chain);
    let expect_p = Vector3::new(0.119, -0.04, 0.763);
    for i in 0..3 {
        assert!(
            (pose.position[i] - expect_p[i]).abs() < 1e-3,
            "position[{i}] = {}",
            pose.position[i]
        );
    }
    let (rpy, gimbal) = matrix_to_rpy(&pose.orientation);
    assert!(!gimbal);
    assert!((rpy.roll - -0.527).abs() < 1e-3, "roll = {}", rpy.roll);
    assert!((rpy.pitch - 0.47).abs() < 1e-3, "pitch = {}", rpy.pitch);
    assert!((rpy.yaw - -0.759).abs() < 1e-3, "yaw = {}", rpy.yaw);
}

#[test]
fn pick_posture_fixture() {
    // joints printed to three decimals reproduce their target pose to the
    // few-millimeter level
    let chain = DhChain::gen3_lite();
    let joints = JointAngles([0.166, -2.091, -1.045, 1.527, 1.837, 1.472]);
    let pose = forward_kinematics(&joints, &chain);
    let expect_p = Vector3::new(0.503, 0.122, -0.002);
    assert!((pose.position - expect_p).norm() < 5e-3);
    let (rpy, _) = matrix_to_rpy(&pose.orientation);
    assert!((rpy.roll - 3.077).abs() < 1e-2);
    assert!((rpy.pitch - -0.254).abs() < 1e-2);
    assert!((rpy.yaw - 0.256).abs() < 1e-2);
}

#[test]
fn rpy_round_trips_through_the_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let rpy = RpyAngles {
            roll: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            pitch: rng.random_range(-1.5..1.5),
            yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
        let m = rpy_to_matrix(&rpy);
        let (back, gimbal) = matrix_to_rpy(&m);
        assert!(!gimbal);
        let m2 = rpy_to_matrix(&back);
        assert!((m - m2).norm() < 1e-12);
        assert!(back.pitch.abs() <= std::f64::consts::FRAC_PI_2);
    }
}

#[test]
fn fk_residual_vanishes_on_the_generating_joints() {
    let chain = DhChain::gen3_lite();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let joints = random_joints(&mut rng, &chain);
        let pose = forward_kinematics(&joints, &chain);
        assert!(fk_residual(&joints, &pose, &chain) < 1e-13);
        // a deliberate disturbance shows up at first order
        let mut bumped = joints.0;
        bumped[2] += 1e-4;
        assert!(fk_residual(&JointAngles(bumped), &pose, &chain) > 1e-6);
    }
}
