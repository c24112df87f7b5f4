//! Frame primitives, forward kinematics and pose conversions.
//!
//! Joint angles on the public surface are *actuator* angles — the convention
//! the robot's controller reports and its documentation tabulates. The frame
//! recursion itself runs on *frame* angles, which differ from actuator angles
//! by the fixed per-joint constants in [`ACTUATOR_TO_FRAME_OFFSET`]: the two
//! conventions place their zero references differently.

use crate::chain::DhChain;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::Index;

/// Constant added to each reported actuator angle to obtain the frame angle
/// used by [`joint_rotation`] / [`link_offset`]. The first joint's references
/// coincide, so θ₁ means the same thing in both conventions.
pub const ACTUATOR_TO_FRAME_OFFSET: [f64; 6] = [0.0, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, PI, FRAC_PI_2];

/// Wraps an angle into `(−π, π]`.
pub fn normalize_angle(t: f64) -> f64 {
    -((-t + PI).rem_euclid(TAU) - PI)
}

/// Six joint angles in radians, actuator convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointAngles(pub [f64; 6]);

impl JointAngles {
    /// Every joint wrapped into `(−π, π]`.
    pub fn normalized(self) -> Self {
        JointAngles(self.0.map(normalize_angle))
    }

    /// Largest per-joint angular separation, measured modulo a full turn.
    pub fn max_joint_distance(&self, other: &JointAngles) -> f64 {
        (0..6)
            .map(|i| normalize_angle(self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for JointAngles {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A rigid-body pose: tool position in meters and its rotation matrix.
#[derive(Clone, Copy, Debug)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Matrix3<f64>,
}

impl Pose {
    /// Largest elementwise deviation of `Q·Qᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.orientation * self.orientation.transpose() - Matrix3::identity();
        d.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// True when the rotation part is orthonormal with determinant one,
    /// both within `1e−10`.
    pub fn is_well_formed(&self) -> bool {
        self.orthonormality_error() <= 1e-10 && (self.orientation.determinant() - 1.0).abs() <= 1e-10
    }
}

/// Rotation contributed by one link: `theta` about the joint axis, then the
/// fixed twist `alpha` over to the next axis.
pub fn joint_rotation(theta: f64, alpha: f64) -> Matrix3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Matrix3::new(
        ct, -ca * st, sa * st, //
        st, ca * ct, -sa * ct, //
        0.0, sa, ca,
    )
}

/// Translation contributed by one link, in that link's own frame: `a` along
/// the rotated common normal, `b` along the joint axis.
pub fn link_offset(theta: f64, a: f64, b: f64) -> Vector3<f64> {
    Vector3::new(a * theta.cos(), a * theta.sin(), b)
}

/// Tool pose for the given actuator angles.
pub fn forward_kinematics(joints: &JointAngles, chain: &DhChain) -> Pose {
    let mut position = Vector3::zeros();
    let mut orientation = Matrix3::identity();
    for (i, &joint) in joints.0.iter().enumerate() {
        let t = joint + ACTUATOR_TO_FRAME_OFFSET[i];
        position += orientation * link_offset(t, chain.a[i], chain.b[i]);
        orientation *= joint_rotation(t, chain.alpha[i]);
    }
    Pose { position, orientation }
}

/// Origins of the seven chain frames, base first, tool frame origin last.
pub fn frame_origins(joints: &JointAngles, chain: &DhChain) -> [Vector3<f64>; 7] {
    let mut origins = [Vector3::zeros(); 7];
    let mut position = Vector3::zeros();
    let mut orientation = Matrix3::identity();
    for i in 0..6 {
        let t = joints.0[i] + ACTUATOR_TO_FRAME_OFFSET[i];
        position += orientation * link_offset(t, chain.a[i], chain.b[i]);
        orientation *= joint_rotation(t, chain.alpha[i]);
        origins[i + 1] = position;
    }
    origins
}

/// Origin of the sixth frame, recovered from the target pose alone: the tool
/// offset `b₆` retracted along the tool z-axis. This is the quantity the
/// inverse solver eliminates against, and it is independent of θ₆.
pub fn wrist_vector(pose: &Pose, chain: &DhChain) -> Vector3<f64> {
    pose.position - chain.b[5] * pose.orientation.column(2)
}

/// Mixed-unit pose error: position error norm (m) plus Frobenius distance of
/// the rotations (dimensionless). Zero exactly when the pose is reproduced.
pub fn fk_residual(joints: &JointAngles, target: &Pose, chain: &DhChain) -> f64 {
    let pose = forward_kinematics(joints, chain);
    (pose.position - target.position).norm()
        + (pose.orientation - target.orientation).norm()
}

/// Roll–pitch–yaw angles (radians): fixed-axis rotations about x, y, z,
/// composed as `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpyAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Rotation matrix of the given roll–pitch–yaw angles.
pub fn rpy_to_matrix(rpy: &RpyAngles) -> Matrix3<f64> {
    let (sr, cr) = rpy.roll.sin_cos();
    let (sp, cp) = rpy.pitch.sin_cos();
    let (sy, cy) = rpy.yaw.sin_cos();
    Matrix3::new(
        cy * cp, -sy * cr + cy * sp * sr, sy * sr + cy * sp * cr, //
        sy * cp, cy * cr + sy * sp * sr, -cy * sr + sy * sp * cr, //
        -sp, cp * sr, cp * cr,
    )
}

/// Recovers roll–pitch–yaw from a rotation matrix, pitch in `[−π/2, π/2]`.
///
/// Returns the angles and a gimbal-lock flag: at `|pitch| = π/2` roll and yaw
/// act about the same axis, so roll is pinned to zero, yaw absorbs the free
/// angle, and the flag is set.
pub fn matrix_to_rpy(q: &Matrix3<f64>) -> (RpyAngles, bool) {
    let sp = (-q[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    if pitch.cos().abs() < 1e-9 {
        let yaw = (-q[(0, 1)]).atan2(q[(1, 1)]);
        (RpyAngles { roll: 0.0, pitch, yaw }, true)
    } else {
        let roll = q[(2, 1)].atan2(q[(2, 2)]);
        let yaw = q[(1, 0)].atan2(q[(0, 0)]);
        (RpyAngles { roll, pitch, yaw }, false)
    }
}
