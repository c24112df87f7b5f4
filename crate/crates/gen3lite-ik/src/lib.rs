//! Kinematics for the Kinova Gen3 Lite, a six-revolute arm whose last three
//! joint axes do not intersect in a common point — so the classic
//! wrist-partitioned shortcut does not apply and the inverse problem is
//! genuinely coupled.
//!
//! The inverse solver works by elimination: the pose constraints are reduced
//! to a single degree-16 polynomial in `tan(θ₁/2)`, whose real roots
//! enumerate every candidate value of the first joint. The remaining five
//! joints follow by back substitution, including the two degenerate branches
//! where the generic formulas lose rank. A final pass scores candidate
//! postures by their clearance from camera sight lines so a controller can
//! pick the one least likely to occlude a workspace camera.
//!
//! Everything is pure computation over immutable values; all functions are
//! safe to call concurrently.

pub mod chain;
pub mod dh;
pub mod ik;
pub mod occlusion;
pub mod poly;

pub use chain::{ChainError, DhChain};
pub use dh::{
    fk_residual, forward_kinematics, frame_origins, matrix_to_rpy, normalize_angle, rpy_to_matrix,
    wrist_vector, JointAngles, Pose, RpyAngles,
};
pub use ik::{solve_ik, Branch, IkSolution, SolutionSet, SolveOptions};
pub use occlusion::{occlusion_score, select_posture, OcclusionError, Scene};
