//! Report types, text rendering, batch validation, and the numerical IK
//! oracle behind the `gen3lite` binary.
//!
//! Reports are plain serde structs so `--json` output round-trips losslessly:
//! parse ∘ serialize ∘ parse is the identity on every field. Text rendering
//! prints angles at four decimals, mirroring the precision of the published
//! joint tables; JSON keeps full precision.

use gen3lite_ik::{
    fk_residual, forward_kinematics, matrix_to_rpy, occlusion_score, select_posture, DhChain,
    JointAngles, OcclusionError, Pose, RpyAngles, Scene, SolutionSet, SolveOptions,
};
use nalgebra::{Matrix6, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Angle convention of a report's joint and rpy fields. Positions are always
/// meters and rotation matrices are unitless, whatever the setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Rad,
    Deg,
}

impl Units {
    fn label(self) -> &'static str {
        match self {
            Units::Rad => "rad",
            Units::Deg => "deg",
        }
    }

    fn convert(self, rad: f64) -> f64 {
        match self {
            Units::Rad => rad,
            Units::Deg => rad.to_degrees(),
        }
    }
}

/// Forward-kinematics report: the echoed joints and the tool pose in three
/// redundant forms (position + rpy + full matrix).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkReport {
    /// Joint angles as given, in `units`.
    pub joints: [f64; 6],
    pub units: Units,
    /// False flags a joint outside its limit; the pose is still computed.
    pub within_limits: bool,
    /// Tool position in meters.
    pub position: [f64; 3],
    /// Roll–pitch–yaw of the tool, in `units`.
    pub rpy: RpyAngles,
    /// True when |pitch| = π/2 pinned roll to zero.
    pub gimbal_lock: bool,
    /// Row-major rotation matrix.
    pub matrix: [[f64; 3]; 3],
}

/// Computes the FK report for actuator angles given in radians; `units`
/// only controls how angles are echoed and reported.
pub fn fk_report(joints: &JointAngles, chain: &DhChain, units: Units) -> FkReport {
    let pose = forward_kinematics(joints, chain);
    let (rpy, gimbal_lock) = matrix_to_rpy(&pose.orientation);
    FkReport {
        joints: joints.0.map(|t| units.convert(t)),
        units,
        within_limits: chain.within_limits(joints, 0.0),
        position: pose.position.into(),
        rpy: RpyAngles {
            roll: units.convert(rpy.roll),
            pitch: units.convert(rpy.pitch),
            yaw: units.convert(rpy.yaw),
        },
        gimbal_lock,
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| pose.orientation[(i, j)])),
    }
}

impl FkReport {
    pub fn render(&self) -> String {
        let u = self.units.label();
        let mut out = String::new();
        write!(out, "joints ({u})  ").unwrap();
        for t in self.joints {
            write!(out, " {t:9.4}").unwrap();
        }
        out.push('\n');
        writeln!(
            out,
            "position (m) {:9.4} {:9.4} {:9.4}",
            self.position[0], self.position[1], self.position[2]
        )
        .unwrap();
        writeln!(
            out,
            "rpy ({u})     {:9.4} {:9.4} {:9.4}",
            self.rpy.roll, self.rpy.pitch, self.rpy.yaw
        )
        .unwrap();
        for (i, row) in self.matrix.iter().enumerate() {
            let head = if i == 0 { "matrix      " } else { "            " };
            writeln!(out, "{head} [{:9.4} {:9.4} {:9.4} ]", row[0], row[1], row[2]).unwrap();
        }
        if self.gimbal_lock {
            out.push_str("note: gimbal lock, roll reported as zero\n");
        }
        if !self.within_limits {
            out.push_str("warning: joints outside limits\n");
        }
        out
    }
}

/// The pose (and options) a solve ran against, echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestEcho {
    pub position: [f64; 3],
    /// Present when the request gave the orientation as roll–pitch–yaw.
    pub rpy: Option<RpyAngles>,
    /// Row-major rotation actually solved against.
    pub matrix: [[f64; 3]; 3],
    /// True when a raw matrix input was projected back onto a rotation.
    pub orthonormalized: bool,
    pub scene: Option<String>,
    pub chain: String,
}

/// One row of the solution table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    /// 1-based position in the table.
    pub index: usize,
    /// Actuator angles in radians, each in (−π, π].
    pub joints: [f64; 6],
    /// tan(θ₁/2), absent for the θ₁ = π family.
    pub t1_root: Option<f64>,
    pub residual: f64,
    pub branch: String,
    pub within_limits: bool,
    pub wrist_singular: bool,
    pub feasible: bool,
}

/// The feasible row chosen by the camera-clearance criterion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedPosture {
    /// 1-based row index into `solutions`.
    pub index: usize,
    /// Worst-case link clearance from the sight lines, meters.
    pub score: f64,
}

/// Full result of one inverse solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub request: RequestEcho,
    pub solutions: Vec<SolutionRow>,
    pub feasible_count: usize,
    /// Leading polynomial coefficients trimmed; each marks a θ₁ = π candidate.
    pub trimmed_leading: usize,
    pub selected: Option<SelectedPosture>,
    /// Wall-clock solve time. The one nondeterministic field.
    pub timing_ms: f64,
}

/// Assembles the report rows from a solution set; `selected` is the
/// 0-based winner index into `set.all` with its clearance score.
pub fn solve_report(
    set: &SolutionSet,
    request: RequestEcho,
    selected: Option<(usize, f64)>,
    timing_ms: f64,
) -> SolveReport {
    let solutions = set
        .all
        .iter()
        .enumerate()
        .map(|(i, s)| SolutionRow {
            index: i + 1,
            joints: s.joints.0,
            t1_root: s.t1_root,
            residual: s.residual,
            branch: s.branch.to_string(),
            within_limits: s.within_limits,
            wrist_singular: s.wrist_singular,
            feasible: set.feasible.contains(&i),
        })
        .collect();
    SolveReport {
        request,
        solutions,
        feasible_count: set.feasible.len(),
        trimmed_leading: set.trimmed_leading,
        selected: selected.map(|(i, score)| SelectedPosture { index: i + 1, score }),
        timing_ms,
    }
}

impl SolveReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let p = self.request.position;
        writeln!(out, "target position (m) {:9.4} {:9.4} {:9.4}", p[0], p[1], p[2]).unwrap();
        if let Some(rpy) = &self.request.rpy {
            writeln!(
                out,
                "target rpy (rad)    {:9.4} {:9.4} {:9.4}",
                rpy.roll, rpy.pitch, rpy.yaw
            )
            .unwrap();
        } else {
            let m = &self.request.matrix;
            writeln!(
                out,
                "target matrix       {:9.4} {:9.4} {:9.4} | {:9.4} {:9.4} {:9.4} | {:9.4} {:9.4} {:9.4}",
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]
            )
            .unwrap();
        }
        if self.request.orthonormalized {
            out.push_str("note: input matrix projected onto the nearest rotation\n");
        }
        if self.solutions.is_empty() {
            out.push_str("no solutions\n");
            return out;
        }
        out.push('\n');
        out.push_str(
            " row     theta1    theta2    theta3    theta4    theta5    theta6   residual  branch\n",
        );
        for row in &self.solutions {
            let sel = self.selected.is_some_and(|s| s.index == row.index);
            write!(
                out,
                "{}{:>3}{}",
                if sel { '>' } else { ' ' },
                row.index,
                if row.feasible { '*' } else { ' ' }
            )
            .unwrap();
            for t in row.joints {
                write!(out, " {t:9.4}").unwrap();
            }
            write!(out, "  {:9.1e}  {}", row.residual, row.branch).unwrap();
            if row.wrist_singular {
                out.push_str("  [wrist singular]");
            }
            out.push('\n');
        }
        writeln!(
            out,
            "\n{} solutions, {} feasible (*)",
            self.solutions.len(),
            self.feasible_count
        )
        .unwrap();
        if self.trimmed_leading > 0 {
            writeln!(
                out,
                "{} leading coefficients trimmed (theta1 = pi family)",
                self.trimmed_leading
            )
            .unwrap();
        }
        match (&self.request.scene, self.selected) {
            (Some(_), Some(s)) => {
                writeln!(out, "selected row {} (clearance {:.4} m)", s.index, s.score).unwrap()
            }
            (Some(_), None) => out.push_str("no feasible solutions to select from\n"),
            (None, _) => {}
        }
        out
    }
}

/// Summary of a seeded self-check run. Deterministic for fixed
/// (count, seed): repeated runs render identically, byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub count: u64,
    pub seed: u64,
    pub round_trip_passes: u64,
    /// Trial indices whose seed joints were not recovered within 1e−6.
    pub round_trip_failures: Vec<u64>,
    /// Worst per-joint recovery error over all trials, radians.
    pub worst_recovery: f64,
    /// Worst forward-kinematics residual over every returned solution.
    pub worst_residual: f64,
    /// Largest deduplicated solution count seen (the theory says ≤ 16).
    pub max_solutions: usize,
    pub oracle_trials: u64,
    pub oracle_converged: u64,
    /// Trial indices where a converged oracle answer matched no
    /// analytical solution within 1e−4 per joint.
    pub oracle_mismatches: Vec<u64>,
    pub passed: bool,
}

/// Recovery threshold for a round-trip trial to pass.
pub const ROUND_TRIP_TOL: f64 = 1e-6;
/// Per-joint agreement required between oracle and analytical solutions.
pub const ORACLE_MATCH_TOL: f64 = 1e-4;

/// Runs `count` random in-limit round trips (joints → FK → solve → recover)
/// and an oracle cross-check on every tenth trial: a damped-least-squares
/// solve from a perturbed seed whose converged answer must match one of the
/// analytical solutions.
pub fn run_validate(count: u64, seed: u64, chain: &DhChain) -> ValidateReport {
    let opts = SolveOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidateReport {
        count,
        seed,
        round_trip_passes: 0,
        round_trip_failures: Vec::new(),
        worst_recovery: 0.0,
        worst_residual: 0.0,
        max_solutions: 0,
        oracle_trials: 0,
        oracle_converged: 0,
        oracle_mismatches: Vec::new(),
        passed: false,
    };
    for trial in 0..count {
        let joints = JointAngles(std::array::from_fn(|i| {
            rng.random_range(chain.lower[i]..=chain.upper[i])
        }));
        let pose = forward_kinematics(&joints, chain);
        let set = gen3lite_ik::solve_ik(&pose, chain, &opts);

        let recovery = set
            .all
            .iter()
            .map(|s| s.joints.max_joint_distance(&joints))
            .fold(f64::INFINITY, f64::min);
        report.worst_recovery = report.worst_recovery.max(recovery);
        if recovery <= ROUND_TRIP_TOL {
            report.round_trip_passes += 1;
        } else {
            report.round_trip_failures.push(trial);
        }
        for s in &set.all {
            report.worst_residual = report.worst_residual.max(s.residual);
        }
        report.max_solutions = report.max_solutions.max(set.all.len());

        if trial % 10 == 0 {
            let seed_joints = JointAngles(std::array::from_fn(|i| {
                joints.0[i] + rng.random_range(-0.2..0.2)
            }));
            report.oracle_trials += 1;
            if let Some(found) = numeric_ik_oracle(&pose, chain, &seed_joints) {
                report.oracle_converged += 1;
                let matched = set
                    .all
                    .iter()
                    .any(|s| s.joints.max_joint_distance(&found.joints) <= ORACLE_MATCH_TOL);
                if !matched {
                    report.oracle_mismatches.push(trial);
                }
            }
        }
    }
    report.passed = report.round_trip_failures.is_empty()
        && report.oracle_mismatches.is_empty()
        && report.max_solutions <= 16;
    report
}

impl ValidateReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "validate: {} trials, seed {}", self.count, self.seed).unwrap();
        writeln!(
            out,
            "round trip: {}/{} recovered within {ROUND_TRIP_TOL:.0e}",
            self.round_trip_passes, self.count
        )
        .unwrap();
        if !self.round_trip_failures.is_empty() {
            writeln!(out, "failed trials: {:?}", self.round_trip_failures).unwrap();
        }
        writeln!(out, "worst recovery: {:.2e} rad", self.worst_recovery).unwrap();
        writeln!(out, "worst residual: {:.2e}", self.worst_residual).unwrap();
        writeln!(out, "largest solution set: {}", self.max_solutions).unwrap();
        writeln!(
            out,
            "oracle: {} converged of {} runs, {} mismatches",
            self.oracle_converged,
            self.oracle_trials,
            self.oracle_mismatches.len()
        )
        .unwrap();
        if !self.oracle_mismatches.is_empty() {
            writeln!(out, "mismatched trials: {:?}", self.oracle_mismatches).unwrap();
        }
        out.push_str(if self.passed { "PASS\n" } else { "FAIL\n" });
        out
    }
}

/// A converged damped-least-squares answer.
#[derive(Clone, Copy, Debug)]
pub struct OracleResult {
    /// Actuator angles wrapped into (−π, π].
    pub joints: JointAngles,
    /// Damped steps taken before the convergence check passed.
    pub iterations: usize,
}

/// Iterative inverse kinematics, used only to cross-check the analytical
/// solver: damped least squares on the pose error from `seed`, Jacobian by
/// central differences (step 1e−6 rad), damping λ = 1e−3, at most 500
/// iterations, converged when the FK residual drops below 1e−8.
///
/// Returns `None` when the iteration fails to converge — which says nothing
/// about the analytical path; a numerical method finds at most one solution
/// and may stall far from all of them.
pub fn numeric_ik_oracle(
    pose: &Pose,
    chain: &DhChain,
    seed: &JointAngles,
) -> Option<OracleResult> {
    const STEP: f64 = 1e-6;
    const LAMBDA_SQ: f64 = 1e-6;
    const RESIDUAL_TOL: f64 = 1e-8;
    const MAX_ITERATIONS: usize = 500;

    // position error and the small-angle rotation error ½ Σ qᵢ × qᵗᵢ, both
    // zero exactly at a solution
    let error = |joints: &JointAngles| -> Vector6<f64> {
        let cur = forward_kinematics(joints, chain);
        let dp = pose.position - cur.position;
        let mut dw = Vector3::zeros();
        for c in 0..3 {
            let a: Vector3<f64> = cur.orientation.column(c).into();
            let b: Vector3<f64> = pose.orientation.column(c).into();
            dw += a.cross(&b);
        }
        dw *= 0.5;
        Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z)
    };

    let mut theta = *seed;
    for iterations in 0..=MAX_ITERATIONS {
        if fk_residual(&theta, pose, chain) < RESIDUAL_TOL {
            return Some(OracleResult { joints: theta.normalized(), iterations });
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        let mut jac = Matrix6::<f64>::zeros();
        for j in 0..6 {
            let mut plus = theta;
            plus.0[j] += STEP;
            let mut minus = theta;
            minus.0[j] -= STEP;
            jac.set_column(j, &((error(&plus) - error(&minus)) / (2.0 * STEP)));
        }
        let e = error(&theta);
        let damped = jac * jac.transpose() + Matrix6::identity() * LAMBDA_SQ;
        let y = damped.lu().solve(&e)?;
        let step = jac.transpose() * y;
        theta = JointAngles(std::array::from_fn(|i| theta.0[i] - step[i]));
    }
    None
}

/// Clearance score of every solution in the set, by row order. Thin wrapper
/// used by the selection path so the binary needs no occlusion imports.
pub fn try_select(
    set: &SolutionSet,
    scene: &Scene,
    chain: &DhChain,
) -> Result<Option<(usize, f64)>, OcclusionError> {
    match select_posture(set, scene, chain) {
        Ok(pick) => Ok(Some(pick)),
        Err(OcclusionError::NoFeasibleSolutions) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Clearance of one joint vector against a scene, re-exported for the binary.
pub fn posture_score(joints: &JointAngles, scene: &Scene, chain: &DhChain) -> f64 {
    occlusion_score(joints, scene, chain)
}
