//! The inverse solver: elimination of the pose constraints down to a single
//! degree-16 polynomial in `tan(θ₁/2)`, enumeration of its real roots, and
//! back substitution of the remaining five joints — including the two
//! branches where the generic formulas lose rank.
//!
//! Everything here works in the *frame* angle convention internally; only
//! [`IkSolution::joints`] is mapped back to actuator angles. The first joint
//! is unaffected (its offset is zero), which is what lets the whole pipeline
//! be phrased in θ₁ directly.

use crate::chain::DhChain;
use crate::dh::{
    fk_residual, normalize_angle, wrist_vector, JointAngles, Pose, ACTUATOR_TO_FRAME_OFFSET,
};
use crate::poly::{companion_eigenvalues, interpolate, DensePolynomial};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use std::sync::LazyLock;

/// Which formula family produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Plain back substitution: one solution per θ₁ root.
    #[serde(rename = "generic")]
    Generic,
    /// The odd part of the θ₄ constraint vanished; θ₄ came from an arccos
    /// and both signs were taken.
    #[serde(rename = "special_V_zero")]
    SpecialVZero,
    /// The 2×2 system for (θ₃−θ₂) lost rank; the angle came from a
    /// half-angle quadratic with up to two roots.
    #[serde(rename = "special_denominator_zero")]
    SpecialDenominatorZero,
    /// θ₁ = π, where the half-angle parameter is at infinity and the
    /// polynomial loses leading coefficients instead of gaining a root.
    #[serde(rename = "theta1_pi")]
    Theta1Pi,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Generic => "generic",
            Branch::SpecialVZero => "special_V_zero",
            Branch::SpecialDenominatorZero => "special_denominator_zero",
            Branch::Theta1Pi => "theta1_pi",
        })
    }
}

/// One joint-space solution of the inverse problem.
#[derive(Clone, Debug, Serialize)]
pub struct IkSolution {
    /// Actuator angles, each wrapped into (−π, π].
    pub joints: JointAngles,
    /// tan(θ₁/2) for the root this solution came from; `None` when θ₁ = π
    /// (the half-angle parameter is at infinity).
    pub t1_root: Option<f64>,
    /// Forward-kinematics error against the target: position norm (m) plus
    /// rotation Frobenius distance.
    pub residual: f64,
    /// True when every joint respects the chain's limits.
    pub within_limits: bool,
    /// True when sin θ₅ ≈ 0: the pose does not constrain θ₆, which was fixed
    /// by convention. Such solutions never enter the feasible set.
    pub wrist_singular: bool,
    pub branch: Branch,
}

/// Every deduplicated solution for one target pose.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub target: Pose,
    /// All surviving solutions, sorted by θ₁ then θ₄.
    pub all: Vec<IkSolution>,
    /// Indices into `all` of solutions within joint limits and away from the
    /// wrist singularity.
    pub feasible: Vec<usize>,
    /// Leading coefficients trimmed from the half-angle polynomial; each one
    /// is a root pushed to infinity, i.e. a θ₁ = π candidate.
    pub trimmed_leading: usize,
}

impl SolutionSet {
    pub fn feasible_solutions(&self) -> impl Iterator<Item = &IkSolution> {
        self.feasible.iter().map(|&i| &self.all[i])
    }
}

/// Tolerances of the solve pipeline. The defaults are what every consumer
/// should use; they are knobs so tests can probe the edges.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Candidates whose forward-kinematics residual exceeds this are dropped.
    pub residual_max: f64,
    /// Two solutions closer than this on every joint (mod 2π) are duplicates;
    /// the smaller-residual one is kept.
    pub dedupe_tol: f64,
    /// Slack added to the joint limits when marking feasibility.
    pub limit_slack: f64,
    /// Relative threshold for trimming leading polynomial coefficients.
    pub leading_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            residual_max: 1e-6,
            dedupe_tol: 1e-5,
            limit_slack: 1e-9,
            leading_tol: 1e-10,
        }
    }
}

/// The six coefficients of the two linear constraints in
/// (sin(θ₃−θ₂), cos(θ₃−θ₂)): the A row couples the tool z-axis to joint 4,
/// the B row closes the position loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// cos θ₄ as a function of θ₁ alone, from projecting the wrist point onto
/// the first joint's axes. Deliberately not clamped: values outside [−1, 1]
/// mark θ₁ branches with no real θ₄.
pub fn c4_of_theta1(theta1: f64, r: &Vector3<f64>, chain: &DhChain) -> f64 {
    let (s1, c1) = theta1.sin_cos();
    (r[0] * s1 - r[1] * c1 + chain.b[2] - chain.b[1]) / chain.b[4]
}

/// The two rank-1 constraint rows at a given (θ₁, θ₄).
pub fn ab_coefficients(
    theta1: f64,
    s4: f64,
    c4: f64,
    pose: &Pose,
    r: &Vector3<f64>,
    chain: &DhChain,
) -> AbCoefficients {
    Elim::with_wrist(pose, *r, chain).ab(theta1, s4, c4)
}

/// Odd/even split of the elimination function φ in s₄, reduced modulo
/// s₄² = 1 − c₄²: the contract is φ(±σ) = ±V·σ + W for σ = √(1−c₄²).
#[derive(Clone, Copy, Debug)]
pub struct VwSplit {
    pub v: f64,
    pub w: f64,
    /// cos θ₄ at this θ₁, unclamped.
    pub c4: f64,
    /// max |φ| over the sample points — the natural scale for deciding
    /// whether V is "zero".
    pub scale: f64,
}

/// Splits φ(s₄) at the given θ₁ into its odd and even parts.
///
/// φ is a degree-6 polynomial in s₄, so it is sampled at 7 Chebyshev points,
/// fitted exactly, and reduced modulo (s₄² − (1 − c₄²)). No hand-expanded
/// coefficient formulas are involved.
pub fn vw_split(theta1: f64, pose: &Pose, r: &Vector3<f64>, chain: &DhChain) -> VwSplit {
    Elim::with_wrist(pose, *r, chain).vw(theta1)
}

/// The half-angle polynomial's value at T₁ = tan(θ₁/2), with the Weierstrass
/// denominators cleared by (1+T₁²)⁸ so the result is polynomial in T₁.
pub fn univariate_eval(t1: f64, pose: &Pose, chain: &DhChain) -> f64 {
    Elim::new(pose, chain).univariate(t1)
}

/// Constructs the degree-16 half-angle polynomial by sampling
/// [`univariate_eval`] at 17 Chebyshev nodes on [−4, 4] and interpolating.
/// Seventeen samples determine a degree-16 polynomial exactly, so roots
/// outside the node span (|θ₁| ≳ 2.65 rad) are still recovered; the span
/// only sets where the fit is best conditioned.
pub fn build_univariate(pose: &Pose, chain: &DhChain) -> DensePolynomial {
    let elim = Elim::new(pose, chain);
    let nodes = cheb_nodes17();
    let values: Vec<f64> = nodes.iter().map(|&t| elim.univariate(t)).collect();
    interpolate(&nodes, &values, 16).expect("distinct Chebyshev nodes")
}

/// Back-substitutes every joint from a θ₁ root of the half-angle polynomial,
/// dispatching to the rank-loss branches when the generic formulas degrade.
/// Returns one solution generically, two per degenerate branch, none when
/// this θ₁ admits no real θ₄. Solutions are *not* residual-filtered here.
pub fn back_substitute(theta1: f64, pose: &Pose, chain: &DhChain) -> Vec<IkSolution> {
    let elim = Elim::new(pose, chain);
    elim.raw_back_substitute(theta1)
        .into_iter()
        .map(|raw| finalize(raw, pose, chain, None, 1e-9))
        .collect()
}

/// Forces the V = 0 branch: θ₄ = ±arccos(c₄), both signs substituted onward.
pub fn special_case_v_zero(theta1: f64, pose: &Pose, chain: &DhChain) -> Vec<IkSolution> {
    let elim = Elim::new(pose, chain);
    let c4 = elim.c4(theta1);
    if c4.abs() > 1.0 + C4_OVERSHOOT {
        return Vec::new();
    }
    let t4 = c4.clamp(-1.0, 1.0).acos();
    let mut theta4s = vec![t4];
    if t4 > 1e-12 {
        theta4s.push(-t4);
    }
    let mut out = Vec::new();
    for th4 in theta4s {
        let (s4, c4n) = th4.sin_cos();
        for (s32, c32, _) in elim.theta32_candidates(theta1, s4, c4n) {
            let raw = elim.finish(theta1, th4, s32, c32, Branch::SpecialVZero);
            out.push(finalize(raw, pose, chain, None, 1e-9));
        }
    }
    out
}

/// Forces the rank-loss branch for (θ₃−θ₂): the better-conditioned of the two
/// constraint rows is solved alone through the half-angle substitution,
/// yielding up to two angles, each substituted onward.
pub fn special_case_denominator_zero(
    theta1: f64,
    s4: f64,
    c4: f64,
    pose: &Pose,
    chain: &DhChain,
) -> Vec<IkSolution> {
    let elim = Elim::new(pose, chain);
    let coeffs = elim.ab(theta1, s4, c4);
    let th4 = s4.atan2(c4);
    elim.theta32_fallback(&coeffs)
        .into_iter()
        .map(|(s32, c32, _)| {
            let raw = elim.finish(theta1, th4, s32, c32, Branch::SpecialDenominatorZero);
            finalize(raw, pose, chain, None, 1e-9)
        })
        .collect()
}

/// Solves the full inverse problem: every real θ₁ root, every branch, then
/// residual filtering, joint-space deduplication (smaller residual wins),
/// sorting by (θ₁, θ₄), and feasibility marking.
///
/// The chain must share the factory zero pattern (only the second link has
/// an in-plane length); the numeric parameters themselves are honored.
pub fn solve_ik(pose: &Pose, chain: &DhChain, opts: &SolveOptions) -> SolutionSet {
    let elim = Elim::new(pose, chain);
    let (theta1s, trimmed) = elim.theta1_roots(opts.leading_tol);

    let mut candidates: Vec<IkSolution> = Vec::new();
    for &t1 in &theta1s {
        // the exact-π entry exists only when the polynomial dropped degree
        let pi_override = (trimmed > 0 && t1 == PI).then_some(Branch::Theta1Pi);
        for raw in elim.raw_back_substitute(t1) {
            let sol = finalize(raw, pose, chain, pi_override, opts.limit_slack);
            if sol.residual < opts.residual_max {
                candidates.push(sol);
            }
        }
    }

    let mut all: Vec<IkSolution> = Vec::new();
    for sol in candidates {
        match all
            .iter_mut()
            .find(|kept| kept.joints.max_joint_distance(&sol.joints) < opts.dedupe_tol)
        {
            Some(kept) => {
                if sol.residual < kept.residual {
                    *kept = sol;
                }
            }
            None => all.push(sol),
        }
    }
    all.sort_by(|x, y| {
        x.joints[0]
            .total_cmp(&y.joints[0])
            .then(x.joints[3].total_cmp(&y.joints[3]))
    });

    let feasible = all
        .iter()
        .enumerate()
        .filter(|(_, s)| s.within_limits && !s.wrist_singular)
        .map(|(i, _)| i)
        .collect();

    SolutionSet { target: *pose, all, feasible, trimmed_leading: trimmed }
}

// ---------------------------------------------------------------------------
// internals

/// |c₄| may overshoot 1 by this much and still count as a boundary touch.
const C4_OVERSHOOT: f64 = 1e-9;
/// |s₄| from the generic −W/V may overshoot 1 by this much before the θ₁
/// root is rejected as spurious.
const S4_OVERSHOOT: f64 = 1e-6;
/// Acceptance band for the Cramer solution's unit-circle check.
const CIRCLE_TOL: f64 = 1e-6;
/// Below this |sin θ₅| the wrist is singular and θ₆ unconstrained.
const WRIST_SINGULAR_S5: f64 = 1e-9;
/// Scan grid resolution over θ₁ ∈ [−π, π].
const GRID_N: usize = 768;
/// |s₄| levels whose θ₁ preimages are pinned into the scan grid: root pairs
/// born near a c₄ = ±1 crossing are narrower than any uniform grid.
const S4_LADDER: [f64; 11] =
    [1e-7, 1e-6, 1e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1];

static CHEB7: LazyLock<[f64; 7]> =
    LazyLock::new(|| std::array::from_fn(|k| ((2 * k + 1) as f64 * PI / 14.0).cos()));

fn cheb_nodes17() -> Vec<f64> {
    (0..17).map(|k| 4.0 * ((2 * k + 1) as f64 * PI / 34.0).cos()).collect()
}

/// Everything the elimination needs about one target: the orientation, the
/// sixth-frame origin, and the chain constants.
struct Elim {
    q: Matrix3<f64>,
    r: Vector3<f64>,
    b: [f64; 6],
    a2: f64,
}

struct RawSolution {
    frame_joints: [f64; 6],
    branch: Branch,
    wrist_singular: bool,
}

fn finalize(
    raw: RawSolution,
    pose: &Pose,
    chain: &DhChain,
    branch_override: Option<Branch>,
    limit_slack: f64,
) -> IkSolution {
    let mut actuator = [0.0; 6];
    for i in 0..6 {
        actuator[i] = normalize_angle(raw.frame_joints[i] - ACTUATOR_TO_FRAME_OFFSET[i]);
    }
    let joints = JointAngles(actuator);
    let branch = branch_override.unwrap_or(raw.branch);
    let t1_root = match branch {
        Branch::Theta1Pi => None,
        _ => Some((raw.frame_joints[0] / 2.0).tan()),
    };
    IkSolution {
        joints,
        t1_root,
        residual: fk_residual(&joints, pose, chain),
        within_limits: chain.within_limits(&joints, limit_slack),
        wrist_singular: raw.wrist_singular,
        branch,
    }
}

impl Elim {
    fn new(pose: &Pose, chain: &DhChain) -> Self {
        Self::with_wrist(pose, wrist_vector(pose, chain), chain)
    }

    fn with_wrist(pose: &Pose, r: Vector3<f64>, chain: &DhChain) -> Self {
        debug_assert!(
            chain.a[0] == 0.0 && chain.a[2..].iter().all(|&x| x == 0.0),
            "the elimination assumes only the second link has in-plane length"
        );
        Elim { q: pose.orientation, r, b: chain.b, a2: chain.a[1] }
    }

    fn c4(&self, theta1: f64) -> f64 {
        let (s1, c1) = theta1.sin_cos();
        (self.r[0] * s1 - self.r[1] * c1 + self.b[2] - self.b[1]) / self.b[4]
    }

    fn ab(&self, theta1: f64, s4: f64, c4: f64) -> AbCoefficients {
        let (s1, c1) = theta1.sin_cos();
        let (q13, q23, q33) = (self.q[(0, 2)], self.q[(1, 2)], self.q[(2, 2)]);
        let rc = self.r[0] * c1 + self.r[1] * s1;
        let z = self.r[2] - self.b[0];
        AbCoefficients {
            a1: -q33 * s4,
            a2: (q13 * c1 + q23 * s1) * s4,
            a3: q13 * c4 * s1 - q23 * c1 * c4,
            b1: 2.0 * z * self.b[4] * s4 - 2.0 * rc * self.b[3],
            b2: -2.0 * self.b[3] * z - 2.0 * self.b[4] * s4 * rc,
            b3: z * z
                + rc * rc
                + self.b[3] * self.b[3]
                + self.b[4] * self.b[4] * s4 * s4
                - self.a2 * self.a2,
        }
    }

    /// The elimination function: zero exactly when (θ₁, s₄, c₄) admits a
    /// consistent (θ₃−θ₂). Degree 6 in s₄.
    fn phi(&self, theta1: f64, s4: f64, c4: f64) -> f64 {
        let c = self.ab(theta1, s4, c4);
        let x = c.a2 * c.b3 - c.a3 * c.b2;
        let y = c.a3 * c.b1 - c.a1 * c.b3;
        let d = c.a1 * c.b2 - c.a2 * c.b1;
        x * x + y * y - d * d
    }

    /// φ evaluated at s₄ = sign·σ(θ₁); continuous in θ₁ because σ is clamped
    /// at zero where c₄ wanders past ±1.
    fn factor(&self, theta1: f64, sign: f64) -> f64 {
        let c4 = self.c4(theta1);
        let sigma = (1.0 - c4 * c4).max(0.0).sqrt();
        self.phi(theta1, sign * sigma, c4)
    }

    fn vw(&self, theta1: f64) -> VwSplit {
        let c4 = self.c4(theta1);
        let values: Vec<f64> = CHEB7.iter().map(|&s| self.phi(theta1, s, c4)).collect();
        let fit = interpolate(&CHEB7[..], &values, 6).expect("distinct Chebyshev nodes");
        let c = fit.coeffs();
        let sig2 = 1.0 - c4 * c4;
        VwSplit {
            w: c[0] + c[2] * sig2 + c[4] * sig2 * sig2 + c[6] * sig2 * sig2 * sig2,
            v: c[1] + c[3] * sig2 + c[5] * sig2 * sig2,
            c4,
            scale: values.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }

    fn univariate(&self, t1_half: f64) -> f64 {
        let theta1 = 2.0 * t1_half.atan();
        let c4 = self.c4(theta1);
        let sig2 = 1.0 - c4 * c4;
        let b5sq = self.b[4] * self.b[4];
        // the factored form evaluates each factor near its own root with full
        // relative accuracy; the quadratic form is the polynomial's real
        // continuation where σ² < 0
        let g = if sig2 >= 0.0 {
            b5sq * self.factor(theta1, 1.0) * self.factor(theta1, -1.0)
        } else {
            let vw = self.vw(theta1);
            b5sq * (vw.w * vw.w - sig2 * vw.v * vw.v)
        };
        (1.0 + t1_half * t1_half).powi(8) * g
    }

    /// θ₁ values where c₄(θ₁) equals the target level: the solutions of a
    /// sinusoid equation, at most two per turn.
    fn level_candidates(&self, c4_target: f64) -> Vec<f64> {
        let rho = self.r[0].hypot(self.r[1]);
        if rho == 0.0 {
            return Vec::new();
        }
        let psi = (-self.r[1]).atan2(self.r[0]);
        let q = (self.b[4] * c4_target - self.b[2] + self.b[1]) / rho;
        if q.abs() > 1.0 {
            return Vec::new();
        }
        let a = q.asin();
        vec![normalize_angle(a - psi), normalize_angle(PI - a - psi)]
    }

    /// θ₁ values where c₄ = ±1 exactly: tangential double roots live here.
    fn boundary_candidates(&self) -> Vec<f64> {
        let mut out = self.level_candidates(1.0);
        out.extend(self.level_candidates(-1.0));
        out
    }

    fn newton_polish(&self, start: f64, sign: f64) -> Option<f64> {
        let mut t = start;
        for _ in 0..80 {
            let h = 1e-7;
            let f = self.factor(t, sign);
            let df = (self.factor(t + h, sign) - self.factor(t - h, sign)) / (2.0 * h);
            if df == 0.0 || !df.is_finite() {
                return None;
            }
            let step = (f / df).clamp(-0.05, 0.05);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        // converged iff |f| is tiny against the local scale
        let f = self.factor(t, sign).abs();
        let scale = self
            .factor(t + 0.01, sign)
            .abs()
            .max(self.factor(t - 0.01, sign).abs())
            .max(1e-300);
        (f <= 1e-6 * scale).then_some(t)
    }

    /// Bisection run to floating-point convergence: back substitution near
    /// c₄ = ±1 needs θ₁ to the last ulp (the pose error grows like the
    /// square root of the θ₁ error there).
    fn bisect(&self, mut a: f64, mut b: f64, sign: f64) -> f64 {
        let mut fa = self.factor(a, sign);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                return m;
            }
            let fm = self.factor(m, sign);
            if fm == 0.0 {
                return m;
            }
            if (fa < 0.0) != (fm < 0.0) {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }

    /// Every θ₁ in (−π, π] with G(θ₁) = 0, plus the trim count that signals
    /// the θ₁ = π candidate.
    fn theta1_roots(&self, leading_tol: f64) -> (Vec<f64>, usize) {
        let nodes = cheb_nodes17();
        let values: Vec<f64> = nodes.iter().map(|&t| self.univariate(t)).collect();
        let poly = interpolate(&nodes, &values, 16).expect("distinct Chebyshev nodes");
        let (eigenvalues, trimmed) = match companion_eigenvalues(&poly, leading_tol) {
            Ok(x) => x,
            // an identically-zero fit leaves the scan machinery to do the work
            Err(_) => (Vec::new(), poly.coeffs().len() - 1),
        };

        let mut pts: Vec<f64> = Vec::with_capacity(GRID_N + 8 * eigenvalues.len() + 64);
        let mut roots: Vec<f64> = Vec::new();
        for e in &eigenvalues {
            let th = 2.0 * e.re.atan();
            pts.push(th);
            // fitted-coefficient noise makes companion eigenvalues rough
            // hints only; polish every real part against the true factors
            // and let the convergence check decide membership
            for sign in [1.0, -1.0] {
                if let Some(t) = self.newton_polish(th, sign) {
                    if t > -PI && t <= PI {
                        roots.push(t);
                        pts.push(t - 1e-7);
                        pts.push(t + 1e-7);
                    }
                }
            }
        }
        for k in 0..GRID_N {
            pts.push(-PI + TAU * (k as f64) / ((GRID_N - 1) as f64));
        }
        for s in S4_LADDER {
            let level = (1.0 - s * s).sqrt();
            pts.extend(self.level_candidates(level));
            pts.extend(self.level_candidates(-level));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();

        for sign in [1.0, -1.0] {
            let fv: Vec<f64> = pts.iter().map(|&t| self.factor(t, sign)).collect();
            for i in 0..pts.len() - 1 {
                if (fv[i] < 0.0) != (fv[i + 1] < 0.0) {
                    let m = self.bisect(pts[i], pts[i + 1], sign);
                    // keep whichever of {bisection midpoint, polished point}
                    // lands deeper in the zero set: finite-difference Newton
                    // wanders when f varies over sub-1e-9 scales
                    match self.newton_polish(m, sign) {
                        Some(t)
                            if self.factor(t, sign).abs() < self.factor(m, sign).abs() =>
                        {
                            roots.push(t)
                        }
                        _ => roots.push(m),
                    }
                }
            }
            // tangential roots and sub-grid root pairs show no sign change at
            // grid resolution; drive each wrong-signed interior extremum
            // toward zero and look again
            for i in 1..pts.len() - 1 {
                let dir = if fv[i - 1] > fv[i] && fv[i] < fv[i + 1] && fv[i] > 0.0 {
                    1.0
                } else if fv[i - 1] < fv[i] && fv[i] > fv[i + 1] && fv[i] < 0.0 {
                    -1.0
                } else {
                    continue;
                };
                let (lo, hi) = (pts[i - 1], pts[i + 1]);
                let (mut a, mut b) = (lo, hi);
                for _ in 0..60 {
                    let m1 = a + (b - a) / 3.0;
                    let m2 = b - (b - a) / 3.0;
                    if dir * self.factor(m1, sign) < dir * self.factor(m2, sign) {
                        b = m2;
                    } else {
                        a = m1;
                    }
                }
                let tm = 0.5 * (a + b);
                let fm = self.factor(tm, sign);
                if (fm < 0.0) != (fv[i] < 0.0) {
                    // the refinement crossed zero: a root pair was hiding
                    for (aa, bb) in [(lo, tm), (tm, hi)] {
                        let m = self.bisect(aa, bb, sign);
                        roots.push(self.newton_polish(m, sign).unwrap_or(m));
                    }
                } else {
                    let scale = self
                        .factor(tm + 0.01, sign)
                        .abs()
                        .max(self.factor(tm - 0.01, sign).abs())
                        .max(1e-300);
                    if fm.abs() <= 1e-6 * scale {
                        // a genuine tangential double root
                        roots.push(tm);
                    }
                }
            }
        }

        roots.extend(self.boundary_candidates());
        if trimmed > 0 {
            roots.push(PI);
        }
        roots.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for t in roots {
            // genuinely distinct roots can sit closer than 1e-9 (sibling
            // branches near c₄ = ±1); merge only float-level duplicates
            if out.last().is_none_or(|&last| t - last > 1e-12) {
                out.push(t);
            }
        }
        (out, trimmed)
    }

    fn theta32_candidates(&self, theta1: f64, s4: f64, c4: f64) -> Vec<(f64, f64, Branch)> {
        let c = self.ab(theta1, s4, c4);
        let d = c.a1 * c.b2 - c.a2 * c.b1;
        if d != 0.0 {
            let s32 = (c.a2 * c.b3 - c.a3 * c.b2) / d;
            let c32 = (c.a3 * c.b1 - c.a1 * c.b3) / d;
            // the pair must land on the unit circle; far off means the 2×2
            // system has lost rank and the fallback owns this θ₁
            if (s32 * s32 + c32 * c32 - 1.0).abs() <= CIRCLE_TOL {
                return vec![(s32, c32, Branch::Generic)];
            }
        }
        self.theta32_fallback(&c)
    }

    /// Rank-loss path: solve the better-conditioned single row
    /// a·sin + b·cos + cst = 0 via the half-angle substitution
    /// (cst − b)·T² + 2a·T + (cst + b) = 0.
    fn theta32_fallback(&self, c: &AbCoefficients) -> Vec<(f64, f64, Branch)> {
        let (a, b, cst) = if c.b1.hypot(c.b2) >= c.a1.hypot(c.a2) {
            (c.b1, c.b2, c.b3)
        } else {
            (c.a1, c.a2, c.a3)
        };
        let qa = cst - b;
        let qb = 2.0 * a;
        let qc = cst + b;
        let scale = qa.abs().max(qb.abs()).max(qc.abs());
        if scale == 0.0 {
            return Vec::new();
        }
        let mut angles: Vec<f64> = Vec::new();
        if qa.abs() <= 1e-12 * scale {
            // the quadratic degenerates: θ = π is one root, the other linear
            angles.push(PI);
            if qb.abs() > 1e-12 * scale {
                angles.push(2.0 * (-qc / qb).atan());
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sd = disc.sqrt();
                angles.push(2.0 * ((-qb + sd) / (2.0 * qa)).atan());
                angles.push(2.0 * ((-qb - sd) / (2.0 * qa)).atan());
            }
        }
        angles
            .into_iter()
            .map(|t| (t.sin(), t.cos(), Branch::SpecialDenominatorZero))
            .collect()
    }

    /// Recovers θ₅, θ₂, θ₆, θ₃ once (θ₁, θ₄, θ₃−θ₂) are fixed.
    fn finish(&self, theta1: f64, th4: f64, s32: f64, c32: f64, branch: Branch) -> RawSolution {
        let (s1, c1) = theta1.sin_cos();
        let (s4, c4) = th4.sin_cos();
        let (q13, q23, q33) = (self.q[(0, 2)], self.q[(1, 2)], self.q[(2, 2)]);
        let m13 = (q13 * c1 + q23 * s1) * c32 - q33 * s32;
        let m23 = -q13 * s1 + q23 * c1;
        let m33 = (q13 * c1 + q23 * s1) * s32 + q33 * c32;
        let c5 = -m33;
        // both rows carry sin θ₅; conditioning picks the divisor
        let s5 = if s4.abs() >= c4.abs() { m23 / s4 } else { m13 / c4 };
        let th5 = s5.atan2(c5);
        let mut s5e = th5.sin();
        let wrist_singular = s5e.abs() < WRIST_SINGULAR_S5;
        if wrist_singular {
            // deterministic θ₆ convention at the singularity: floor the
            // divisor, keep its sign
            s5e = WRIST_SINGULAR_S5.copysign(if s5e == 0.0 { 1.0 } else { s5e });
        }
        let rc = self.r[0] * c1 + self.r[1] * s1;
        let z = self.r[2] - self.b[0];
        let c2 = (rc - self.b[4] * c32 * s4 - self.b[3] * s32) / self.a2;
        let s2 = (z + self.b[4] * s32 * s4 - self.b[3] * c32) / self.a2;
        let th2 = s2.atan2(c2);
        let q = &self.q;
        let c6 = (q[(0, 0)] * c1 * s32 + q[(1, 0)] * s1 * s32 + q[(2, 0)] * c32) / s5e;
        let s6 = (q[(0, 1)] * c1 * s32 + q[(1, 1)] * s1 * s32 + q[(2, 1)] * c32) / (-s5e);
        let th6 = s6.atan2(c6);
        let th3 = s32.atan2(c32) + th2;
        RawSolution {
            frame_joints: [theta1, th2, th3, th4, th5, th6],
            branch,
            wrist_singular,
        }
    }

    fn raw_back_substitute(&self, theta1: f64) -> Vec<RawSolution> {
        let mut out = Vec::new();
        let c4 = self.c4(theta1);
        if c4.abs() > 1.0 + C4_OVERSHOOT {
            return out;
        }
        let vw = self.vw(theta1);
        let c4c = c4.clamp(-1.0, 1.0);
        let mut theta4s: Vec<(f64, Branch)> = Vec::new();
        if vw.v.abs() > 1e-8 * vw.scale.max(vw.w.abs()) {
            let s4 = -vw.w / vw.v;
            if s4.abs() > 1.0 + S4_OVERSHOOT {
                return out;
            }
            theta4s.push((s4.clamp(-1.0, 1.0).atan2(c4c), Branch::Generic));
        } else {
            // the odd part vanished: s₄ is unconstrained by φ, both arccos
            // branches are real candidates
            let t4 = c4c.acos();
            theta4s.push((t4, Branch::SpecialVZero));
            if t4 > 1e-12 {
                theta4s.push((-t4, Branch::SpecialVZero));
            }
        }
        for (th4, br4) in theta4s {
            let (s4, c4n) = th4.sin_cos();
            for (s32, c32, br32) in self.theta32_candidates(theta1, s4, c4n) {
                let branch = if br4 != Branch::Generic { br4 } else { br32 };
                out.push(self.finish(theta1, th4, s32, c32, branch));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dh::forward_kinematics;

    fn table_iv_pose() -> (Pose, DhChain) {
        let chain = DhChain::gen3_lite();
        let joints = JointAngles([1.0, 1.0, 1.5, 0.0, 0.5, -1.5]);
        (forward_kinematics(&joints, &chain), chain)
    }

    #[test]
    fn ab_trivial_identities() {
        let (pose, chain) = table_iv_pose();
        let r = wrist_vector(&pose, &chain);
        // s4 = 0 kills the first coefficient
        let c = ab_coefficients(0.7, 0.0, 1.0, &pose, &r, &chain);
        assert_eq!(c.a1, 0.0);
        // b3 is the literal closed form
        let (s4, c4) = (0.3_f64, 0.9_f64);
        let c = ab_coefficients(0.7, s4, c4, &pose, &r, &chain);
        let (s1, c1) = 0.7_f64.sin_cos();
        let rc = r[0] * c1 + r[1] * s1;
        let z = r[2] - chain.b[0];
        let expect = z * z + rc * rc + chain.b[3] * chain.b[3]
            + chain.b[4] * chain.b[4] * s4 * s4
            - chain.a[1] * chain.a[1];
        assert_eq!(c.b3, expect);
    }

    #[test]
    fn c4_is_constant_when_wrist_sits_on_axis() {
        let chain = DhChain::gen3_lite();
        let r = Vector3::new(0.0, 0.0, 0.4);
        let expect = (chain.b[2] - chain.b[1]) / chain.b[4];
        for theta1 in [-2.0, -0.3, 0.0, 1.1, 3.0] {
            assert_eq!(c4_of_theta1(theta1, &r, &chain), expect);
        }
    }

    #[test]
    fn vw_split_matches_phi_at_both_sigma_signs() {
        let (pose, chain) = table_iv_pose();
        let r = wrist_vector(&pose, &chain);
        let elim = Elim::new(&pose, &chain);
        for theta1 in [-2.5, -1.0, 0.3, 0.993, 2.0] {
            let vw = vw_split(theta1, &pose, &r, &chain);
            let sig2 = 1.0 - vw.c4 * vw.c4;
            if sig2 < 0.0 {
                continue;
            }
            let sigma = sig2.sqrt();
            let plus = elim.phi(theta1, sigma, vw.c4);
            let minus = elim.phi(theta1, -sigma, vw.c4);
            let scale = vw.scale.max(1e-300);
            assert!((plus - (vw.v * sigma + vw.w)).abs() <= 1e-8 * scale);
            assert!((minus - (-vw.v * sigma + vw.w)).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn every_joint_solution_reproduces_the_pose() {
        let (pose, chain) = table_iv_pose();
        let sols = solve_ik(&pose, &chain, &SolveOptions::default());
        assert!(!sols.all.is_empty());
        for s in &sols.all {
            assert!(s.residual < 1e-6, "residual {}", s.residual);
        }
        // the seed joints are among the feasible solutions
        let seed = JointAngles([1.0, 1.0, 1.5, 0.0, 0.5, -1.5]);
        let hit = sols
            .feasible_solutions()
            .any(|s| s.joints.max_joint_distance(&seed) < 1e-6);
        assert!(hit);
    }

    #[test]
    fn unreachable_pose_yields_empty_set() {
        let chain = DhChain::gen3_lite();
        let pose = Pose {
            position: Vector3::new(10.0, 0.0, 0.0),
            orientation: Matrix3::identity(),
        };
        let sols = solve_ik(&pose, &chain, &SolveOptions::default());
        assert!(sols.all.is_empty());
        assert!(sols.feasible.is_empty());
    }
}
