//! Posture scoring against camera sight lines: the shortest distance between
//! each link segment and each camera-to-object line, minimized over the arm,
//! maximized over candidate solutions.
//!
//! Link segments connect consecutive frame origins — seven origins, six
//! segments. Sight lines are infinite: only the link parameter is clamped to
//! its segment, never the line parameter.

use crate::chain::DhChain;
use crate::dh::{frame_origins, JointAngles};
use crate::ik::SolutionSet;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Two sight-line endpoints closer than this give no usable direction.
const SIGHT_LINE_MIN: f64 = 1e-9;
/// Below this cross-product norm the segment runs parallel to the sight line
/// (or has collapsed to a point) and the mutual-perpendicular system is
/// singular.
const PARALLEL_MIN: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum OcclusionError {
    #[error("scene has no objects; at least one sight line is required")]
    NoObjects,
    #[error("object {index} coincides with the camera ({dist:.3e} m apart); its sight line is undefined")]
    CameraOnObject { index: usize, dist: f64 },
    #[error("sight line endpoints coincide ({dist:.3e} m apart)")]
    DegenerateSightLine { dist: f64 },
    #[error("no feasible solutions to select a posture from")]
    NoFeasibleSolutions,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A camera position and the object points it must keep in view.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub camera: Vector3<f64>,
    /// Object positions; each defines one camera-to-object sight line.
    pub objects: Vec<Vector3<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    camera: [f64; 3],
    objects: Vec<[f64; 3]>,
}

impl Scene {
    pub fn new(camera: Vector3<f64>, objects: Vec<Vector3<f64>>) -> Result<Self, OcclusionError> {
        let scene = Scene { camera, objects };
        scene.validate()?;
        Ok(scene)
    }

    /// Checks the scene invariants: at least one object, every object at a
    /// usable distance from the camera.
    pub fn validate(&self) -> Result<(), OcclusionError> {
        if self.objects.is_empty() {
            return Err(OcclusionError::NoObjects);
        }
        for (index, obj) in self.objects.iter().enumerate() {
            let dist = (obj - self.camera).norm();
            if dist <= SIGHT_LINE_MIN {
                return Err(OcclusionError::CameraOnObject { index, dist });
            }
        }
        Ok(())
    }

    /// Parses `{"camera": [x,y,z], "objects": [[x,y,z], ...]}` (meters) and
    /// validates it.
    pub fn from_json_str(text: &str) -> Result<Self, OcclusionError> {
        let file: SceneFile = serde_json::from_str(text)?;
        Scene::new(
            Vector3::from(file.camera),
            file.objects.into_iter().map(Vector3::from).collect(),
        )
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, OcclusionError> {
        Scene::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = SceneFile {
            camera: self.camera.into(),
            objects: self.objects.iter().map(|o| (*o).into()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain arrays of finite floats")
    }
}

/// How the closest-approach solution was adjusted to respect the segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampKind {
    /// The mutual perpendicular meets the segment between its endpoints.
    Interior,
    /// The closest approach fell before the segment start; distance taken
    /// from the start point.
    StartEndpoint,
    /// The closest approach fell past the segment end; distance taken from
    /// the end point.
    EndEndpoint,
    /// Segment and sight line are parallel (or the segment is a point); the
    /// perpendicular direction is undefined and both endpoints were tried.
    Parallel,
}

/// Closest approach between one link segment and one sight line.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinkClearance {
    /// Which link segment, 1 through 6. Zero from
    /// [`segment_line_clearance`], which scores a bare segment.
    pub link_index: usize,
    /// Which scene object's sight line, zero-based. Zero from
    /// [`segment_line_clearance`].
    pub object_index: usize,
    /// Segment parameter of the closest approach: 0 at the start, 1 at the
    /// end. Outside [0, 1] records where the unclamped solution fell.
    pub delta_i: f64,
    /// Sight-line parameter of the closest approach: 0 at the camera, 1 at
    /// the object. Never clamped — the sight line is infinite.
    pub delta_p: f64,
    /// Shortest distance in meters, after clamping. Always ≥ 0.
    pub delta_d: f64,
    pub clamped: ClampKind,
}

fn point_line_dist(pt: &Vector3<f64>, line_a: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    (line_a - pt).cross(u).norm() / u.norm()
}

/// Shortest distance between the segment `seg_start`→`seg_end` and the
/// infinite line through `line_a` and `line_b`.
///
/// Solves the closed-loop system `seg_start + Δi·w = line_a + Δp·u + Δd·v`
/// with `v` the unit mutual perpendicular; a Δi outside [0, 1] is replaced by
/// the point-to-line distance from the nearer endpoint, and parallel pairs
/// take the smaller of the two endpoint distances.
pub fn segment_line_clearance(
    seg_start: &Vector3<f64>,
    seg_end: &Vector3<f64>,
    line_a: &Vector3<f64>,
    line_b: &Vector3<f64>,
) -> Result<LinkClearance, OcclusionError> {
    let u = line_b - line_a;
    let dist = u.norm();
    if dist <= SIGHT_LINE_MIN {
        return Err(OcclusionError::DegenerateSightLine { dist });
    }
    let w = seg_end - seg_start;
    let cr = u.cross(&w);

    let parallel = |(): ()| LinkClearance {
        link_index: 0,
        object_index: 0,
        delta_i: 0.0,
        delta_p: 0.0,
        delta_d: point_line_dist(seg_start, line_a, &u).min(point_line_dist(seg_end, line_a, &u)),
        clamped: ClampKind::Parallel,
    };
    if cr.norm() < PARALLEL_MIN {
        return Ok(parallel(()));
    }
    let v = cr.normalize();
    let system = Matrix3::from_columns(&[w, -u, v]);
    let Some(sol) = system.lu().solve(&(line_a - seg_start)) else {
        // cross-norm says independent, LU says singular: conditioning has
        // run out, treat as parallel
        return Ok(parallel(()));
    };
    let (delta_i, delta_p, delta_d) = (sol[0], sol[1], sol[2].abs());
    let (delta_d, clamped) = if delta_i < 0.0 {
        (point_line_dist(seg_start, line_a, &u), ClampKind::StartEndpoint)
    } else if delta_i > 1.0 {
        (point_line_dist(seg_end, line_a, &u), ClampKind::EndEndpoint)
    } else {
        (delta_d, ClampKind::Interior)
    };
    Ok(LinkClearance { link_index: 0, object_index: 0, delta_i, delta_p, delta_d, clamped })
}

/// Clearance of every (link, object) pair at one posture: 6 links × all
/// sight lines, with the indices filled in.
///
/// The scene must satisfy [`Scene::validate`].
pub fn link_clearances(
    joints: &JointAngles,
    scene: &Scene,
    chain: &DhChain,
) -> Vec<LinkClearance> {
    let origins = frame_origins(joints, chain);
    let mut out = Vec::with_capacity(6 * scene.objects.len());
    for (object_index, object) in scene.objects.iter().enumerate() {
        for i in 0..6 {
            let mut c =
                segment_line_clearance(&origins[i], &origins[i + 1], &scene.camera, object)
                    .expect("validated scene has no degenerate sight lines");
            c.link_index = i + 1;
            c.object_index = object_index;
            out.push(c);
        }
    }
    out
}

/// The posture's clearance: minimum distance between any link segment and
/// any sight line. Larger means the arm stays further out of view.
///
/// The scene must satisfy [`Scene::validate`].
pub fn occlusion_score(joints: &JointAngles, scene: &Scene, chain: &DhChain) -> f64 {
    link_clearances(joints, scene, chain)
        .iter()
        .fold(f64::INFINITY, |m, c| m.min(c.delta_d))
}

/// Picks the feasible solution whose posture maximizes [`occlusion_score`].
///
/// Returns the winner's index into `solutions.all` together with its score;
/// ties go to the smaller index.
pub fn select_posture(
    solutions: &SolutionSet,
    scene: &Scene,
    chain: &DhChain,
) -> Result<(usize, f64), OcclusionError> {
    let mut best: Option<(usize, f64)> = None;
    for &i in &solutions.feasible {
        let score = occlusion_score(&solutions.all[i].joints, scene, chain);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.ok_or(OcclusionError::NoFeasibleSolutions)
}
