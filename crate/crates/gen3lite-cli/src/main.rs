use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use gen3lite_cli::{
    fk_report, run_validate, solve_report, try_select, RequestEcho, Units,
};
use gen3lite_ik::{rpy_to_matrix, solve_ik, DhChain, JointAngles, Pose, RpyAngles, Scene,
    SolveOptions};
use nalgebra::{Matrix3, Vector3};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "gen3lite",
    version,
    about = "Analytical inverse kinematics for the Kinova Gen3 Lite arm"
)]
struct Cli {
    /// Chain description JSON (defaults to the factory Gen3 Lite)
    #[arg(long, global = true, env = "GEN3LITE_CHAIN", value_name = "FILE")]
    chain: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tool pose of six joint angles
    Fk {
        /// Joint angles θ1..θ6, radians unless --deg
        #[arg(num_args = 6, required = true, allow_negative_numbers = true, value_name = "ANGLE")]
        joints: Vec<f64>,
        /// Angles in degrees, both input and report
        #[arg(long)]
        deg: bool,
        /// Machine-readable report
        #[arg(long)]
        json: bool,
    },
    /// Every joint-space solution reaching a pose
    Ik {
        #[command(flatten)]
        target: TargetArgs,
        /// Camera scene JSON; adds posture selection to the report
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        /// Machine-readable report
        #[arg(long)]
        json: bool,
    },
    /// The solution whose links stay farthest from the camera sight lines
    Select {
        #[command(flatten)]
        target: TargetArgs,
        /// Camera scene JSON
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
        /// Machine-readable report
        #[arg(long)]
        json: bool,
    },
    /// Seeded random self-checks: FK→IK round trips and oracle cross-checks
    Validate {
        /// Number of trials
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// RNG seed; same seed, same report
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Machine-readable report
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct TargetArgs {
    /// Tool position x y z, meters
    #[arg(long, num_args = 3, allow_negative_numbers = true, required = true,
          value_names = ["X", "Y", "Z"])]
    pos: Vec<f64>,
    /// Orientation as roll pitch yaw, radians
    #[arg(long, num_args = 3, allow_negative_numbers = true,
          conflicts_with = "matrix", required_unless_present = "matrix",
          value_names = ["R", "P", "Y"])]
    rpy: Option<Vec<f64>>,
    /// Orientation as a row-major 3×3 rotation matrix
    #[arg(long, num_args = 9, allow_negative_numbers = true, value_name = "M")]
    matrix: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let (chain, chain_name) = match &cli.chain {
        Some(path) => (
            DhChain::from_json_file(path)
                .with_context(|| format!("loading chain {}", path.display()))?,
            path.display().to_string(),
        ),
        None => (DhChain::gen3_lite(), "builtin".to_string()),
    };

    match cli.cmd {
        Cmd::Fk { joints, deg, json } => {
            let units = if deg { Units::Deg } else { Units::Rad };
            let rad = JointAngles(std::array::from_fn(|i| {
                if deg { joints[i].to_radians() } else { joints[i] }
            }));
            let report = fk_report(&rad, &chain, units);
            emit(&report, report.render(), json)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Ik { target, scene, json } => {
            let report = solve(&target, scene.as_deref(), &chain, &chain_name)?;
            emit(&report, report.render(), json)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Select { target, scene, json } => {
            let report = solve(&target, Some(&scene), &chain, &chain_name)?;
            emit(&report, report.render(), json)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { count, seed, json } => {
            let report = run_validate(count, seed, &chain);
            emit(&report, report.render(), json)?;
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn solve(
    target: &TargetArgs,
    scene_path: Option<&std::path::Path>,
    chain: &DhChain,
    chain_name: &str,
) -> anyhow::Result<gen3lite_cli::SolveReport> {
    let position = Vector3::new(target.pos[0], target.pos[1], target.pos[2]);
    let (orientation, rpy, orthonormalized) = match (&target.rpy, &target.matrix) {
        (Some(v), _) => {
            let rpy = RpyAngles { roll: v[0], pitch: v[1], yaw: v[2] };
            (rpy_to_matrix(&rpy), Some(rpy), false)
        }
        (None, Some(v)) => {
            let (q, projected) = rotation_from_values(v)?;
            (q, None, projected)
        }
        (None, None) => unreachable!("clap requires one orientation form"),
    };
    let pose = Pose { position, orientation };

    let scene = scene_path
        .map(|p| {
            Scene::from_json_file(p).with_context(|| format!("loading scene {}", p.display()))
        })
        .transpose()?;

    let start = Instant::now();
    let set = solve_ik(&pose, chain, &SolveOptions::default());
    let selected = match &scene {
        Some(s) => try_select(&set, s, chain)?,
        None => None,
    };
    let timing_ms = start.elapsed().as_secs_f64() * 1e3;

    let request = RequestEcho {
        position: position.into(),
        rpy,
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| orientation[(i, j)])),
        orthonormalized,
        scene: scene_path.map(|p| p.display().to_string()),
        chain: chain_name.to_string(),
    };
    Ok(solve_report(&set, request, selected, timing_ms))
}

/// Accepts a row-major matrix that is already a rotation, or one close
/// enough (orthonormality error ≤ 0.1, e.g. entries rounded for print) to
/// project back onto the nearest rotation; anything else is rejected.
fn rotation_from_values(v: &[f64]) -> anyhow::Result<(Matrix3<f64>, bool)> {
    let q = Matrix3::from_row_slice(v);
    let det = q.determinant();
    if det <= 0.0 {
        bail!("matrix is not a rotation: determinant {det:.4} is not positive");
    }
    let probe = Pose { position: Vector3::zeros(), orientation: q };
    let err = probe.orthonormality_error();
    if err <= 1e-9 {
        return Ok((q, false));
    }
    if err > 0.1 {
        bail!("matrix is too far from a rotation (orthonormality error {err:.2e})");
    }
    let svd = q.svd(true, true);
    let (u, v_t) = (svd.u.expect("svd requested u"), svd.v_t.expect("svd requested v_t"));
    Ok((u * v_t, true))
}

fn emit<T: serde::Serialize>(report: &T, rendered: String, json: bool) -> anyhow::Result<()> {
    let text = if json {
        let mut s = serde_json::to_string_pretty(report)?;
        s.push('\n');
        s
    } else {
        rendered
    };
    // tolerate a closed pipe (e.g. `| head`) instead of panicking mid-write
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(())
}
