//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{UnitQuaternion, Vector3};
use pedcal::commands;
use pedcal::config::{CameraConfig, HeightsConfig, RunConfig};
use pedcal::records::{parse_detections, to_jsonl};
use pedcal::scene::{PeopleSection, SceneCamera, SceneFile, VehicleSection};
use pedcal_core::alignment::{fit_rigid, RigidTransform};
use pedcal_core::calibration::{
    build_system_literal, calibrate, solve_system, CalibrationOptions, HeightModel,
};
use pedcal_core::evaluation::{roc_auc, LabeledSet, ScoredSample};
use pedcal_core::geometry::{
    build_rotation, CameraIntrinsics, PixelPoint, ProjectionCoefficients, RotationMatrix,
    WorldPoint,
};
use pedcal_core::proximity::{erf, p_near, NearPredicate};
use pedcal_core::ransac::{ransac_calibrate, RansacConfig};
use pedcal_core::simulate::{generate, Region, SceneSpec, SimCamera};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_camera() -> SimCamera {
    SimCamera::new(1500.0, 1920.0, 1080.0, 70.0, 1.0, 8.0).unwrap()
}

fn exact_recovery() -> Outcome {
    let mut spec = SceneSpec::people(
        reference_camera(),
        20,
        1.7018,
        Region::new(-8.0, 8.0, 10.0, 35.0),
    );
    spec.rng_seed = 1;
    let scene = generate(&spec).unwrap();
    if scene.detections.len() != 20 {
        return Err(format!(
            "only {} of 20 people visible",
            scene.detections.len()
        ));
    }
    let cam = reference_camera();
    let start = Instant::now();
    let sol = calibrate(
        &scene.detections,
        &cam.intrinsics,
        &cam.pose,
        &HeightModel::default(),
        &CalibrationOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rel = (sol.camera_height_m - 8.0).abs() / 8.0;
    let worst = sol
        .person_positions
        .iter()
        .zip(&sol.detection_indices)
        .map(|(p, &i)| {
            let t = scene.detection_truth(i).foot;
            (p.foot.x - t.x).hypot(p.foot.y - t.y)
        })
        .fold(0.0, f64::max);
    check(
        rel < 1e-6 && worst < 1e-6 && elapsed < Duration::from_secs(1),
        format!("C_Z rel err {rel:.2e}, worst foot err {worst:.2e} m, {elapsed:.2?}"),
    )
}

fn literal_rank() -> Outcome {
    let cam = reference_camera();
    let c = ProjectionCoefficients::new(&cam.intrinsics, &cam.rotation());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for scene_idx in 0..100 {
        let n = rng.random_range(2..=30);
        let mut spec = SceneSpec::people(cam, n, 1.7018, Region::new(-8.0, 8.0, 10.0, 35.0));
        spec.rng_seed = rng.random();
        let scene = generate(&spec).unwrap();
        let n = scene.detections.len();
        let sys = build_system_literal(&scene.detections, &c, &HeightModel::default()).unwrap();
        let sol = solve_system(&sys).unwrap();
        if sys.cols() != 4 * n + 1 || sol.rank != 4 * n {
            return Err(format!(
                "scene {scene_idx}: N = {n}, rank {} with {} columns",
                sol.rank,
                sys.cols()
            ));
        }
    }
    Ok("100 scenes, rank 4N of 4N+1 columns".into())
}

fn ransac_robustness() -> Outcome {
    let cam = reference_camera();
    let heights = HeightModel::default();
    let start = Instant::now();
    let mut passing = 0;
    let mut worst_rel: f64 = 0.0;
    for seed in 0..20u64 {
        let mut spec = SceneSpec::people(cam, 30, 1.7018, Region::new(-15.0, 15.0, 40.0, 80.0));
        spec.height_std_m = 0.07;
        spec.pixel_noise_std = 1.0;
        spec.outlier_fraction = 0.2;
        spec.rng_seed = seed;
        let scene = generate(&spec).unwrap();
        let cfg = RansacConfig {
            rng_seed: seed,
            ..RansacConfig::default()
        };
        let Ok(r) = ransac_calibrate(
            &scene.detections,
            &cam.intrinsics,
            &cam.pose,
            &heights,
            &cfg,
        ) else {
            continue;
        };
        let rel = (r.solution.camera_height_m - 8.0).abs() / 8.0;
        worst_rel = worst_rel.max(rel);
        let genuine: Vec<usize> = (0..scene.detections.len())
            .filter(|&i| !scene.is_outlier(i))
            .collect();
        let kept = genuine.iter().filter(|&&i| r.inlier_mask[i]).count();
        if rel < 0.05 && kept as f64 >= 0.9 * genuine.len() as f64 {
            passing += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        passing >= 18 && elapsed < Duration::from_secs(10),
        format!("{passing}/20 seeds pass, worst C_Z rel err {worst_rel:.3}, {elapsed:.2?}"),
    )
}

/// `K R [I | −C]` with `C = (0, 0, 1)`, multiplied out by hand.
fn hand_projection(k: &CameraIntrinsics, r: &RotationMatrix) -> [[f64; 4]; 3] {
    let f = k.focal_length_px();
    let pp = k.principal_point();
    let km = [[f, 0.0, pp.u], [0.0, f, pp.v], [0.0, 0.0, 1.0]];
    let mut out = [[0.0; 4]; 3];
    for row in 0..3 {
        for col in 0..3 {
            out[row][col] = (0..3).map(|m| km[row][m] * r.entry(m, col)).sum();
        }
        out[row][3] = -(0..3).map(|m| km[row][m] * r.entry(m, 2)).sum::<f64>();
    }
    out
}

fn coefficient_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = CameraIntrinsics::new(
            rng.random_range(200.0..4000.0),
            PixelPoint::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..1500.0)),
        )
        .unwrap();
        let r = build_rotation(
            rng.random_range(1.0..179.0),
            rng.random_range(-180.0..180.0),
        )
        .unwrap();
        let c = ProjectionCoefficients::new(&k, &r);
        let oracle = hand_projection(&k, &r);
        let ours = [
            [c.a, c.b, c.c, c.d],
            [c.e, c.f, c.g, c.h],
            [c.i, c.j, c.k, c.l],
        ];
        for row in 0..3 {
            for col in 0..4 {
                worst = worst.max((ours[row][col] - oracle[row][col]).abs());
            }
        }
        worst = worst
            .max((c.d + c.c).abs())
            .max((c.h + c.g).abs())
            .max((c.l + c.k).abs());
    }
    check(
        worst < 1e-9,
        format!("1000 cameras, worst deviation {worst:.2e}"),
    )
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<WorldPoint> {
    (0..n)
        .map(|_| {
            WorldPoint::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-5.0..5.0),
            )
        })
        .collect()
}

fn rigid_fit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let src = random_points(&mut rng, 50);
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let q = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(-3.1..3.1));
        let truth = RigidTransform {
            rotation: RotationMatrix::from_matrix(*q.to_rotation_matrix().matrix()).unwrap(),
            translation: Vector3::new(
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
            ),
        };
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let fit = fit_rigid(&src, &dst).map_err(|e| e.to_string())?;
        worst = worst
            .max((fit.rotation.matrix() - truth.rotation.matrix()).amax())
            .max((fit.translation - truth.translation).amax());
    }
    // Mirror images of planar and general sets.
    let mut worst_det: f64 = 0.0;
    for i in 0..100 {
        let mut src = random_points(&mut rng, 12);
        if i % 2 == 0 {
            src.iter_mut().for_each(|p| p.z = 0.0);
        }
        let dst: Vec<_> = src
            .iter()
            .map(|p| WorldPoint::new(-p.x, p.y, p.z))
            .collect();
        let fit = fit_rigid(&src, &dst).map_err(|e| e.to_string())?;
        worst_det = worst_det.max((fit.rotation.determinant() - 1.0).abs());
    }
    check(
        worst < 1e-9 && worst_det < 1e-12,
        format!("worst entry err {worst:.2e}, worst |det - 1| on mirrored sets {worst_det:.2e}"),
    )
}

fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        term *= 2.0 * x * x / (2.0 * n + 3.0);
        sum += term;
        n += 1.0;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
}

fn predicate_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_half: f64 = 0.0;
    for _ in 0..100 {
        let pred =
            NearPredicate::new(rng.random_range(0.1..50.0), rng.random_range(0.01..10.0)).unwrap();
        worst_half = worst_half.max((p_near(&pred, pred.threshold_m()).unwrap() - 0.5).abs());
    }
    let pred = NearPredicate::default();
    let grid: Vec<f64> = (0..10_000)
        .map(|i| p_near(&pred, i as f64 * 1e-3).unwrap())
        .collect();
    let monotone = grid.windows(2).all(|w| w[1] <= w[0]);
    let worst_erf = (0..=12_000)
        .map(|i| {
            let x = -6.0 + i as f64 * 1e-3;
            (erf(x) - erf_series(x)).abs()
        })
        .fold(0.0, f64::max);
    check(
        worst_half <= 1e-12 && monotone && worst_erf < 1.5e-7,
        format!("|p(τ) - 0.5| ≤ {worst_half:.1e}, monotone: {monotone}, erf err {worst_erf:.1e}"),
    )
}

fn auc_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=2000);
        let levels = rng.random_range(2..50) as f64;
        let mut samples: Vec<ScoredSample> = (0..n)
            .map(|_| {
                let positive = rng.random_bool(0.5);
                let raw = rng.random::<f64>() + if positive { 0.2 } else { 0.0 };
                ScoredSample {
                    score: (raw * levels).floor(),
                    positive,
                }
            })
            .collect();
        samples[0].positive = true;
        samples[1].positive = false;
        let set = LabeledSet { samples };
        let pos: Vec<f64> = set
            .samples
            .iter()
            .filter(|s| s.positive)
            .map(|s| s.score)
            .collect();
        let neg: Vec<f64> = set
            .samples
            .iter()
            .filter(|s| !s.positive)
            .map(|s| s.score)
            .collect();
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let mw = wins / (pos.len() * neg.len()) as f64;
        worst = worst.max((roc_auc(&set).map_err(|e| e.to_string())?.auc - mw).abs());
    }
    check(
        worst < 1e-12,
        format!("200 sets, worst |AUC - U/(PN)| {worst:.1e}"),
    )
}

fn scene_file(seed: u64) -> SceneFile {
    SceneFile {
        seed,
        frames: 10,
        camera: SceneCamera {
            focal_px: 1500.0,
            image_width: 1920.0,
            image_height: 1080.0,
            tilt_deg: 70.0,
            roll_deg: 1.0,
            height_m: 8.0,
        },
        people: PeopleSection {
            count: 60,
            height_mean_m: 1.7018,
            height_std_m: 0.07,
            region: [-15.0, 15.0, 40.0, 80.0],
            pixel_noise_px: 1.0,
            outlier_fraction: 0.2,
        },
        vehicles: Some(VehicleSection {
            count: 6,
            region: None,
            positions: Vec::new(),
        }),
    }
}

fn end_to_end_auc() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for avg in [1.5748, 1.7018, 1.8288] {
        let mut aucs = Vec::new();
        for seed in [11, 12, 13] {
            let sim = commands::simulate(&scene_file(seed), None).map_err(|e| e.to_string())?;
            let detections =
                parse_detections(&to_jsonl(&sim.detections), "sim").map_err(|e| e.to_string())?;
            let config = RunConfig {
                camera: Some(CameraConfig {
                    focal_px: 1500.0,
                    tilt_deg: 70.0,
                    roll_deg: 1.0,
                    principal_point: None,
                    image_width: Some(1920.0),
                    image_height: Some(1080.0),
                }),
                heights: HeightsConfig {
                    avg_m: avg,
                    foot_plane_m: 0.0,
                },
                ..RunConfig::default()
            };
            let report =
                commands::calibrate(&detections, &config, Some(seed)).map_err(|e| e.to_string())?;
            let positions = commands::locate(&detections, &report).map_err(|e| e.to_string())?;
            let (_, pairs) = commands::proximity(
                &positions,
                &config.predicate().unwrap(),
                Some(&sim.truth_positions),
            )
            .map_err(|e| e.to_string())?;
            let auc = commands::roc(&pairs, &config.eval)
                .map_err(|e| e.to_string())?
                .auc;
            ok &= auc >= 0.95;
            aucs.push(format!("{auc:.4}"));
        }
        lines.push(format!("h={avg}: {}", aucs.join("/")));
    }
    check(ok, lines.join(", "))
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let scene = "seed = 21\nframes = 5\n\
        [camera]\nfocal_px = 1500.0\nimage_width = 1920\nimage_height = 1080\ntilt_deg = 70.0\nroll_deg = 1.0\nheight_m = 8.0\n\
        [people]\ncount = 50\nheight_std_m = 0.07\nregion = [-15.0, 15.0, 40.0, 80.0]\npixel_noise_px = 1.0\noutlier_fraction = 0.2\n\
        [vehicles]\ncount = 5\n";
    let config = "[camera]\nfocal_px = 1500.0\ntilt_deg = 70.0\nroll_deg = 1.0\nimage_width = 1920\nimage_height = 1080\n\
        [ransac]\nseed = 3\n";
    fs::write(dir.join("scene.toml"), scene).map_err(|e| e.to_string())?;
    fs::write(dir.join("run.toml"), config).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 6] = [
        &["simulate", "scene.toml", "-o", "det.jsonl"],
        &[
            "calibrate",
            "det.jsonl",
            "--config",
            "run.toml",
            "-o",
            "cal.json",
        ],
        &[
            "locate",
            "det.jsonl",
            "--calibration",
            "cal.json",
            "-o",
            "pos.jsonl",
        ],
        &[
            "proximity",
            "pos.jsonl",
            "--truth",
            "det.truth.jsonl",
            "--pairs",
            "pairs.jsonl",
            "-o",
            "prox.json",
        ],
        &[
            "align",
            "pos.jsonl",
            "det.truth.jsonl",
            "--class",
            "person",
            "-o",
            "align.json",
        ],
        &["roc", "pairs.jsonl", "-o", "roc.csv"],
    ];
    let mut outputs = Vec::new();
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_pedcal"))
            .current_dir(dir)
            .args(args)
            .arg("-q")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        outputs.push((format!("{} stdout", args[0]), out.stdout));
    }
    for name in [
        "det.jsonl",
        "det.truth.json",
        "det.truth.jsonl",
        "cal.json",
        "pos.jsonl",
        "prox.json",
        "pairs.jsonl",
        "align.json",
        "roc.csv",
    ] {
        outputs.push((
            name.to_string(),
            fs::read(dir.join(name)).map_err(|e| e.to_string())?,
        ));
    }
    Ok(outputs)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} outputs byte-identical across two runs", first.len())
        } else {
            format!("differing outputs: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("1 exact recovery", exact_recovery),
        ("2 literal system rank", literal_rank),
        ("3 RANSAC robustness", ransac_robustness),
        ("4 coefficient identities", coefficient_identities),
        ("5 rigid fit recovery", rigid_fit),
        ("6 predicate exactness", predicate_exactness),
        ("7 AUC correctness", auc_correctness),
        ("8 end-to-end proximity AUC", end_to_end_auc),
        ("9 pipeline determinism", determinism),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
