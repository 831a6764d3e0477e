use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use voxfuse_core::eval::{breakdown, ClassThresholds, DetRecord, FrameEval, GtRecord};
use voxfuse_core::geometry::{
    epipolar_row_check, homography, perturb_extrinsics, solve_rigid, warp_image, Correspondence,
    RigidTransform,
};
use voxfuse_core::pipeline::{run_pipeline, FrameDetections, Modality, RunConfig, WeightsInit};
use voxfuse_core::sensorio::{
    load_dataset, load_rig, read_float_grid, save_rig, save_sample, write_float_grid, Box3D,
    ConditionTags, ImageModality, ObjectClass,
};
use voxfuse_core::synth::{default_rig, generate_scene, SceneObject, SceneSpec, WeatherModel};

use crate::exit::{from_sensor, CliError, Result};

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("parsing {path}: {e}")))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {path:?}: {e}")))
}

fn ensure_dir(path: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(path);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {dir:?}: {e}")))?;
    Ok(dir)
}

// ---------------------------------------------------------------- synth --

#[derive(Serialize, Deserialize)]
struct SynthConfig {
    scenes: u32,
    objects_per_scene: u32,
    #[serde(default = "default_points")]
    points_per_object: usize,
    #[serde(default = "default_ground")]
    ground_points: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    weather: Option<WeatherModel>,
    #[serde(default)]
    tags: ConditionTags,
    #[serde(default = "default_theta")]
    event_threshold: f64,
    /// Placement area for object centers, meters.
    #[serde(default = "default_area")]
    placement: [[f64; 2]; 2],
    #[serde(default = "default_separation")]
    min_separation_m: f64,
}

fn default_points() -> usize {
    250
}
fn default_ground() -> usize {
    1500
}
fn default_theta() -> f64 {
    0.2
}
fn default_area() -> [[f64; 2]; 2] {
    [[10.0, 65.0], [-18.0, 18.0]]
}
fn default_separation() -> f64 {
    7.0
}

/// Deterministic random scene layout: vehicles placed with a minimum
/// separation inside the placement area.
pub fn plan_scene(cfg: &SynthConfig, scene_index: u32) -> SceneSpec {
    let seed = cfg
        .seed
        .wrapping_add(u64::from(scene_index).wrapping_mul(0x9e37_79b9));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects: Vec<SceneObject> = Vec::new();
    let mut guard = 0;
    while objects.len() < cfg.objects_per_scene as usize && guard < 1000 {
        guard += 1;
        let x = rng.gen_range(cfg.placement[0][0]..cfg.placement[0][1]);
        let y = rng.gen_range(cfg.placement[1][0]..cfg.placement[1][1]);
        if objects.iter().any(|o| {
            let dx = o.b.cx - x;
            let dy = o.b.cy - y;
            (dx * dx + dy * dy).sqrt() < cfg.min_separation_m
        }) {
            continue;
        }
        let b = Box3D::new(
            [x, y, 0.8],
            [
                rng.gen_range(4.2..4.8),
                rng.gen_range(1.7..2.0),
                rng.gen_range(1.5..1.8),
            ],
            rng.gen_range(-3.1..3.1),
            ObjectClass::Vehicle,
        )
        .expect("valid planted box");
        objects.push(SceneObject {
            class: ObjectClass::Vehicle,
            b,
            velocity: [rng.gen_range(-8.0..8.0), rng.gen_range(-1.0..1.0), 0.0],
        });
    }
    SceneSpec {
        objects,
        ego_velocity: [rng.gen_range(0.0..10.0), 0.0, 0.0],
        ground_z: 0.0,
        points_per_object: cfg.points_per_object,
        ground_points: cfg.ground_points,
        weather: cfg.weather,
        tags: cfg.tags,
        event_threshold: cfg.event_threshold,
        seed,
    }
}

pub fn synth(config: &str, out: &str, seed_override: Option<u64>) -> Result<()> {
    let mut cfg: SynthConfig = read_json(config)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    if cfg.scenes == 0 || cfg.objects_per_scene == 0 {
        return Err(CliError::validation("scenes and objects must be positive"));
    }
    let out_dir = ensure_dir(out)?;
    let rig = default_rig();
    save_rig(&rig, out_dir.join("rig.json")).map_err(from_sensor)?;
    for i in 0..cfg.scenes {
        let spec = plan_scene(&cfg, i);
        let sample = generate_scene(&spec, &rig, u64::from(i), i64::from(i) * 100_000)
            .map_err(|e| CliError::validation(e.to_string()))?;
        let frame_dir = out_dir.join("frames").join(format!("{i:06}"));
        save_sample(&sample, &frame_dir).map_err(from_sensor)?;
    }
    write_json(&cfg, &out_dir.join("synth_config.json"))?;
    println!("wrote {} frames to {}", cfg.scenes, out_dir.display());
    Ok(())
}

// ------------------------------------------------------------------ run --

#[derive(Serialize, Deserialize)]
struct RunFileConfig {
    data_dir: String,
    /// Optional rig override; defaults to `<data_dir>/rig.json`.
    #[serde(default)]
    rig: Option<String>,
    pipeline: RunConfig,
}

pub fn run(
    config: &str,
    out: &str,
    seed: Option<u64>,
    modalities: Option<&str>,
    jobs: usize,
) -> Result<()> {
    let mut cfg: RunFileConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.pipeline.weights = Some(WeightsInit::Seeded(s));
    }
    if let Some(m) = modalities {
        cfg.pipeline.modalities =
            Modality::parse_list(m).map_err(|e| CliError::validation(e.to_string()))?;
    }
    cfg.pipeline
        .validate()
        .map_err(|e| CliError::validation(e.to_string()))?;

    let rig_path = cfg
        .rig
        .clone()
        .unwrap_or_else(|| format!("{}/rig.json", cfg.data_dir));
    let rig = load_rig(&rig_path).map_err(from_sensor)?;
    let samples = load_dataset(&cfg.data_dir).map_err(from_sensor)?;
    if samples.is_empty() {
        return Err(CliError::validation(format!(
            "no frames found under {}",
            cfg.data_dir
        )));
    }
    let output = run_pipeline(&cfg.pipeline, &samples, &rig, jobs)
        .map_err(|e| CliError::validation(e.to_string()))?;

    let out_dir = ensure_dir(out)?;
    write_json(&output.detections, &out_dir.join("detections.json"))?;
    std::fs::write(out_dir.join("metrics.csv"), output.report.to_csv())
        .map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(out_dir.join("summary.md"), output.report.to_markdown())
        .map_err(|e| CliError::io(e.to_string()))?;
    println!(
        "processed {} frames; reports in {}",
        samples.len(),
        out_dir.display()
    );
    Ok(())
}

// ----------------------------------------------------------------- eval --

#[derive(Serialize, Deserialize)]
struct EvalConfig {
    data_dir: String,
    detections: String,
    #[serde(default)]
    thresholds: ClassThresholds,
    #[serde(default = "default_eval_x")]
    eval_x_range: [f64; 2],
}

fn default_eval_x() -> [f64; 2] {
    [0.0, 70.0]
}

pub fn eval(config: &str, out: &str) -> Result<()> {
    let cfg: EvalConfig = read_json(config)?;
    let samples = load_dataset(&cfg.data_dir).map_err(from_sensor)?;
    let detections: Vec<FrameDetections> = read_json(&cfg.detections)?;
    let by_frame: std::collections::BTreeMap<u64, &FrameDetections> =
        detections.iter().map(|d| (d.frame_id, d)).collect();
    let in_eval =
        |b: &Box3D| b.cx >= cfg.eval_x_range[0] && b.cx < cfg.eval_x_range[1];
    let frames: Vec<FrameEval> = samples
        .iter()
        .map(|s| FrameEval {
            frame_id: s.frame_id,
            tags: s.annotations.tags,
            preds: by_frame
                .get(&s.frame_id)
                .map(|d| {
                    d.boxes
                        .iter()
                        .filter(|b| in_eval(b))
                        .map(|b| DetRecord {
                            frame_id: s.frame_id,
                            b: b.clone(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            gts: s
                .annotations
                .boxes3d
                .iter()
                .filter(|b| in_eval(b))
                .map(|b| GtRecord {
                    frame_id: s.frame_id,
                    b: b.clone(),
                })
                .collect(),
        })
        .collect();
    let report = breakdown(&frames, &cfg.thresholds);
    let out_dir = ensure_dir(out)?;
    std::fs::write(out_dir.join("metrics.csv"), report.to_csv())
        .map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(out_dir.join("summary.md"), report.to_markdown())
        .map_err(|e| CliError::io(e.to_string()))?;
    println!("evaluated {} frames; reports in {}", frames.len(), out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------- calib --

#[derive(Serialize, Deserialize)]
struct CorrespondenceWire {
    xyz: [f64; 3],
    uv: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct CalibSolveConfig {
    correspondences: Vec<CorrespondenceWire>,
    /// Row-major 3x3 intrinsics.
    k: Vec<f64>,
}

#[derive(Serialize)]
struct CalibSolution {
    r: Vec<f64>,
    t: Vec<f64>,
    rms_px: f64,
}

pub fn calib_solve(config: &str, out: &str) -> Result<()> {
    let cfg: CalibSolveConfig = read_json(config)?;
    if cfg.k.len() != 9 {
        return Err(CliError::validation("k must hold 9 row-major entries"));
    }
    let k = Matrix3::from_row_slice(&cfg.k);
    let corr: Vec<Correspondence> = cfg
        .correspondences
        .iter()
        .map(|c| Correspondence {
            xyz: c.xyz,
            uv: c.uv,
        })
        .collect();
    let sol = solve_rigid(&corr, &k).map_err(|e| CliError::validation(e.to_string()))?;
    let out_dir = ensure_dir(out)?;
    let wire = CalibSolution {
        r: sol.transform.rotation.transpose().as_slice().to_vec(),
        t: sol.transform.translation.as_slice().to_vec(),
        rms_px: sol.rms_px,
    };
    write_json(&wire, &out_dir.join("calib_solution.json"))?;
    println!("solved; rms {:.6} px", sol.rms_px);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CalibCheckConfig {
    pairs: Vec<PairWire>,
    #[serde(default = "default_tolerance")]
    tolerance_px: f64,
}

#[derive(Serialize, Deserialize)]
struct PairWire {
    left: [f64; 2],
    right: [f64; 2],
}

fn default_tolerance() -> f64 {
    1.0
}

#[derive(Serialize)]
struct CheckReport {
    max_row_disparity_px: f64,
    tolerance_px: f64,
    pass: bool,
}

pub fn calib_check(config: &str, out: &str) -> Result<()> {
    let cfg: CalibCheckConfig = read_json(config)?;
    let pairs: Vec<([f64; 2], [f64; 2])> =
        cfg.pairs.iter().map(|p| (p.left, p.right)).collect();
    let max = epipolar_row_check(&pairs).map_err(|e| CliError::validation(e.to_string()))?;
    let report = CheckReport {
        max_row_disparity_px: max,
        tolerance_px: cfg.tolerance_px,
        pass: max <= cfg.tolerance_px,
    };
    let out_dir = ensure_dir(out)?;
    write_json(&report, &out_dir.join("epipolar_check.json"))?;
    println!(
        "max row disparity {:.4} px ({})",
        max,
        if report.pass { "pass" } else { "fail" }
    );
    Ok(())
}

// ---------------------------------------------------------------- align --

#[derive(Serialize, Deserialize)]
struct AlignConfig {
    rig: String,
    src: ImageModality,
    dst: ImageModality,
    /// Optional float-grid image to warp onto the destination plane.
    #[serde(default)]
    image: Option<String>,
}

#[derive(Serialize)]
struct HomographyWire {
    h: Vec<f64>,
}

pub fn align(config: &str, out: &str) -> Result<()> {
    let cfg: AlignConfig = read_json(config)?;
    let rig = load_rig(&cfg.rig).map_err(from_sensor)?;
    let src = rig
        .camera(cfg.src)
        .ok_or_else(|| CliError::validation(format!("no {} camera in rig", cfg.src.as_str())))?;
    let dst = rig
        .camera(cfg.dst)
        .ok_or_else(|| CliError::validation(format!("no {} camera in rig", cfg.dst.as_str())))?;
    let h = homography(src, dst).map_err(|e| CliError::validation(e.to_string()))?;
    let out_dir = ensure_dir(out)?;
    write_json(
        &HomographyWire {
            h: h.transpose().as_slice().to_vec(),
        },
        &out_dir.join("homography.json"),
    )?;
    if let Some(image_path) = &cfg.image {
        let img = read_float_grid(image_path).map_err(from_sensor)?;
        let warped = warp_image(
            &img,
            &h,
            (dst.resolution.0 as usize, dst.resolution.1 as usize),
        )
        .map_err(|e| CliError::validation(e.to_string()))?;
        write_float_grid(&warped, out_dir.join("warped.grid")).map_err(from_sensor)?;
    }
    println!("homography written to {}", out_dir.display());
    Ok(())
}

// -------------------------------------------------------------- perturb --

#[derive(Serialize, Deserialize)]
struct PerturbConfig {
    r: Vec<f64>,
    t: Vec<f64>,
    sigma_t_m: f64,
    sigma_r_deg: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct PerturbOutput {
    r: Vec<f64>,
    t: Vec<f64>,
}

pub fn perturb(config: &str, out: &str, seed_override: Option<u64>) -> Result<()> {
    let mut cfg: PerturbConfig = read_json(config)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    if cfg.r.len() != 9 || cfg.t.len() != 3 {
        return Err(CliError::validation("r must hold 9 entries and t 3"));
    }
    let tf = RigidTransform::new(
        Matrix3::from_row_slice(&cfg.r),
        Vector3::new(cfg.t[0], cfg.t[1], cfg.t[2]),
    )
    .map_err(|e| CliError::validation(e.to_string()))?;
    let perturbed = perturb_extrinsics(&tf, cfg.sigma_t_m, cfg.sigma_r_deg, cfg.seed)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let out_dir = ensure_dir(out)?;
    write_json(
        &PerturbOutput {
            r: perturbed.rotation.transpose().as_slice().to_vec(),
            t: perturbed.translation.as_slice().to_vec(),
        },
        &out_dir.join("perturbed.json"),
    )?;
    println!("perturbed transform written to {}", out_dir.display());
    Ok(())
}
