use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::anyhow;
use camgeom::augment::batch_augment;
use camgeom::embedding::{embed as embed_camera, ray_grid, TokenGridSpec, CAMERA_CHANNELS};
use camgeom::eval::{evaluate_scenes, normalize_label, parse_detections, EvalError, EvalReport, Scene};
use camgeom::io::{self as cio, IoError, ManifestEntry, Tensor3};
use camgeom::prior::{embed_points, pool_to_tokens, unproject as unproject_depth, GEO_CHANNELS};
use camgeom::{ambiguity as amb, Intrinsics};
use serde_json::json;

use crate::config::Config;
use crate::{AugmentArgs, EmbedArgs, EvalArgs, UnprojectArgs};

/// Error with its process exit code: 1 for I/O, 2 for invalid input.
#[derive(Debug)]
pub enum Failure {
    Io(anyhow::Error),
    Invalid(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Io(e) | Failure::Invalid(e) => e,
        }
    }

    pub fn from_config_load(e: anyhow::Error) -> Self {
        if e.root_cause().downcast_ref::<std::io::Error>().is_some() {
            Failure::Io(e)
        } else {
            Failure::Invalid(e)
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => Failure::Io(e.into()),
            IoError::Format { .. } => Failure::Invalid(e.into()),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(anyhow!("{e}"))
}

fn prepare_out(out: &Path, cfg: &Config) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Io(anyhow!("{}: {e}", out.display())))?;
    cio::write_json(&out.join("config.resolved.json"), cfg)?;
    Ok(())
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn augment(cfg: &Config, args: &AugmentArgs, out: &Path) -> Result<(), Failure> {
    let lines = cio::read_manifest(&args.manifest)?;
    let base = base_dir(&args.manifest);
    prepare_out(out, cfg)?;

    let written: Vec<Mutex<Option<ManifestEntry>>> = lines.iter().map(|_| Mutex::new(None)).collect();
    let mut report = batch_augment(
        lines.len(),
        &cfg.augmentation,
        cfg.workers,
        |i| {
            let entry = lines[i].as_ref().map_err(Clone::clone)?;
            cio::load_sample(entry, &base).map_err(|e| e.to_string())
        },
        |i, sample| {
            let entry = lines[i].as_ref().map_err(Clone::clone)?;
            let o = cio::write_augmented(out, entry, &base, sample).map_err(|e| e.to_string())?;
            *written[i].lock().map_err(|e| e.to_string())? = Some(o);
            Ok(())
        },
    )
    .map_err(invalid)?;
    for f in report.failed.iter_mut().filter(|f| f.id.is_none()) {
        f.id = lines[f.index as usize].as_ref().ok().map(|e| e.id.clone());
    }

    let entries: Vec<ManifestEntry> = written.into_iter().filter_map(|m| m.into_inner().ok().flatten()).collect();
    cio::write_jsonl(&out.join("manifest.jsonl"), &entries)?;
    cio::write_jsonl(&out.join("transforms.jsonl"), &report.transforms)?;
    cio::write_json(&out.join("report.json"), &report)?;
    for f in &report.failed {
        eprintln!("warning: sample {} ({}) failed: {}", f.index, f.id.as_deref().unwrap_or("?"), f.error);
    }
    println!(
        "augmented {}/{} samples ({} failed) in {:.3}s, {:.1} samples/s",
        report.succeeded,
        report.total,
        report.failed.len(),
        report.elapsed.as_secs_f64(),
        report.throughput()
    );
    Ok(())
}

fn channel_layout(names: &[&str], dim: usize) -> serde_json::Value {
    let per = dim / names.len();
    names
        .iter()
        .enumerate()
        .map(|(i, n)| json!({"channel": n, "offset": i * per, "len": per}))
        .collect()
}

pub fn embed(cfg: &Config, args: &EmbedArgs, out: &Path) -> Result<(), Failure> {
    let k: Intrinsics<f64> = cio::read_intrinsics(&args.intrinsics)?;
    let e = &cfg.embedding;
    let grid = match (args.rows, args.cols) {
        (Some(rows), Some(cols)) => TokenGridSpec {
            rows,
            cols,
            patch: e.patch,
            anchor: e.anchor,
        },
        _ => TokenGridSpec {
            anchor: e.anchor,
            ..TokenGridSpec::covering(&k, e.patch)
        },
    };
    let depth = match &args.depth {
        Some(p) => Some(cio::depth_from_tensor(&cio::read_cgem(p)?).map_err(|m| invalid(format!("{}: {m}", p.display())))?),
        None => None,
    };
    let rays = ray_grid(&k, &grid).map_err(invalid)?;
    let cam = embed_camera(&rays, &k, &e.camera).map_err(invalid)?;
    prepare_out(out, cfg)?;
    cio::write_cgem(&out.join("e_cam.cgem"), &cio::embedding_tensor(&cam))?;
    cio::write_json(
        &out.join("e_cam.json"),
        &json!({
            "kind": "e_cam",
            "rows": cam.rows, "cols": cam.cols, "dim": cam.dim,
            "layout": channel_layout(&CAMERA_CHANNELS, cam.dim),
            "config": e.camera,
            "grid": grid,
            "intrinsics": k,
        }),
    )?;
    println!("wrote {}x{}x{} camera embedding", cam.rows, cam.cols, cam.dim);

    if let Some(d) = depth {
        let points = pool_to_tokens(&d, &k, &grid).map_err(invalid)?;
        let geo = embed_points(&points, &e.geo).map_err(invalid)?;
        let valid = points.points.iter().filter(|p| p.is_some()).count();
        cio::write_cgem(&out.join("e_geo.cgem"), &cio::embedding_tensor(&geo))?;
        cio::write_json(
            &out.join("e_geo.json"),
            &json!({
                "kind": "e_geo",
                "rows": geo.rows, "cols": geo.cols, "dim": geo.dim,
                "layout": channel_layout(&GEO_CHANNELS, geo.dim),
                "config": e.geo,
                "grid": grid,
                "valid_tokens": valid,
                "intrinsics": k,
            }),
        )?;
        println!("wrote {}x{}x{} point embedding ({valid} valid tokens)", geo.rows, geo.cols, geo.dim);
    }
    Ok(())
}

pub fn unproject(cfg: &Config, args: &UnprojectArgs, out: &Path) -> Result<(), Failure> {
    let k = cio::read_intrinsics(&args.intrinsics)?;
    let d = cio::depth_from_tensor(&cio::read_cgem(&args.depth)?).map_err(|m| invalid(format!("{}: {m}", args.depth.display())))?;
    let cloud = unproject_depth(&d, &k).map_err(invalid)?;
    let mut data = Vec::with_capacity(cloud.points.len() * 3);
    for p in &cloud.points {
        match p {
            Some(p) => data.extend([p.x as f32, p.y as f32, p.z as f32]),
            None => data.extend([f32::NAN; 3]),
        }
    }
    let valid = cloud.points.iter().filter(|p| p.is_some()).count();
    prepare_out(out, cfg)?;
    let t = Tensor3::new(cloud.height, cloud.width, 3, data).map_err(invalid)?;
    cio::write_cgem(&out.join("points.cgem"), &t)?;
    cio::write_json(
        &out.join("points.json"),
        &json!({"kind": "points", "rows": cloud.height, "cols": cloud.width, "dim": 3,
                "layout": channel_layout(&GEO_CHANNELS, 3), "valid_pixels": valid, "intrinsics": k}),
    )?;
    println!("wrote {}x{} point cloud ({valid} valid pixels)", cloud.width, cloud.height);
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(anyhow!("{}: {e}", path.display())))
}

/// Scene id to file, for `.json` / `.txt` files of a directory.
fn scene_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, Failure> {
    let rd = fs::read_dir(dir).map_err(|e| Failure::Io(anyhow!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Failure::Io(anyhow!("{}: {e}", dir.display())))?.path();
        let ext_ok = p.extension().is_some_and(|e| e == "json" || e == "txt");
        if p.is_file() && ext_ok {
            out.push((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p));
        }
    }
    out.sort();
    Ok(out)
}

fn parse_file(path: &Path) -> Result<Vec<camgeom::Detection>, Failure> {
    let text = read_text(path)?;
    match parse_detections(&text) {
        Ok(p) => {
            for w in &p.warnings {
                eprintln!("warning: {}: {w}", path.display());
            }
            Ok(p.detections)
        }
        Err(e @ EvalError::NoParsableJson(_)) => Err(invalid(format!("{}: {e}", path.display()))),
        Err(e) => Err(invalid(e)),
    }
}

fn load_scenes(preds: &Path, truths: &Path) -> Result<Vec<Scene>, Failure> {
    if preds.is_dir() != truths.is_dir() {
        return Err(invalid("--preds and --truths must both be files or both be directories"));
    }
    if !preds.is_dir() {
        let id = preds.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        return Ok(vec![Scene {
            id,
            preds: parse_file(preds)?,
            truths: parse_file(truths)?,
        }]);
    }
    let p = scene_files(preds)?;
    let t = scene_files(truths)?;
    let ids: BTreeSet<&String> = p.iter().chain(&t).map(|(id, _)| id).collect();
    ids.into_iter()
        .map(|id| {
            let load = |files: &[(String, PathBuf)], side: &str| match files.iter().find(|(k, _)| k == id) {
                Some((_, path)) => parse_file(path),
                None => {
                    eprintln!("warning: scene {id} has no {side} file; treating it as empty");
                    Ok(Vec::new())
                }
            };
            Ok(Scene {
                id: id.clone(),
                preds: load(&p, "prediction")?,
                truths: load(&t, "ground-truth")?,
            })
        })
        .collect()
}

fn read_classes(path: &Path) -> Result<BTreeSet<String>, Failure> {
    let text = read_text(path)?;
    let labels: Vec<String> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
    } else {
        text.lines().map(str::to_string).collect()
    };
    Ok(labels.iter().map(|l| normalize_label(l)).filter(|l| !l.is_empty()).collect())
}

fn print_report(r: &EvalReport) {
    println!("{} scene(s), IoU {:?}", r.scenes, r.iou.mode);
    println!("{:>6}  {:>9} {:>9} {:>9}  {:>9}", "IoU", "P", "R", "F1", "macro F1");
    for t in &r.thresholds {
        let m = t.micro.metrics;
        println!(
            "{:>6.2}  {:>9.2} {:>9.2} {:>9.2}  {:>9.2}",
            t.threshold, m.precision, m.recall, m.f1, t.macro_avg.f1
        );
    }
}

pub fn eval(cfg: &Config, args: &EvalArgs, out: &Path) -> Result<(), Failure> {
    let scenes = load_scenes(&args.preds, &args.truths)?;
    let classes = args.classes.as_deref().map(read_classes).transpose()?;
    let report = evaluate_scenes(&scenes, &cfg.eval.iou_thresholds, classes.as_ref(), cfg.eval.iou).map_err(invalid)?;
    prepare_out(out, cfg)?;
    cio::write_json(&out.join("report.json"), &report)?;
    let csv = report.to_csv().map_err(invalid)?;
    cio::write_bytes(&out.join("per_class.csv"), csv.as_bytes())?;
    print_report(&report);
    Ok(())
}

pub fn ambiguity(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let x = &cfg.ambiguity;
    let result = amb::run_experiment(x).map_err(invalid)?;
    prepare_out(out, cfg)?;
    cio::write_bytes(&out.join("bias.csv"), result.bias_csv().map_err(invalid)?.as_bytes())?;
    cio::write_bytes(&out.join("clusters.csv"), result.clusters_csv().map_err(invalid)?.as_bytes())?;
    let summary = result.summary(x);
    cio::write_bytes(&out.join("summary.txt"), summary.as_bytes())?;
    cio::write_json(&out.join("results.json"), &result)?;
    print!("{summary}");
    Ok(())
}
