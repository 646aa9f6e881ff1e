//! Acceptance suite: one PASS/FAIL line per criterion. Oracles here are
//! written independently of the library code they check.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use camgeom::ambiguity::{
    generate_scenes, make_witness, run_bias_experiment, run_mixed_pool_experiment, Estimator, ExperimentOptions, SceneGenConfig,
    SizePrior, ViewTriple, WitnessKind,
};
use camgeom::augment::{augment_all, Sample};
use camgeom::boxes::{iou3d, OrientedBox3};
use camgeom::camera::{project, Pixel};
use camgeom::embedding::{embed, ray_grid, sinusoid, CameraEmbedConfig, TokenGridSpec};
use camgeom::eval::{f1_score, parse_detections, Detection};
use camgeom::io::{depth_tensor, encode_image};
use camgeom::prior::{unproject, DepthMap};
use camgeom::raster::{RasterImage, Samples};
use camgeom::transform::{ray_deviation, ray_preservation_check, scale, stale_ray_deviation, PixelTransform};
use camgeom::{AugmentationPolicy, FillMode, Intrinsics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn c1_coupled_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let f = rng.random_range(100.0..5000.0);
        let h = rng.random_range(0.05..5.0);
        let z = rng.random_range(0.2..50.0);
        let a: f64 = rng.random_range(0.1..10.0);
        let b: f64 = rng.random_range(0.1..10.0);
        let kind = match i % 3 {
            0 => WitnessKind::Coupled { alpha: a, beta: b },
            1 => WitnessKind::FocalDepth(a),
            _ => WitnessKind::SizeDepth(b),
        };
        let w = make_witness(ViewTriple::new(f, h, z), kind).map_err(|e| e.to_string())?;
        // oracle: evaluate f H / Z on both triples directly
        let base = f * h / z;
        let var = w.variant.f * w.variant.h / w.variant.z;
        worst = worst.max(rel(base, var)).max(rel(w.h_proj, base));
    }
    let took = start.elapsed();
    check(
        worst <= 1e-9 && took < Duration::from_secs(1),
        format!("10^4 witnesses, worst relative gap {worst:.2e}, {took:.2?}"),
    )
}

/// Reference angle between two rays through pixel coordinates.
fn ray_angle(k1: &Intrinsics<f64>, p1: (f64, f64), k2: &Intrinsics<f64>, p2: (f64, f64)) -> f64 {
    let a = [(p1.0 - k1.cx()) / k1.fx(), (p1.1 - k1.cy()) / k1.fy(), 1.0];
    let b = [(p2.0 - k2.cx()) / k2.fx(), (p2.1 - k2.cy()) / k2.fy(), 1.0];
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt().atan2(dot)
}

fn c2_resampling_as_intrinsics() -> Outcome {
    let start = Instant::now();
    let cams = [
        Intrinsics::new(320.0, 320.0, 320.0, 240.0, 640, 480).unwrap(), // 90 deg horizontal FOV
        Intrinsics::new(1000.0, 1000.0, 960.0, 540.0, 1920, 1080).unwrap(),
        Intrinsics::new(577.9, 580.2, 319.5, 239.5, 640, 480).unwrap(),
        Intrinsics::new(1450.0, 1446.0, 702.0, 512.5, 1440, 1920).unwrap(),
        Intrinsics::new(210.0, 190.0, 100.0, 130.0, 224, 224).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_updated, mut min_stale) = (0.0f64, f64::INFINITY);
    for (ci, k) in cams.iter().enumerate() {
        for _ in 0..100 {
            let mut s = || {
                let m: f64 = rng.random_range(0.1..1.0);
                if rng.random_bool(0.5) { 1.0 + m } else { 1.0 / (1.0 + m) }
            };
            let (sx, sy) = (s(), s());
            let du = rng.random_range(-0.2..0.2) * k.width() as f64;
            let dv = rng.random_range(-0.2..0.2) * k.height() as f64;
            let ow = ((k.width() as f64 * sx).round() as u32).max(1);
            let oh = ((k.height() as f64 * sy).round() as u32).max(1);
            let t = PixelTransform::new(sx, sy, du, dv, ow, oh).unwrap();
            let dev = ray_preservation_check(k, &t).map_err(|e| e.to_string())?;
            // independent oracle on the four corners and the center
            let k2 = Intrinsics::new(sx * k.fx(), sy * k.fy(), sx * k.cx() - du, sy * k.cy() - dv, ow, oh).unwrap();
            let (w, h) = (k.width() as f64, k.height() as f64);
            for p in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h), (w / 2.0, h / 2.0)] {
                worst_updated = worst_updated.max(ray_angle(k, p, &k2, (sx * p.0 - du, sy * p.1 - dv)));
            }
            worst_updated = worst_updated.max(dev);
            if ci == 0 {
                min_stale = min_stale.min(stale_ray_deviation(k, &t));
            }
        }
    }
    let took = start.elapsed();
    check(
        worst_updated < 1e-9 && min_stale > 1e-2 && took < Duration::from_secs(5),
        format!("500 transforms: updated max {worst_updated:.2e} rad, stale min {min_stale:.3} rad (90 deg FOV), {took:.2?}"),
    )
}

fn exact_priors() -> std::collections::BTreeMap<String, SizePrior> {
    [("chair", 0.9, 0.6), ("table", 0.75, 1.5), ("door", 2.0, 0.45)]
        .into_iter()
        .map(|(k, mean, aspect)| (k.to_string(), SizePrior { mean, spread: 0.0, aspect }))
        .collect()
}

fn c3_depth_bias_law() -> Outcome {
    let start = Instant::now();
    let k = Intrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap();
    let cfg = SceneGenConfig::default();
    let scenes = generate_scenes(2000, &[k], &exact_priors(), 3, &cfg).map_err(|e| e.to_string())?;
    let n: usize = scenes.iter().map(|s| s.objects.len()).sum();
    let rows = run_bias_experiment(&scenes, &[0.8, 1.2], &[Estimator::Agnostic, Estimator::Aware], &ExperimentOptions::default())
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut ok = n >= 10_000 && took < Duration::from_secs(10);
    let mut parts = Vec::new();
    for r in &rows {
        let (want, tol) = match r.estimator {
            Estimator::Agnostic => (1.0 / r.s, 1e-6),
            Estimator::Aware => (1.0, 1e-9),
        };
        let err = (r.summary.ratio_mean - want).abs();
        ok &= err <= tol;
        parts.push(format!("{} s={} ratio {:.9} (F1 {:.1})", r.estimator.name(), r.s, r.summary.ratio_mean, r.summary.f1));
    }
    check(ok, format!("{n} objects: {}; {took:.2?}; synthetic F1 is not the detector's F1", parts.join(", ")))
}

fn c4_mixed_pool() -> Outcome {
    let pool = [
        Intrinsics::new(580.0, 580.0, 320.0, 240.0, 640, 480).unwrap(),
        Intrinsics::new(1160.0, 1160.0, 320.0, 240.0, 640, 480).unwrap(),
    ];
    let scenes = generate_scenes(400, &pool, &exact_priors(), 4, &SceneGenConfig::default()).map_err(|e| e.to_string())?;
    let rows = run_mixed_pool_experiment(&scenes, &ExperimentOptions::default()).map_err(|e| e.to_string())?;
    let f_assumed = (580.0 + 1160.0) / 2.0;
    let mut ok = rows.len() == 2;
    let mut parts = Vec::new();
    for r in &rows {
        let want = f_assumed / r.fy;
        ok &= rel(r.agnostic.ratio_mean, want) <= 0.01 && (r.aware.ratio_mean - 1.0).abs() <= 1e-9;
        parts.push(format!(
            "f={} agnostic {:.6} (expect {:.4}) aware {:.12}",
            r.fy, r.agnostic.ratio_mean, want, r.aware.ratio_mean
        ));
    }
    check(ok, parts.join("; "))
}

fn c5_f1_identity() -> Outcome {
    // (P, R, F1) at IoU 0.25 as printed
    let table = [
        (47.5, 44.2, 45.7),
        (38.4, 33.3, 35.4),
        (26.4, 22.9, 24.3),
        (33.0, 30.5, 31.6),
        (48.3, 45.0, 46.5),
        (49.5, 43.6, 46.0),
        (26.7, 25.0, 25.8),
        (34.7, 32.1, 33.2),
    ];
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (p, r, f) in table {
        let oracle = 2.0 * p * r / (p + r);
        assert!((f1_score(p, r) - oracle).abs() < 1e-12);
        let gap: f64 = oracle - f;
        worst = worst.max(gap.abs());
        if gap.abs() > 0.1 {
            bad.push(format!("{p}/{r}: {oracle:.2} vs {f}"));
        }
    }
    check(
        bad.is_empty(),
        format!(
            "worst |2PR/(P+R) - F1| = {worst:.2}; {} of 8 rows outside 0.1{}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" ({})", bad.join("; ")) }
        ),
    )
}

/// Rotation `Rz(yaw) Ry(pitch) Rx(roll)`, written out from the elementary matrices.
fn rot(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let rz = [[yaw.cos(), -yaw.sin(), 0.0], [yaw.sin(), yaw.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = [[pitch.cos(), 0.0, pitch.sin()], [0.0, 1.0, 0.0], [-pitch.sin(), 0.0, pitch.cos()]];
    let rx = [[1.0, 0.0, 0.0], [0.0, roll.cos(), -roll.sin()], [0.0, roll.sin(), roll.cos()]];
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    };
    mul(mul(rz, ry), rx)
}

struct McBox {
    c: [f64; 3],
    half: [f64; 3],
    r: [[f64; 3]; 3],
}

impl McBox {
    fn new(p: [f64; 9]) -> Self {
        Self {
            c: [p[0], p[1], p[2]],
            half: [p[3] / 2.0, p[4] / 2.0, p[5] / 2.0],
            r: rot(p[6], p[7], p[8]),
        }
    }
    /// Local box coordinates to world.
    fn to_world(&self, l: [f64; 3]) -> [f64; 3] {
        let mut w = self.c;
        for (i, wi) in w.iter_mut().enumerate() {
            *wi += (0..3).map(|k| self.r[i][k] * l[k]).sum::<f64>();
        }
        w
    }
    fn contains(&self, p: [f64; 3]) -> bool {
        let d = [p[0] - self.c[0], p[1] - self.c[1], p[2] - self.c[2]];
        (0..3).all(|k| {
            let local: f64 = (0..3).map(|i| self.r[i][k] * d[i]).sum();
            local.abs() <= self.half[k]
        })
    }
    fn volume(&self) -> f64 {
        8.0 * self.half[0] * self.half[1] * self.half[2]
    }
}

/// Intersection volume by sampling uniformly inside `a` and testing against `b`.
fn mc_iou(pa: [f64; 9], pb: [f64; 9], samples: usize, seed: u64) -> f64 {
    let (a, b) = (McBox::new(pa), McBox::new(pb));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let l = [
            rng.random_range(-a.half[0]..a.half[0]),
            rng.random_range(-a.half[1]..a.half[1]),
            rng.random_range(-a.half[2]..a.half[2]),
        ];
        hits += b.contains(a.to_world(l)) as usize;
    }
    let inter = a.volume() * hits as f64 / samples as f64;
    inter / (a.volume() + b.volume() - inter)
}

fn c6_oriented_iou() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rand_box = |rng: &mut ChaCha8Rng, near: [f64; 3]| -> [f64; 9] {
        [
            near[0] + rng.random_range(-0.6..0.6),
            near[1] + rng.random_range(-0.6..0.6),
            near[2] + rng.random_range(-0.6..0.6),
            rng.random_range(0.3..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        ]
    };
    let pairs: Vec<([f64; 9], [f64; 9])> = (0..200)
        .map(|i| {
            let a = rand_box(&mut rng, [0.0; 3]);
            let mut b = rand_box(&mut rng, [a[0], a[1], a[2]]);
            // a quarter of the pairs share a yaw-only pose, the common case in indoor data
            if i % 4 == 0 {
                b[7] = 0.0;
                b[8] = 0.0;
            }
            (a, b)
        })
        .collect();
    let errs: Vec<Result<f64, String>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (pa, pb))| {
            let a = OrientedBox3::from_params(*pa).map_err(|e| e.to_string())?;
            let b = OrientedBox3::from_params(*pb).map_err(|e| e.to_string())?;
            let exact = iou3d(&a, &b).map_err(|e| e.to_string())?;
            Ok((exact - mc_iou(*pa, *pb, 1_000_000, 1000 + i as u64)).abs())
        })
        .collect();
    let errs: Vec<f64> = errs.into_iter().collect::<Result<_, _>>()?;
    let worst_mc = errs.iter().cloned().fold(0.0, f64::max);

    let mut worst_aa = 0.0f64;
    for _ in 0..1000 {
        let a: [f64; 6] = std::array::from_fn(|i| if i < 3 { rng.random_range(-1.0..1.0) } else { rng.random_range(0.2..2.0) });
        let b: [f64; 6] = std::array::from_fn(|i| if i < 3 { rng.random_range(-1.0..1.0) } else { rng.random_range(0.2..2.0) });
        let overlap: f64 = (0..3)
            .map(|k| {
                let lo = (a[k] - a[k + 3] / 2.0).max(b[k] - b[k + 3] / 2.0);
                let hi = (a[k] + a[k + 3] / 2.0).min(b[k] + b[k + 3] / 2.0);
                (hi - lo).max(0.0)
            })
            .product();
        let (va, vb) = (a[3] * a[4] * a[5], b[3] * b[4] * b[5]);
        let closed = overlap / (va + vb - overlap);
        let ba = OrientedBox3::axis_aligned([a[0], a[1], a[2]], [a[3], a[4], a[5]]).unwrap();
        let bb = OrientedBox3::axis_aligned([b[0], b[1], b[2]], [b[3], b[4], b[5]]).unwrap();
        worst_aa = worst_aa.max((iou3d(&ba, &bb).unwrap() - closed).abs());
    }
    let took = start.elapsed();
    check(
        worst_mc <= 5e-3 && worst_aa <= 1e-12 && took < Duration::from_secs(60),
        format!("200 oriented pairs vs 10^6-sample oracle: max err {worst_mc:.2e}; 1000 axis-aligned: max err {worst_aa:.1e}; {took:.2?}"),
    )
}

fn c7_parser_fixture() -> Outcome {
    let text = "```json\n[\n    {\"label\": \"curtain\", \"bbox_3d\": [-0.5, -0.0, 0.7, 0.9, 0.4, 2.0, -2.5, 1.1, -2.9]},\n    {\"label\": \"bathtub\", \"bbox_3d\": [-0.3, -0.6, -1.2, 2.6, 0.8, 0.7, -2.0, 1.0, -2.7]},\n    \u{22ef}\n]\n```";
    let got = parse_detections(text).map_err(|e| e.to_string())?;
    let want = [
        ("curtain", [-0.5, -0.0, 0.7, 0.9, 0.4, 2.0, -2.5, 1.1, -2.9]),
        ("bathtub", [-0.3, -0.6, -1.2, 2.6, 0.8, 0.7, -2.0, 1.0, -2.7]),
    ];
    let ok = got.detections.len() == 2
        && got
            .detections
            .iter()
            .zip(want)
            .all(|(d, (l, p)): (&Detection, _)| d.label == l && d.bbox.to_params() == p);
    check(ok, format!("{} boxes recovered, {} warning(s)", got.detections.len(), got.warnings.len()))
}

fn frame(i: usize) -> Sample {
    let (w, h) = (128u32, 96u32);
    let data = (0..w * h * 3).map(|j| ((j as usize * 13 + i * 7) % 256) as u8).collect();
    let depth = (0..w * h).map(|j| 0.5 + ((j as usize + i) % 17) as f64 * 0.3).collect();
    let f = 80.0 + i as f64;
    Sample {
        id: format!("frame{i:03}"),
        image: RasterImage::new(w, h, 3, Samples::U8(data)).unwrap(),
        intrinsics: Intrinsics::new(f, f * 1.01, 63.5 + (i % 5) as f64, 47.5 - (i % 3) as f64, w, h).unwrap(),
        depth: Some(DepthMap::from_values(w, h, depth).unwrap()),
        boxes: Some(vec![Detection::new("chair", OrientedBox3::from_params([0.1, 0.2, 2.0, 0.5, 0.9, 0.5, 0.3, 0.0, 0.0]).unwrap())]),
    }
}

fn c8_augmentation() -> Outcome {
    let samples: Vec<Sample> = (0..100).map(frame).collect();
    let mut all_ok = true;
    let mut notes = Vec::new();
    for mode in [FillMode::Pad, FillMode::Crop] {
        let policy = AugmentationPolicy {
            seed: 8,
            pad_or_crop: mode,
            ..AugmentationPolicy::default()
        };
        let bytes = |outs: &[Option<camgeom::AugmentedSample>]| -> Vec<Vec<u8>> {
            outs.iter()
                .map(|o| {
                    let o = o.as_ref().expect("sample succeeded");
                    let mut b = encode_image(&o.image);
                    b.extend(depth_tensor(o.depth.as_ref().unwrap()).encode());
                    b.extend(o.intrinsics.to_json_string().into_bytes());
                    b.extend(serde_json::to_vec(&o.transform).unwrap());
                    b.extend(serde_json::to_vec(o.boxes.as_ref().unwrap()).unwrap());
                    b
                })
                .collect()
        };
        let (a, _) = augment_all(&samples, &policy, 1).map_err(|e| e.to_string())?;
        let (b, _) = augment_all(&samples, &policy, 8).map_err(|e| e.to_string())?;
        let identical = bytes(&a) == bytes(&b);
        let mut worst_ray = 0.0f64;
        let mut worst_rt = 0.0f64;
        let mut boxes_kept = true;
        for (src, out) in samples.iter().zip(&a) {
            let out = out.as_ref().unwrap();
            worst_ray = worst_ray.max(ray_deviation(&src.intrinsics, &out.transform, &out.intrinsics));
            let s = out.transform.sx();
            let back = scale(&scale(&src.intrinsics, s).unwrap(), 1.0 / s).unwrap();
            for (x, y) in [
                (back.fx(), src.intrinsics.fx()),
                (back.fy(), src.intrinsics.fy()),
                (back.cx(), src.intrinsics.cx()),
                (back.cy(), src.intrinsics.cy()),
            ] {
                worst_rt = worst_rt.max(rel(x, y));
            }
            boxes_kept &= out.boxes == src.boxes;
        }
        all_ok &= identical && worst_ray < 1e-9 && worst_rt <= 1e-12 && boxes_kept;
        notes.push(format!(
            "{mode:?}: workers 1 vs 8 identical={identical}, max ray dev {worst_ray:.1e} rad, s->1/s max rel {worst_rt:.1e}"
        ));
    }
    check(all_ok, format!("100 frames; {}", notes.join("; ")))
}

fn c9_embedding_invariance() -> Outcome {
    let cfg = CameraEmbedConfig::default();
    let mut worst = 0.0f64;
    let mut in_range = true;
    let cams = [
        Intrinsics::new(500.0, 480.0, 221.3, 170.9, 448, 336).unwrap(),
        Intrinsics::new(300.0, 300.0, 224.0, 168.0, 448, 336).unwrap(),
        Intrinsics::new(1800.0, 1750.0, 100.0, 300.0, 448, 336).unwrap(),
    ];
    for k in &cams {
        let base = embed::<f64>(&ray_grid(k, &TokenGridSpec::covering(k, 28)).unwrap(), k, &cfg).unwrap();
        for s in [0.5, 2.0, 3.0] {
            let ks = scale(k, s).unwrap();
            let patch = (28.0 * s) as u32;
            let e = embed::<f64>(&ray_grid(&ks, &TokenGridSpec::covering(&ks, patch)).unwrap(), &ks, &cfg).unwrap();
            if (e.rows, e.cols) != (base.rows, base.cols) {
                return Err(format!("grid changed under s={s}"));
            }
            for tok in 0..e.rows * e.cols {
                let o = tok * cfg.dim;
                for c in 0..cfg.dim / 2 {
                    worst = worst.max((e.data[o + c] - base.data[o + c]).abs());
                }
            }
            in_range &= e.data.iter().all(|v| (-1.0..=1.0).contains(v));
        }
        in_range &= base.data.iter().all(|v| (-1.0..=1.0).contains(v));
    }
    // principal point exactly at the anchor of token (1, 2) with patch 16
    let k = Intrinsics::new(700.0, 650.0, 40.0, 24.0, 64, 48).unwrap();
    let e = embed(&ray_grid(&k, &TokenGridSpec::new(3, 4, 16)).unwrap(), &k, &cfg).unwrap();
    let quarter = cfg.dim / 4;
    let tok = e.token(1, 2);
    let zero_pattern: Vec<f64> = (0..quarter).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
    let pp_ok = tok[..quarter] == zero_pattern[..] && tok[quarter..2 * quarter] == zero_pattern[..] && sinusoid(0.0, quarter, cfg.period) == zero_pattern;
    check(
        worst <= 1e-10 && in_range && pp_ok,
        format!("ray channels max diff {worst:.1e} over s in {{0.5, 2, 3}}; values in [-1, 1]: {in_range}; principal-point token zero pattern: {pp_ok}"),
    )
}

fn c10_unprojection_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(8..96u32), rng.random_range(8..96u32));
        let k = Intrinsics::new(
            rng.random_range(50.0..3000.0),
            rng.random_range(50.0..3000.0),
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
            w,
            h,
        )
        .unwrap();
        let values: Vec<f64> = (0..w * h)
            .map(|_| if rng.random_bool(0.1) { f64::NAN } else { rng.random_range(0.05..100.0) })
            .collect();
        let d = DepthMap::from_values(w, h, values).unwrap();
        let cloud = unproject(&d, &k).map_err(|e| e.to_string())?;
        for (idx, p) in cloud.points.iter().enumerate() {
            if let Some(p) = p {
                let (row, col) = (idx / w as usize, idx % w as usize);
                let px = project(*p, &k).map_err(|e| e.to_string())?;
                let c = Pixel::<f64>::center_of(row, col);
                worst = worst.max((px.u - c.u).abs().max((px.v - c.v).abs()));
                checked += 1;
            }
        }
    }
    check(worst <= 1e-9, format!("{checked} valid pixels, max reprojection error {worst:.1e} px"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("coupled-scaling invariance", c1_coupled_scaling),
        ("resampling as intrinsics update", c2_resampling_as_intrinsics),
        ("depth-bias law", c3_depth_bias_law),
        ("mixed-pool conflict", c4_mixed_pool),
        ("F1 identity against printed table", c5_f1_identity),
        ("oriented IoU oracle", c6_oriented_iou),
        ("parser fixture", c7_parser_fixture),
        ("augmentation determinism and consistency", c8_augmentation),
        ("embedding invariance", c9_embedding_invariance),
        ("unprojection duality", c10_unprojection_duality),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
