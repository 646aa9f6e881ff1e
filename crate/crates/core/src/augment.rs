//! Camera-aware geometric augmentation: random resize and principal-point
//! shift applied jointly to raster, intrinsics and depth. 3D boxes are carried
//! through untouched.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, Intrinsics};
use crate::eval::Detection;
use crate::prior::{resample_depth_nearest, DepthMap};
use crate::raster::{resample, FillMode, RasterError, RasterImage};
use crate::transform::{apply_transform, scaled_extent, PixelTransform, TransformError};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum AugmentError {
    #[error("invalid augmentation policy: {0}")]
    BadPolicy(String),
    #[error("{what} is {got_w}x{got_h} but the intrinsics describe {want_w}x{want_h}")]
    ExtentMismatch {
        what: &'static str,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub scale_range: [f64; 2],
    /// Maximum principal-point shift as a fraction of the scaled extent.
    pub shift_range: f64,
    pub pad_or_crop: FillMode,
    pub seed: u64,
    /// Draw independent horizontal and vertical scales.
    pub anisotropic: bool,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self {
            scale_range: [0.7, 1.4],
            shift_range: 0.15,
            pad_or_crop: FillMode::Pad,
            seed: 0,
            anisotropic: false,
        }
    }
}

impl AugmentationPolicy {
    pub fn identity() -> Self {
        Self {
            scale_range: [1.0, 1.0],
            shift_range: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(AugmentError::BadPolicy(format!(
                "scale_range must satisfy 0 < min <= max, got [{lo}, {hi}]"
            )));
        }
        if !(0.0..=0.5).contains(&self.shift_range) {
            return Err(AugmentError::BadPolicy(format!(
                "shift_range must be in [0, 0.5], got {}",
                self.shift_range
            )));
        }
        Ok(())
    }
}

/// One input frame. Depth, when present, must share the image extent.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: RasterImage,
    pub intrinsics: Intrinsics<f64>,
    pub depth: Option<DepthMap<f64>>,
    pub boxes: Option<Vec<Detection>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub image: RasterImage,
    pub intrinsics: Intrinsics<f64>,
    pub depth: Option<DepthMap<f64>>,
    pub boxes: Option<Vec<Detection>>,
    pub transform: PixelTransform<f64>,
    pub provenance: Provenance,
}

/// Independent stream for sample `index`: the same seed always gives the same
/// draws for a given index regardless of scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn lerp(range: [f64; 2], u: f64) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        range[0] + (range[1] - range[0]) * u
    }
}

/// Extent and offset along one axis. The shift is drawn after scaling, so it is
/// a fraction of the scaled extent.
fn axis(policy: &AugmentationPolicy, n: u32, s: f64, u: f64) -> (u32, f64) {
    let scaled = s * n as f64;
    let max_shift = policy.shift_range * scaled;
    let jitter = max_shift * (2.0 * u - 1.0);
    match policy.pad_or_crop {
        FillMode::Pad => (scaled_extent(n, s), jitter),
        FillMode::Crop => {
            let out = ((scaled - 2.0 * max_shift).floor() as u32).max(1);
            let slack = scaled - out as f64;
            (out, (slack / 2.0 + jitter).min(slack).max(0.0))
        }
    }
}

/// Draws a transform for a `width x height` source. Always consumes four
/// uniforms so streams stay aligned across policy variants.
pub fn draw_transform<R: Rng>(
    policy: &AugmentationPolicy,
    width: u32,
    height: u32,
    rng: &mut R,
) -> Result<PixelTransform<f64>, AugmentError> {
    policy.validate()?;
    let u: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
    let sx = lerp(policy.scale_range, u[0]);
    let sy = if policy.anisotropic {
        lerp(policy.scale_range, u[1])
    } else {
        sx
    };
    let (ow, du) = axis(policy, width, sx, u[2]);
    let (oh, dv) = axis(policy, height, sy, u[3]);
    Ok(PixelTransform::new(sx, sy, du, dv, ow, oh)?)
}

fn check_extent(what: &'static str, w: u32, h: u32, k: &Intrinsics<f64>) -> Result<(), AugmentError> {
    if (w, h) != (k.width(), k.height()) {
        return Err(AugmentError::ExtentMismatch {
            what,
            got_w: w,
            got_h: h,
            want_w: k.width(),
            want_h: k.height(),
        });
    }
    Ok(())
}

/// Applies an explicit transform to every component of a sample.
pub fn apply_to_sample(
    sample: &Sample,
    t: &PixelTransform<f64>,
    mode: FillMode,
    provenance: Provenance,
) -> Result<AugmentedSample, AugmentError> {
    let k = &sample.intrinsics;
    check_extent("image", sample.image.width(), sample.image.height(), k)?;
    if let Some(d) = &sample.depth {
        check_extent("depth map", d.width(), d.height(), k)?;
    }
    Ok(AugmentedSample {
        image: resample(&sample.image, t, mode)?,
        intrinsics: apply_transform(k, t)?,
        depth: sample.depth.as_ref().map(|d| resample_depth_nearest(d, t)),
        boxes: sample.boxes.clone(),
        transform: *t,
        provenance,
    })
}

pub fn augment<R: Rng>(
    sample: &Sample,
    policy: &AugmentationPolicy,
    rng: &mut R,
    provenance: Provenance,
) -> Result<AugmentedSample, AugmentError> {
    let t = draw_transform(policy, sample.intrinsics.width(), sample.intrinsics.height(), rng)?;
    apply_to_sample(sample, &t, policy.pad_or_crop, provenance)
}

/// Augments sample number `index` of a batch with its own seeded stream.
pub fn augment_indexed(sample: &Sample, policy: &AugmentationPolicy, index: u64) -> Result<AugmentedSample, AugmentError> {
    let mut rng = sample_rng(policy.seed, index);
    let prov = Provenance {
        source_id: sample.id.clone(),
        seed: policy.seed,
        index,
    };
    augment(sample, policy, &mut rng, prov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub index: u64,
    pub id: String,
    pub seed: u64,
    pub transform: PixelTransform<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSample {
    pub index: u64,
    pub id: Option<String>,
    pub error: String,
}

/// Batch summary. Timing is kept out of the serialized form and out of
/// equality so reports are reproducible byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub total: usize,
    pub succeeded: usize,
    pub failed: Vec<FailedSample>,
    pub transforms: Vec<TransformRecord>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl PartialEq for BatchReport {
    fn eq(&self, o: &Self) -> bool {
        (self.total, self.succeeded, &self.failed, &self.transforms) == (o.total, o.succeeded, &o.failed, &o.transforms)
    }
}

impl BatchReport {
    pub fn throughput(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.succeeded as f64 / secs
        } else {
            0.0
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, AugmentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| AugmentError::Pool(e.to_string()))
}

/// Runs `count` samples on `workers` threads. `load(i)` produces sample `i`;
/// `sink(i, out)` consumes its result. Failures in either are recorded per
/// sample and the batch continues. Results do not depend on `workers`.
pub fn batch_augment<L, S>(
    count: usize,
    policy: &AugmentationPolicy,
    workers: usize,
    load: L,
    sink: S,
) -> Result<BatchReport, AugmentError>
where
    L: Fn(usize) -> Result<Sample, String> + Sync,
    S: Fn(usize, &AugmentedSample) -> Result<(), String> + Sync,
{
    policy.validate()?;
    let started = Instant::now();
    let outcomes: Vec<Result<TransformRecord, FailedSample>> = pool(workers)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let fail = |id: Option<String>, error: String| FailedSample {
                    index: i as u64,
                    id,
                    error,
                };
                let sample = load(i).map_err(|e| fail(None, e))?;
                let out = augment_indexed(&sample, policy, i as u64).map_err(|e| fail(Some(sample.id.clone()), e.to_string()))?;
                sink(i, &out).map_err(|e| fail(Some(sample.id.clone()), e))?;
                Ok(TransformRecord {
                    index: i as u64,
                    id: sample.id,
                    seed: policy.seed,
                    transform: out.transform,
                })
            })
            .collect()
    });

    let mut report = BatchReport {
        total: count,
        succeeded: 0,
        failed: Vec::new(),
        transforms: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for o in outcomes {
        match o {
            Ok(t) => report.transforms.push(t),
            Err(f) => {
                log::warn!("sample {} failed: {}", f.index, f.error);
                report.failed.push(f);
            }
        }
    }
    report.succeeded = report.transforms.len();
    report.elapsed = started.elapsed();
    log::info!(
        "augmented {}/{} samples in {:.3}s ({:.1} samples/s)",
        report.succeeded,
        report.total,
        report.elapsed.as_secs_f64(),
        report.throughput()
    );
    Ok(report)
}

/// In-memory variant of [`batch_augment`]; output slot `i` is `None` when
/// sample `i` failed.
pub fn augment_all(
    samples: &[Sample],
    policy: &AugmentationPolicy,
    workers: usize,
) -> Result<(Vec<Option<AugmentedSample>>, BatchReport), AugmentError> {
    let slots: Vec<std::sync::Mutex<Option<AugmentedSample>>> = samples.iter().map(|_| Default::default()).collect();
    let report = batch_augment(
        samples.len(),
        policy,
        workers,
        |i| Ok(samples[i].clone()),
        |i, out| {
            *slots[i].lock().map_err(|e| e.to_string())? = Some(out.clone());
            Ok(())
        },
    )?;
    let outs = slots.into_iter().map(|m| m.into_inner().unwrap_or_default()).collect();
    Ok((outs, report))
}
