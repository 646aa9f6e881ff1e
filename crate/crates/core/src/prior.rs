//! Depth-map unprojection, token pooling, the point embedding `E_geo`, and the
//! two monocular depth estimators (camera-agnostic and camera-aware).

use serde::{Deserialize, Serialize};

use crate::camera::{back_project, normalized_coords, Intrinsics, Pixel, Point3};
use crate::embedding::{sinusoid_into, EmbedError, EmbeddingGrid, TokenGridSpec};
use crate::scalar::Real;
use crate::transform::PixelTransform;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum PriorError {
    #[error("depth map is {depth_w}x{depth_h} but intrinsics describe {k_w}x{k_h}")]
    ExtentMismatch {
        depth_w: u32,
        depth_h: u32,
        k_w: u32,
        k_h: u32,
    },
    #[error("depth map needs {expected} samples, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("valid depth at index {0} is not positive and finite")]
    InvalidDepth(usize),
    #[error("input must be positive and finite: {0}")]
    NonPositiveInput(&'static str),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Metric z-depth per pixel with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: u32,
    height: u32,
    values: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Real> DepthMap<T> {
    pub fn new(width: u32, height: u32, values: Vec<T>, valid: Vec<bool>) -> Result<Self, PriorError> {
        let n = width as usize * height as usize;
        if values.len() != n || valid.len() != n {
            return Err(PriorError::BadLength {
                expected: n,
                got: values.len().min(valid.len()),
            });
        }
        if let Some(i) = (0..n).find(|&i| valid[i] && !(values[i] > T::zero() && values[i].is_finite())) {
            return Err(PriorError::InvalidDepth(i));
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Treats every non-finite or non-positive sample as invalid.
    pub fn from_values(width: u32, height: u32, values: Vec<T>) -> Result<Self, PriorError> {
        let valid = values.iter().map(|v| v.is_finite() && *v > T::zero()).collect();
        Self::new(width, height, values, valid)
    }

    pub fn constant(width: u32, height: u32, z: T) -> Result<Self, PriorError> {
        Self::from_values(width, height, vec![z; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        let i = row * self.width as usize + col;
        self.valid[i].then(|| self.values[i])
    }

    /// Values with invalid samples replaced by NaN (the on-disk encoding).
    pub fn to_nan_encoded(&self) -> Vec<T> {
        self.values
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| if ok { v } else { T::nan() })
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Pixel-resolution point cloud in the camera frame; `None` marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub width: u32,
    pub height: u32,
    pub points: Vec<Option<Point3<T>>>,
}

/// Token-resolution points; `None` marks tokens without a valid depth sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Option<Point3<T>>>,
}

impl<T> PointGrid<T> {
    pub fn at(&self, i: usize, j: usize) -> Option<&Point3<T>> {
        self.points[i * self.cols + j].as_ref()
    }
}

fn check_extent<T: Real>(depth: &DepthMap<T>, k: &Intrinsics<T>) -> Result<(), PriorError> {
    if depth.width != k.width() || depth.height != k.height() {
        return Err(PriorError::ExtentMismatch {
            depth_w: depth.width,
            depth_h: depth.height,
            k_w: k.width(),
            k_h: k.height(),
        });
    }
    Ok(())
}

/// Pixel center `(u, v)` with depth `Z` goes to `((u - cx) / fx * Z, (v - cy) / fy * Z, Z)`.
pub fn unproject<T: Real>(depth: &DepthMap<T>, k: &Intrinsics<T>) -> Result<PointCloud<T>, PriorError> {
    check_extent(depth, k)?;
    let (w, h) = (depth.width as usize, depth.height as usize);
    let mut points = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            points.push(depth.get(row, col).map(|z| {
                let d = normalized_coords(Pixel::center_of(row, col), k);
                Point3::new(d[0] * z, d[1] * z, z)
            }));
        }
    }
    Ok(PointCloud {
        width: depth.width,
        height: depth.height,
        points,
    })
}

/// Integer pixel whose cell contains `x`, clamped to the canvas.
fn cell_index<T: Real>(x: T, extent: u32) -> usize {
    let f = x.floor().to_f64_lossless();
    if f.is_nan() || f < 0.0 {
        0
    } else {
        (f as usize).min(extent as usize - 1)
    }
}

/// Pools a depth map to token resolution. Each token takes the depth of the
/// pixel containing its anchor (nearest sample, no averaging) and places the
/// point on the anchor's own line of sight, so `project(point) == anchor`.
pub fn pool_to_tokens<T: Real>(depth: &DepthMap<T>, k: &Intrinsics<T>, grid: &TokenGridSpec) -> Result<PointGrid<T>, PriorError> {
    check_extent(depth, k)?;
    grid.validate(k.width(), k.height())?;
    let (rows, cols) = (grid.rows as usize, grid.cols as usize);
    let mut points = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (u, v) = grid.anchor_pixel::<T>(i, j);
            let z = depth.get(cell_index(v, depth.height), cell_index(u, depth.width));
            points.push(z.map(|z| back_project(Pixel::new(u, v), k).at_depth(z)));
        }
    }
    Ok(PointGrid { rows, cols, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoEmbedConfig {
    pub dim: usize,
    /// Base period in meters.
    pub period: f64,
}

impl Default for GeoEmbedConfig {
    fn default() -> Self {
        Self { dim: 192, period: 100.0 }
    }
}

pub const GEO_CHANNELS: [&str; 3] = ["x", "y", "z"];

/// Point embedding `E_geo`: x, y, z each get `dim / 3` sinusoid values; tokens
/// without a point are all zeros.
pub fn embed_points<T: Real>(grid: &PointGrid<T>, cfg: &GeoEmbedConfig) -> Result<EmbeddingGrid<T>, PriorError> {
    if cfg.dim == 0 || !cfg.dim.is_multiple_of(6) {
        return Err(EmbedError::BadDimension { dim: cfg.dim, multiple: 6 }.into());
    }
    if !(cfg.period > 0.0) || !cfg.period.is_finite() {
        return Err(EmbedError::BadPeriod.into());
    }
    let dim = cfg.dim;
    let block = dim / 3;
    let period = T::lit(cfg.period);
    let mut data = vec![T::zero(); grid.points.len() * dim];
    for (tok, p) in data.chunks_exact_mut(dim).zip(&grid.points) {
        if let Some(p) = p {
            for (chunk, x) in tok.chunks_exact_mut(block).zip(p.to_array()) {
                sinusoid_into(x, period, chunk);
            }
        }
    }
    Ok(EmbeddingGrid {
        rows: grid.rows,
        cols: grid.cols,
        dim,
        data,
    })
}

/// Nearest-sample resampling of a depth map through `t`. Output pixels whose
/// source position falls off the canvas become invalid.
pub fn resample_depth_nearest<T: Real>(depth: &DepthMap<T>, t: &PixelTransform<T>) -> DepthMap<T> {
    let (ow, oh) = (t.out_width() as usize, t.out_height() as usize);
    let (sw, sh) = (T::lit(depth.width as f64), T::lit(depth.height as f64));
    let mut values = Vec::with_capacity(ow * oh);
    let mut valid = Vec::with_capacity(ow * oh);
    for row in 0..oh {
        for col in 0..ow {
            let src = t.apply_inverse(Pixel::center_of(row, col));
            let inside = src.u >= T::zero() && src.u < sw && src.v >= T::zero() && src.v < sh;
            let z = if inside {
                depth.get(cell_index(src.v, depth.height), cell_index(src.u, depth.width))
            } else {
                None
            };
            values.push(z.unwrap_or_else(T::nan));
            valid.push(z.is_some());
        }
    }
    DepthMap {
        width: t.out_width(),
        height: t.out_height(),
        values,
        valid,
    }
}

fn positive<T: Real>(x: T, name: &'static str) -> Result<T, PriorError> {
    if x > T::zero() && x.is_finite() {
        Ok(x)
    } else {
        Err(PriorError::NonPositiveInput(name))
    }
}

/// Camera-agnostic estimate `f_assumed * H_prior / h_proj`.
pub fn biased_depth_estimate<T: Real>(h_proj: T, h_prior: T, f_assumed: T) -> Result<T, PriorError> {
    let h = positive(h_proj, "h_proj")?;
    let hp = positive(h_prior, "h_prior")?;
    let f = positive(f_assumed, "f_assumed")?;
    Ok(f * hp / h)
}

/// Camera-aware estimate `fy * H_prior / h_proj` with the true, current `fy`.
pub fn aware_depth_estimate<T: Real>(h_proj: T, h_prior: T, k: &Intrinsics<T>) -> Result<T, PriorError> {
    let h = positive(h_proj, "h_proj")?;
    let hp = positive(h_prior, "h_prior")?;
    Ok(k.fy() * hp / h)
}
