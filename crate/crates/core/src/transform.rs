//! Intrinsic updates under image resampling, cropping and padding.
//!
//! A [`PixelTransform`] maps source pixel coordinates to output coordinates as
//! `u' = sx * u - du`, `v' = sy * v - dv`. The offsets are measured after scaling,
//! so a resize followed by a crop whose top-left corner sits at `(du, dv)` in the
//! resized image is a single transform. The matching intrinsics are
//! `(sx fx, sy fy, sx cx - du, sy cy - dv)`, which keeps every line of sight fixed.

use serde::{Deserialize, Serialize};

use crate::camera::{back_project, CameraError, Intrinsics, Pixel};
use crate::scalar::Real;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum TransformError {
    #[error("scale factor must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("transform offset must be finite")]
    NonFiniteOffset,
    #[error("output extent must be at least 1x1, got {0}x{1}")]
    EmptyExtent(u32, u32),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Scale-and-translate pixel map with a target canvas extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform<T>", into = "RawTransform<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct PixelTransform<T: Real> {
    sx: T,
    sy: T,
    du: T,
    dv: T,
    out_width: u32,
    out_height: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawTransform<T> {
    sx: T,
    sy: T,
    du: T,
    dv: T,
    out_width: u32,
    out_height: u32,
}

impl<T: Real> TryFrom<RawTransform<T>> for PixelTransform<T> {
    type Error = TransformError;
    fn try_from(r: RawTransform<T>) -> Result<Self, Self::Error> {
        PixelTransform::new(r.sx, r.sy, r.du, r.dv, r.out_width, r.out_height)
    }
}

impl<T: Real> From<PixelTransform<T>> for RawTransform<T> {
    fn from(t: PixelTransform<T>) -> Self {
        RawTransform {
            sx: t.sx,
            sy: t.sy,
            du: t.du,
            dv: t.dv,
            out_width: t.out_width,
            out_height: t.out_height,
        }
    }
}

/// `round(s * n)`, at least 1. Only the raster canvas rounds; geometry stays exact.
pub fn scaled_extent<T: Real>(n: u32, s: T) -> u32 {
    let v = (T::lit(n as f64) * s).round().to_f64_lossless();
    if v.is_finite() && v >= 1.0 {
        v.min(u32::MAX as f64) as u32
    } else {
        1
    }
}

impl<T: Real> PixelTransform<T> {
    pub fn new(sx: T, sy: T, du: T, dv: T, out_width: u32, out_height: u32) -> Result<Self, TransformError> {
        for s in [sx, sy] {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(TransformError::NonPositiveScale(s.to_f64_lossless()));
            }
        }
        if !du.is_finite() || !dv.is_finite() {
            return Err(TransformError::NonFiniteOffset);
        }
        if out_width == 0 || out_height == 0 {
            return Err(TransformError::EmptyExtent(out_width, out_height));
        }
        Ok(Self {
            sx,
            sy,
            du,
            dv,
            out_width,
            out_height,
        })
    }

    pub fn identity(width: u32, height: u32) -> Result<Self, TransformError> {
        Self::new(T::one(), T::one(), T::zero(), T::zero(), width, height)
    }

    /// Isotropic resize of a `width x height` canvas by `s`.
    pub fn resize(s: T, width: u32, height: u32) -> Result<Self, TransformError> {
        Self::new(
            s,
            s,
            T::zero(),
            T::zero(),
            scaled_extent(width, s),
            scaled_extent(height, s),
        )
    }

    /// Crop window with top-left corner `(du, dv)`.
    pub fn crop(du: T, dv: T, out_width: u32, out_height: u32) -> Result<Self, TransformError> {
        Self::new(T::one(), T::one(), du, dv, out_width, out_height)
    }

    pub fn sx(&self) -> T {
        self.sx
    }
    pub fn sy(&self) -> T {
        self.sy
    }
    pub fn du(&self) -> T {
        self.du
    }
    pub fn dv(&self) -> T {
        self.dv
    }
    pub fn out_width(&self) -> u32 {
        self.out_width
    }
    pub fn out_height(&self) -> u32 {
        self.out_height
    }

    pub fn apply(&self, p: Pixel<T>) -> Pixel<T> {
        Pixel::new(self.sx * p.u - self.du, self.sy * p.v - self.dv)
    }

    /// Maps an output coordinate back to the source.
    pub fn apply_inverse(&self, p: Pixel<T>) -> Pixel<T> {
        Pixel::new((p.u + self.du) / self.sx, (p.v + self.dv) / self.sy)
    }

    pub fn with_extent(&self, out_width: u32, out_height: u32) -> Result<Self, TransformError> {
        Self::new(self.sx, self.sy, self.du, self.dv, out_width, out_height)
    }
}

/// `(s fx, s fy, s cx, s cy)` with the canvas rounded to `round(s w) x round(s h)`.
pub fn scale<T: Real>(k: &Intrinsics<T>, s: T) -> Result<Intrinsics<T>, TransformError> {
    let t = PixelTransform::resize(s, k.width(), k.height())?;
    apply_transform(k, &t)
}

/// `(sx fx, sy fy, sx cx - du, sy cy - dv)` with the transform's output extent.
pub fn apply_transform<T: Real>(k: &Intrinsics<T>, t: &PixelTransform<T>) -> Result<Intrinsics<T>, TransformError> {
    Ok(Intrinsics::new(
        t.sx * k.fx(),
        t.sy * k.fy(),
        t.sx * k.cx() - t.du,
        t.sy * k.cy() - t.dv,
        t.out_width,
        t.out_height,
    )?)
}

/// `a` followed by `b`. The output extent is `b`'s.
pub fn compose<T: Real>(a: &PixelTransform<T>, b: &PixelTransform<T>) -> PixelTransform<T> {
    PixelTransform {
        sx: b.sx * a.sx,
        sy: b.sy * a.sy,
        du: b.sx * a.du + b.du,
        dv: b.sy * a.dv + b.dv,
        out_width: b.out_width,
        out_height: b.out_height,
    }
}

/// Inverse map `u = (u' + du) / sx`. The source extent is not recorded in a
/// transform, so the inverse canvas is `round(out / s)`; use
/// [`invert_with_extent`] when the true source extent is known.
pub fn invert<T: Real>(t: &PixelTransform<T>) -> PixelTransform<T> {
    let w = scaled_extent(t.out_width, T::one() / t.sx);
    let h = scaled_extent(t.out_height, T::one() / t.sy);
    invert_with_extent(t, w, h)
}

pub fn invert_with_extent<T: Real>(t: &PixelTransform<T>, width: u32, height: u32) -> PixelTransform<T> {
    PixelTransform {
        sx: T::one() / t.sx,
        sy: T::one() / t.sy,
        du: -t.du / t.sx,
        dv: -t.dv / t.sy,
        out_width: width.max(1),
        out_height: height.max(1),
    }
}

/// Sample grid used by the ray checks: up to `n x n` points spread over the
/// canvas, always including the four corners and the pixel centers next to them.
fn check_grid<T: Real>(width: u32, height: u32, n: usize) -> Vec<Pixel<T>> {
    let axis = |extent: u32| -> Vec<T> {
        let e = extent as f64;
        let mut v: Vec<f64> = (0..n).map(|i| e * i as f64 / (n - 1) as f64).collect();
        v.push(0.5);
        v.push(e - 0.5);
        v.into_iter().map(T::lit).collect()
    };
    let us = axis(width);
    let vs = axis(height);
    let mut out = Vec::with_capacity(us.len() * vs.len());
    for &v in &vs {
        for &u in &us {
            out.push(Pixel::new(u, v));
        }
    }
    out
}

const CHECK_GRID: usize = 33;

/// Largest angle between the ray of a source pixel under `k` and the ray of the
/// mapped pixel under `target`, over a dense grid on `k`'s canvas.
pub fn ray_deviation<T: Real>(k: &Intrinsics<T>, t: &PixelTransform<T>, target: &Intrinsics<T>) -> T {
    check_grid::<T>(k.width(), k.height(), CHECK_GRID)
        .into_iter()
        .map(|p| back_project(p, k).angle_to(&back_project(t.apply(p), target)))
        .fold(T::zero(), T::max)
}

/// Maximum angular deviation (radians) of the ray field when the raster is
/// resampled by `t` and the intrinsics are updated consistently.
pub fn ray_preservation_check<T: Real>(k: &Intrinsics<T>, t: &PixelTransform<T>) -> Result<T, TransformError> {
    let updated = apply_transform(k, t)?;
    Ok(ray_deviation(k, t, &updated))
}

/// Same check but keeping the source intrinsics after resampling: the error a
/// camera-agnostic pipeline commits.
pub fn stale_ray_deviation<T: Real>(k: &Intrinsics<T>, t: &PixelTransform<T>) -> T {
    ray_deviation(k, t, k)
}
