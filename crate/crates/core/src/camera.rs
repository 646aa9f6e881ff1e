//! Pinhole camera model without distortion or skew.
//!
//! Pixel coordinates are continuous. The center of integer pixel `(row i, col j)`
//! sits at `(j + 0.5, i + 0.5)`, so the image canvas spans `[0, width] x [0, height]`.
//! Every module in the crate uses this convention.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum CameraError {
    #[error("point is not in front of the camera (z = {0})")]
    NonPositiveDepth(f64),
    #[error("physical size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
}

/// A 3D point in meters. The frame (world or camera) is implied by context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn scaled(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Continuous pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel<T> {
    pub u: T,
    pub v: T,
}

impl<T: Real> Pixel<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    /// Center of the integer pixel at `(row, col)`.
    pub fn center_of(row: usize, col: usize) -> Self {
        let half = T::lit(0.5);
        Self::new(T::lit(col as f64) + half, T::lit(row as f64) + half)
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Unit-length line of sight in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    dir: [T; 3],
}

impl<T: Real> Ray<T> {
    /// Normalizes `d`. The caller guarantees `d` is non-zero.
    pub fn from_direction(d: [T; 3]) -> Self {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        Self {
            dir: [d[0] / n, d[1] / n, d[2] / n],
        }
    }

    pub fn direction(&self) -> [T; 3] {
        self.dir
    }

    /// Point on the ray whose camera-frame depth (z) equals `depth`.
    pub fn at_depth(&self, depth: T) -> Point3<T> {
        let k = depth / self.dir[2];
        Point3::new(self.dir[0] * k, self.dir[1] * k, depth)
    }

    /// Angle to another ray in radians.
    pub fn angle_to(&self, other: &Self) -> T {
        angle_between(self.dir, other.dir)
    }
}

/// Angle between two vectors. Uses `atan2(|a x b|, a . b)`, which stays accurate
/// for nearly parallel inputs where `acos` loses half the digits.
pub fn angle_between<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cross.atan2(dot)
}

/// Pinhole intrinsics `K = [fx 0 cx; 0 fy cy; 0 0 1]` plus the image extent.
///
/// Construction validates `fx, fy > 0`, finite principal point and a non-empty
/// extent; values are immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics<T>", into = "RawIntrinsics<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Intrinsics<T: Real> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    width: u32,
    height: u32,
}

impl<T: Real> TryFrom<RawIntrinsics<T>> for Intrinsics<T> {
    type Error = CameraError;

    fn try_from(r: RawIntrinsics<T>) -> Result<Self, Self::Error> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl<T: Real> From<Intrinsics<T>> for RawIntrinsics<T> {
    fn from(k: Intrinsics<T>) -> Self {
        RawIntrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl<T: Real> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, CameraError> {
        for (name, val) in [("fx", fx), ("fy", fy), ("cx", cx), ("cy", cy)] {
            if !val.is_finite() {
                return Err(CameraError::InvalidIntrinsics(format!(
                    "key \"{name}\" is not finite ({val})"
                )));
            }
        }
        if fx <= T::zero() {
            return Err(CameraError::InvalidIntrinsics(format!(
                "key \"fx\" must be positive, got {fx}"
            )));
        }
        if fy <= T::zero() {
            return Err(CameraError::InvalidIntrinsics(format!(
                "key \"fy\" must be positive, got {fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "image extent must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Camera with the principal point at the canvas center and the given
    /// horizontal field of view (radians); square pixels.
    pub fn from_fov(width: u32, height: u32, hfov: T) -> Result<Self, CameraError> {
        let two = T::lit(2.0);
        let w = T::lit(width as f64);
        let h = T::lit(height as f64);
        let f = w / two / (hfov / two).tan();
        Self::new(f, f, w / two, h / two, width, height)
    }

    pub fn fx(&self) -> T {
        self.fx
    }
    pub fn fy(&self) -> T {
        self.fy
    }
    pub fn cx(&self) -> T {
        self.cx
    }
    pub fn cy(&self) -> T {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn principal_point(&self) -> Pixel<T> {
        Pixel::new(self.cx, self.cy)
    }

    /// Row-major `K`.
    pub fn matrix(&self) -> [[T; 3]; 3] {
        let (z, o) = (T::zero(), T::one());
        [[self.fx, z, self.cx], [z, self.fy, self.cy], [z, z, o]]
    }

    /// Same camera with `fy` multiplied by `alpha`; everything else untouched.
    pub fn with_fy_scaled(&self, alpha: T) -> Result<Self, CameraError> {
        Self::new(self.fx, self.fy * alpha, self.cx, self.cy, self.width, self.height)
    }

    /// Same parameters with a different canvas extent.
    pub fn with_extent(&self, width: u32, height: u32) -> Result<Self, CameraError> {
        Self::new(self.fx, self.fy, self.cx, self.cy, width, height)
    }

    pub fn cast<U: Real>(&self) -> Intrinsics<U> {
        Intrinsics {
            fx: U::lit(self.fx.to_f64_lossless()),
            fy: U::lit(self.fy.to_f64_lossless()),
            cx: U::lit(self.cx.to_f64_lossless()),
            cy: U::lit(self.cy.to_f64_lossless()),
            width: self.width,
            height: self.height,
        }
    }
}

impl Intrinsics<f64> {
    /// Parses the intrinsics JSON object (`fx`, `fy`, `cx`, `cy`, `width`, `height`).
    /// Errors carry the offending key or the line/column of the syntax problem.
    pub fn from_json_str(text: &str) -> Result<Self, CameraError> {
        serde_json::from_str(text).map_err(|e| CameraError::InvalidIntrinsics(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("intrinsics serialize")
    }
}

/// World-to-camera rigid transform: `P_c = R * P_w + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose<T> {
    rotation: [[T; 3]; 3],
    translation: [T; 3],
}

impl<T: Real> CameraPose<T> {
    pub fn new(rotation: [[T; 3]; 3], translation: [T; 3]) -> Result<Self, CameraError> {
        // 1e-9 in f64; f32 cannot represent that, so fall back to a few ulps.
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = T::zero();
                for row in rotation {
                    dot = dot + row[i] * row[j];
                }
                let expect = if i == j { T::one() } else { T::zero() };
                if (dot - expect).abs() > tol {
                    return Err(CameraError::InvalidPose(format!(
                        "rotation is not orthonormal: (R^T R)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        let det = det3(&rotation);
        if (det - T::one()).abs() > tol {
            return Err(CameraError::InvalidPose(format!("rotation determinant is {det}")));
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(CameraError::InvalidPose("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        let (z, o) = (T::zero(), T::one());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z, z, z],
        }
    }

    pub fn rotation(&self) -> &[[T; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> [T; 3] {
        self.translation
    }

    /// World point to camera frame.
    pub fn apply(&self, p: Point3<T>) -> Point3<T> {
        let r = &self.rotation;
        let t = &self.translation;
        Point3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + t[0],
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + t[1],
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + t[2],
        )
    }
}

fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Projects a camera-frame point: `(fx X / Z + cx, fy Y / Z + cy)`. No clamping
/// to the image extent.
pub fn project<T: Real>(point: Point3<T>, k: &Intrinsics<T>) -> Result<Pixel<T>, CameraError> {
    if !(point.z > T::zero()) {
        return Err(CameraError::NonPositiveDepth(point.z.to_f64_lossless()));
    }
    Ok(Pixel::new(
        k.fx * point.x / point.z + k.cx,
        k.fy * point.y / point.z + k.cy,
    ))
}

pub fn project_world<T: Real>(
    point: Point3<T>,
    pose: &CameraPose<T>,
    k: &Intrinsics<T>,
) -> Result<Pixel<T>, CameraError> {
    project(pose.apply(point), k)
}

/// Line of sight through `pixel`: `K^-1 [u v 1]^T`, normalized.
pub fn back_project<T: Real>(pixel: Pixel<T>, k: &Intrinsics<T>) -> Ray<T> {
    Ray::from_direction(normalized_coords(pixel, k))
}

/// Un-normalized ray `((u - cx) / fx, (v - cy) / fy, 1)`.
pub fn normalized_coords<T: Real>(pixel: Pixel<T>, k: &Intrinsics<T>) -> [T; 3] {
    [(pixel.u - k.cx) / k.fx, (pixel.v - k.cy) / k.fy, T::one()]
}

fn check_size_depth<T: Real>(size: T, depth: T) -> Result<(), CameraError> {
    if !(depth > T::zero()) {
        return Err(CameraError::NonPositiveDepth(depth.to_f64_lossless()));
    }
    if !(size > T::zero()) {
        return Err(CameraError::NonPositiveSize(size.to_f64_lossless()));
    }
    Ok(())
}

/// Image height in pixels of a fronto-parallel segment of height `h` at depth `z`: `fy h / z`.
pub fn projected_height<T: Real>(h: T, z: T, k: &Intrinsics<T>) -> Result<T, CameraError> {
    check_size_depth(h, z)?;
    Ok(k.fy * h / z)
}

/// Image width in pixels of a fronto-parallel segment of width `w` at depth `z`: `fx w / z`.
pub fn projected_width<T: Real>(w: T, z: T, k: &Intrinsics<T>) -> Result<T, CameraError> {
    check_size_depth(w, z)?;
    Ok(k.fx * w / z)
}
