//! Oriented 3D boxes and their exact intersection-over-union.
//!
//! The intersection volume is found by clipping one cuboid's boundary against the
//! six half-spaces of the other (Sutherland-Hodgman per face, plus a cap polygon
//! on every cutting plane), then summing signed tetrahedra over the resulting
//! faces.

use serde::{Deserialize, Serialize};

type V3 = [f64; 3];

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum BoxError {
    #[error("box size must be positive and finite, got {0:?}")]
    DegenerateBox([f64; 3]),
    #[error("box parameters must be finite")]
    NonFinite,
}

/// Order in which yaw, pitch and roll are composed into the box rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationConvention {
    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    #[default]
    ZyxIntrinsic,
    /// `Rx(roll) * Ry(pitch) * Rz(yaw)`.
    XyzIntrinsic,
}

/// `[x_center, y_center, z_center, x_size, y_size, z_size, yaw, pitch, roll]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox3 {
    pub center: V3,
    pub size: V3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl OrientedBox3 {
    pub fn new(center: V3, size: V3, yaw: f64, pitch: f64, roll: f64) -> Result<Self, BoxError> {
        let b = Self {
            center,
            size,
            yaw,
            pitch,
            roll,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn axis_aligned(center: V3, size: V3) -> Result<Self, BoxError> {
        Self::new(center, size, 0.0, 0.0, 0.0)
    }

    pub fn from_params(p: [f64; 9]) -> Result<Self, BoxError> {
        Self::new([p[0], p[1], p[2]], [p[3], p[4], p[5]], p[6], p[7], p[8])
    }

    pub fn to_params(&self) -> [f64; 9] {
        let (c, s) = (self.center, self.size);
        [c[0], c[1], c[2], s[0], s[1], s[2], self.yaw, self.pitch, self.roll]
    }

    pub fn validate(&self) -> Result<(), BoxError> {
        if self.to_params().iter().any(|v| !v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if self.size.iter().any(|s| !(*s > 0.0)) {
            return Err(BoxError::DegenerateBox(self.size));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Rotation matrix (columns are the box's local axes in the parent frame).
    pub fn rotation(&self, conv: RotationConvention) -> [[f64; 3]; 3] {
        let rz = rot_z(self.yaw);
        let ry = rot_y(self.pitch);
        let rx = rot_x(self.roll);
        match conv {
            RotationConvention::ZyxIntrinsic => matmul(&matmul(&rz, &ry), &rx),
            RotationConvention::XyzIntrinsic => matmul(&matmul(&rx, &ry), &rz),
        }
    }

    pub fn contains(&self, p: V3, conv: RotationConvention) -> bool {
        let r = self.rotation(conv);
        let d = sub(p, self.center);
        (0..3).all(|a| {
            let local = r[0][a] * d[0] + r[1][a] * d[1] + r[2][a] * d[2];
            local.abs() <= 0.5 * self.size[a]
        })
    }

    /// Axis-aligned bounds `(min, max)` of the rotated box.
    pub fn bounds(&self, conv: RotationConvention) -> (V3, V3) {
        let c = box_corners(self, conv);
        let mut lo = c[0];
        let mut hi = c[0];
        for p in &c[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_x(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    o
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Corner `i` has local signs `(bit0, bit1, bit2)` -> `(+/-x, +/-y, +/-z)` half extents.
pub fn box_corners(b: &OrientedBox3, conv: RotationConvention) -> [V3; 8] {
    let r = b.rotation(conv);
    let mut out = [[0.0; 3]; 8];
    for (i, corner) in out.iter_mut().enumerate() {
        let local = [
            if i & 1 == 0 { -0.5 } else { 0.5 } * b.size[0],
            if i & 2 == 0 { -0.5 } else { 0.5 } * b.size[1],
            if i & 4 == 0 { -0.5 } else { 0.5 } * b.size[2],
        ];
        for a in 0..3 {
            corner[a] = b.center[a] + r[a][0] * local[0] + r[a][1] * local[1] + r[a][2] * local[2];
        }
    }
    out
}

/// Outward half-spaces `n . p <= d` of the box.
fn half_spaces(b: &OrientedBox3, conv: RotationConvention) -> [(V3, f64); 6] {
    let r = b.rotation(conv);
    let mut out = [([0.0; 3], 0.0); 6];
    for a in 0..3 {
        let axis = [r[0][a], r[1][a], r[2][a]];
        let c = dot(axis, b.center);
        let h = 0.5 * b.size[a];
        out[2 * a] = (axis, c + h);
        out[2 * a + 1] = (scale(axis, -1.0), -c + h);
    }
    out
}

/// Box boundary as six quads, counter-clockwise seen from outside.
fn box_faces(b: &OrientedBox3, conv: RotationConvention) -> Vec<Vec<V3>> {
    let c = box_corners(b, conv);
    // corner index bits: x = 1, y = 2, z = 4
    const FACES: [[usize; 4]; 6] = [
        [1, 3, 7, 5], // +x
        [0, 4, 6, 2], // -x
        [2, 6, 7, 3], // +y
        [0, 1, 5, 4], // -y
        [4, 5, 7, 6], // +z
        [0, 2, 3, 1], // -z
    ];
    FACES.iter().map(|f| f.iter().map(|&i| c[i]).collect()).collect()
}

/// Signed volume enclosed by a closed, outward-oriented polygon soup.
fn enclosed_volume(faces: &[Vec<V3>]) -> f64 {
    let mut six_v = 0.0;
    for f in faces {
        if f.len() < 3 {
            continue;
        }
        let p0 = f[0];
        for i in 1..f.len() - 1 {
            six_v += dot(p0, cross(f[i], f[i + 1]));
        }
    }
    six_v / 6.0
}

fn clip_polygon(poly: &[V3], n: V3, d: f64, eps: f64, on_plane: &mut Vec<V3>) -> Vec<V3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let len = poly.len();
    for i in 0..len {
        let a = poly[i];
        let b = poly[(i + 1) % len];
        let da = dot(n, a) - d;
        let db = dot(n, b) - d;
        if da <= eps {
            out.push(a);
            if da.abs() <= eps {
                on_plane.push(a);
            }
        }
        if (da < -eps && db > eps) || (da > eps && db < -eps) {
            let t = da / (da - db);
            let p = add(a, scale(sub(b, a), t));
            out.push(p);
            on_plane.push(p);
        }
    }
    out
}

/// Orders coplanar points counter-clockwise around `n` and drops near duplicates.
fn cap_polygon(points: &[V3], n: V3, eps: f64) -> Vec<V3> {
    let mut uniq: Vec<V3> = Vec::new();
    for p in points {
        if !uniq.iter().any(|q| dot(sub(*p, *q), sub(*p, *q)) <= eps * eps) {
            uniq.push(*p);
        }
    }
    if uniq.len() < 3 {
        return Vec::new();
    }
    let centroid = scale(uniq.iter().fold([0.0; 3], |acc, p| add(acc, *p)), 1.0 / uniq.len() as f64);
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = {
        let v = cross(n, helper);
        scale(v, 1.0 / dot(v, v).sqrt())
    };
    let e2 = cross(n, e1);
    let mut keyed: Vec<(f64, V3)> = uniq
        .into_iter()
        .map(|p| {
            let r = sub(p, centroid);
            (dot(r, e2).atan2(dot(r, e1)), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// Volume of `a ∩ b` by clipping `a`'s boundary against `b`'s half-spaces.
pub fn intersection_volume(a: &OrientedBox3, b: &OrientedBox3, conv: RotationConvention) -> f64 {
    let scale_len = a.size.iter().chain(&b.size).fold(0.0f64, |m, s| m.max(*s));
    let eps = 1e-12 * scale_len.max(1.0);
    // Work relative to a's center to keep the tetrahedron sums well conditioned.
    let origin = a.center;
    let shift = |bx: &OrientedBox3| OrientedBox3 {
        center: sub(bx.center, origin),
        ..*bx
    };
    let (a, b) = (shift(a), shift(b));

    let mut faces = box_faces(&a, conv);
    for (n, d) in half_spaces(&b, conv) {
        let mut on_plane = Vec::new();
        let mut next = Vec::with_capacity(faces.len() + 1);
        let mut coplanar_face = false;
        for f in &faces {
            if f.iter().all(|p| (dot(n, *p) - d).abs() <= eps) {
                // an existing face already lies on this plane
                match polygon_normal(f).map(|m| dot(m, n) > 0.0) {
                    Some(true) => {
                        coplanar_face = true;
                        next.push(f.clone());
                    }
                    // the solid sits entirely on the far side and only touches the plane
                    Some(false) => return 0.0,
                    None => {}
                }
                continue;
            }
            let clipped = clip_polygon(f, n, d, eps, &mut on_plane);
            if clipped.len() >= 3 {
                next.push(clipped);
            }
        }
        if !coplanar_face {
            let cap = cap_polygon(&on_plane, n, eps);
            if !cap.is_empty() {
                next.push(cap);
            }
        }
        faces = next;
        if faces.is_empty() {
            return 0.0;
        }
    }
    enclosed_volume(&faces).max(0.0)
}

fn polygon_normal(f: &[V3]) -> Option<V3> {
    let mut n = [0.0; 3];
    for i in 1..f.len().saturating_sub(1) {
        n = add(n, cross(sub(f[i], f[0]), sub(f[i + 1], f[0])));
    }
    let len = dot(n, n).sqrt();
    (len > 0.0).then(|| scale(n, 1.0 / len))
}

/// How boxes are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    /// Full 9-DoF oriented boxes.
    #[default]
    Oriented,
    /// Angles ignored; boxes treated as axis-aligned.
    AxisAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IouOptions {
    pub mode: IouMode,
    pub convention: RotationConvention,
}

/// Closed-form IoU of two axis-aligned boxes.
pub fn iou_axis_aligned(a: &OrientedBox3, b: &OrientedBox3) -> Result<f64, BoxError> {
    a.validate()?;
    b.validate()?;
    let mut inter = 1.0;
    for k in 0..3 {
        let lo = (a.center[k] - 0.5 * a.size[k]).max(b.center[k] - 0.5 * b.size[k]);
        let hi = (a.center[k] + 0.5 * a.size[k]).min(b.center[k] + 0.5 * b.size[k]);
        inter *= (hi - lo).max(0.0);
    }
    Ok(ratio(inter, a.volume(), b.volume()))
}

fn ratio(inter: f64, va: f64, vb: f64) -> f64 {
    let union = va + vb - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Intersection over union in `[0, 1]`.
pub fn iou3d(a: &OrientedBox3, b: &OrientedBox3) -> Result<f64, BoxError> {
    iou3d_with(a, b, IouOptions::default())
}

pub fn iou3d_with(a: &OrientedBox3, b: &OrientedBox3, opts: IouOptions) -> Result<f64, BoxError> {
    a.validate()?;
    b.validate()?;
    if opts.mode == IouMode::AxisAligned {
        return iou_axis_aligned(a, b);
    }
    // Quick reject on bounding spheres.
    let ra = 0.5 * dot(a.size, a.size).sqrt();
    let rb = 0.5 * dot(b.size, b.size).sqrt();
    let dc = sub(a.center, b.center);
    if dot(dc, dc).sqrt() > ra + rb {
        return Ok(0.0);
    }
    let inter = intersection_volume(a, b, opts.convention);
    Ok(ratio(inter, a.volume(), b.volume()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit(c: V3) -> OrientedBox3 {
        OrientedBox3::axis_aligned(c, [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn unit_cube_corners() {
        let c = box_corners(&unit([0.0; 3]), RotationConvention::ZyxIntrinsic);
        for p in c {
            assert!(p.iter().all(|v| v.abs() == 0.5));
        }
        let mut sorted: Vec<_> = c.iter().map(|p| (p[0] > 0.0, p[1] > 0.0, p[2] > 0.0)).collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
    }

    #[test]
    fn quarter_yaw_swaps_extents() {
        let b = OrientedBox3::new([0.0; 3], [4.0, 2.0, 1.0], FRAC_PI_2, 0.0, 0.0).unwrap();
        let (lo, hi) = b.bounds(RotationConvention::ZyxIntrinsic);
        assert!((hi[0] - lo[0] - 2.0).abs() < 1e-12);
        assert!((hi[1] - lo[1] - 4.0).abs() < 1e-12);
        assert!((hi[2] - lo[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn yaw_periodicity() {
        let b = OrientedBox3::new([0.3, -1.0, 2.0], [1.2, 0.7, 2.5], 0.4, -0.3, 1.1).unwrap();
        let c = OrientedBox3 { yaw: b.yaw + 2.0 * PI, ..b };
        for (p, q) in box_corners(&b, RotationConvention::ZyxIntrinsic)
            .iter()
            .zip(box_corners(&c, RotationConvention::ZyxIntrinsic).iter())
        {
            for a in 0..3 {
                assert!((p[a] - q[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conventions_differ_in_general() {
        let b = OrientedBox3::new([0.0; 3], [1.0, 2.0, 3.0], 0.5, 0.4, 0.3).unwrap();
        let r1 = b.rotation(RotationConvention::ZyxIntrinsic);
        let r2 = b.rotation(RotationConvention::XyzIntrinsic);
        assert!((r1[0][1] - r2[0][1]).abs() > 1e-3);
    }

    #[test]
    fn trivial_ious() {
        let b = OrientedBox3::new([1.0, 2.0, 3.0], [0.5, 1.5, 2.0], 0.7, -0.2, 2.9).unwrap();
        assert!((iou3d(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        let a = unit([0.0; 3]);
        assert!((iou3d(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(iou3d(&a, &unit([10.0, 0.0, 0.0])).unwrap(), 0.0);
        let third = iou3d(&a, &unit([0.5, 0.0, 0.0])).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn touching_faces_have_zero_iou() {
        let a = unit([0.0; 3]);
        assert!(iou3d(&a, &unit([1.0, 0.0, 0.0])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn nested_box() {
        let outer = OrientedBox3::new([0.0; 3], [2.0, 2.0, 2.0], 0.3, 0.2, 0.1).unwrap();
        let inner = OrientedBox3::new([0.1, 0.0, -0.1], [0.5, 0.5, 0.5], 1.0, 0.0, 0.5).unwrap();
        assert!((iou3d(&outer, &inner).unwrap() - 0.125 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_square_in_plane() {
        // 45 degree yaw square against axis-aligned square of the same size,
        // both extruded by 1: overlap is the regular octagon, area 2(sqrt2 - 1) * s^2... for s=1 side:
        // octagon area = 2 * (sqrt(2) - 1)
        let a = unit([0.0; 3]);
        let b = OrientedBox3::new([0.0; 3], [1.0, 1.0, 1.0], PI / 4.0, 0.0, 0.0).unwrap();
        let inter = 2.0 * (2f64.sqrt() - 1.0);
        let expect = inter / (2.0 - inter);
        assert!((iou3d(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        let bad = OrientedBox3 {
            center: [0.0; 3],
            size: [1.0, 0.0, 1.0],
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
        };
        assert!(matches!(iou3d(&bad, &unit([0.0; 3])), Err(BoxError::DegenerateBox(_))));
        assert!(OrientedBox3::new([0.0; 3], [1.0, -1.0, 1.0], 0.0, 0.0, 0.0).is_err());
        assert!(OrientedBox3::new([f64::NAN, 0.0, 0.0], [1.0; 3], 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn axis_aligned_mode_ignores_angles() {
        let a = unit([0.0; 3]);
        let b = OrientedBox3::new([0.5, 0.0, 0.0], [1.0; 3], 0.6, 0.0, 0.0).unwrap();
        let opts = IouOptions {
            mode: IouMode::AxisAligned,
            ..Default::default()
        };
        assert!((iou3d_with(&a, &b, opts).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((iou3d(&a, &b).unwrap() - 1.0 / 3.0).abs() > 1e-3);
    }
}
