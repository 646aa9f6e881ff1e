//! Dense camera ray grid and its sinusoidal encoding.
//!
//! Each visual token `(i, j)` is anchored at an image coordinate `(u_ij, v_ij)`
//! and carries the normalized ray components `rx = (u_ij - cx) / fx` and
//! `ry = (v_ij - cy) / fy` together with the global focal lengths. The embedding
//! layout per token is four equal blocks `[rx | ry | ln(fx/f0) | ln(fy/f0)]`, each
//! holding interleaved `(sin, cos)` pairs.

use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::scalar::Real;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding dimension {dim} must be a positive multiple of {multiple}")]
    BadDimension { dim: usize, multiple: usize },
    #[error("token grid {rows}x{cols} with patch {patch} exceeds the {width}x{height} image")]
    GridExceedsImage {
        rows: u32,
        cols: u32,
        patch: u32,
        width: u32,
        height: u32,
    },
    #[error("token grid must be non-empty with patch >= 1")]
    EmptyGrid,
    #[error("sinusoid period must be positive and finite")]
    BadPeriod,
}

/// Where inside its patch a token is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenAnchor {
    #[default]
    Center,
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenGridSpec {
    pub rows: u32,
    pub cols: u32,
    pub patch: u32,
    #[serde(default)]
    pub anchor: TokenAnchor,
}

impl TokenGridSpec {
    pub fn new(rows: u32, cols: u32, patch: u32) -> Self {
        Self {
            rows,
            cols,
            patch,
            anchor: TokenAnchor::Center,
        }
    }

    /// Smallest grid covering the whole image, last partial patch included.
    pub fn covering<T: Real>(k: &Intrinsics<T>, patch: u32) -> Self {
        let p = patch.max(1);
        Self::new(k.height().div_ceil(p), k.width().div_ceil(p), p)
    }

    /// Checks the grid against an image extent: `rows * patch <= height + patch`
    /// and likewise for columns.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), EmbedError> {
        if self.rows == 0 || self.cols == 0 || self.patch == 0 {
            return Err(EmbedError::EmptyGrid);
        }
        let (r, c, p) = (self.rows as u64, self.cols as u64, self.patch as u64);
        if r * p > height as u64 + p || c * p > width as u64 + p {
            return Err(EmbedError::GridExceedsImage {
                rows: self.rows,
                cols: self.cols,
                patch: self.patch,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Image coordinate of token `(i, j)`.
    pub fn anchor_pixel<T: Real>(&self, i: usize, j: usize) -> (T, T) {
        let p = T::lit(self.patch as f64);
        let off = match self.anchor {
            TokenAnchor::Center => T::lit(0.5),
            TokenAnchor::Corner => T::zero(),
        };
        ((T::lit(j as f64) + off) * p, (T::lit(i as f64) + off) * p)
    }

    pub fn len(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-token normalized ray components, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub rx: Vec<T>,
    pub ry: Vec<T>,
}

impl<T: Real> RayGrid<T> {
    pub fn rx_at(&self, i: usize, j: usize) -> T {
        self.rx[i * self.cols + j]
    }

    pub fn ry_at(&self, i: usize, j: usize) -> T {
        self.ry[i * self.cols + j]
    }
}

/// `rows x cols x dim` embedding values, row-major with the channel axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Real> EmbeddingGrid<T> {
    pub fn token(&self, i: usize, j: usize) -> &[T] {
        let start = (i * self.cols + j) * self.dim;
        &self.data[start..start + self.dim]
    }
}

pub fn ray_grid<T: Real>(k: &Intrinsics<T>, grid: &TokenGridSpec) -> Result<RayGrid<T>, EmbedError> {
    grid.validate(k.width(), k.height())?;
    let (rows, cols) = (grid.rows as usize, grid.cols as usize);
    let mut rx = Vec::with_capacity(rows * cols);
    let mut ry = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (u, v) = grid.anchor_pixel::<T>(i, j);
            rx.push((u - k.cx()) / k.fx());
            ry.push((v - k.cy()) / k.fy());
        }
    }
    Ok(RayGrid { rows, cols, rx, ry })
}

/// Writes `n` values for scalar `x`: `sin(x / period^(2m/n))`, `cos(...)` for
/// `m = 0 .. n/2`. `n` must be even.
pub fn sinusoid_into<T: Real>(x: T, period: T, out: &mut [T]) {
    let n = out.len();
    debug_assert!(n.is_multiple_of(2));
    let nf = T::lit(n as f64);
    for m in 0..n / 2 {
        let freq = period.powf(T::lit(2.0 * m as f64) / nf);
        let (s, c) = (x / freq).sin_cos();
        out[2 * m] = s;
        out[2 * m + 1] = c;
    }
}

pub fn sinusoid<T: Real>(x: T, n: usize, period: T) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    sinusoid_into(x, period, &mut v);
    v
}

/// Parameters of the camera embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraEmbedConfig {
    pub dim: usize,
    /// Base period `T` of the sinusoid ladder.
    pub period: f64,
    /// Reference focal length `f0` (pixels) for the `ln(f / f0)` channels.
    pub focal_ref: f64,
}

impl Default for CameraEmbedConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            period: 10_000.0,
            focal_ref: 1000.0,
        }
    }
}

impl CameraEmbedConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 || !self.dim.is_multiple_of(8) {
            return Err(EmbedError::BadDimension {
                dim: self.dim,
                multiple: 8,
            });
        }
        if !(self.period > 0.0) || !self.period.is_finite() || !(self.focal_ref > 0.0) || !self.focal_ref.is_finite() {
            return Err(EmbedError::BadPeriod);
        }
        Ok(())
    }
}

pub const CAMERA_CHANNELS: [&str; 4] = ["rx", "ry", "ln_fx_over_f0", "ln_fy_over_f0"];

/// Camera embedding `E_cam`. Depends only on the ray grid and the focal lengths.
pub fn embed<T: Real>(grid: &RayGrid<T>, k: &Intrinsics<T>, cfg: &CameraEmbedConfig) -> Result<EmbeddingGrid<T>, EmbedError> {
    cfg.validate()?;
    let dim = cfg.dim;
    let block = dim / 4;
    let period = T::lit(cfg.period);
    let f0 = T::lit(cfg.focal_ref);
    let lfx = sinusoid((k.fx() / f0).ln(), block, period);
    let lfy = sinusoid((k.fy() / f0).ln(), block, period);

    let n = grid.rows * grid.cols;
    let mut data = vec![T::zero(); n * dim];
    for (t, tok) in data.chunks_exact_mut(dim).enumerate() {
        let (a, rest) = tok.split_at_mut(block);
        let (b, rest) = rest.split_at_mut(block);
        let (c, d) = rest.split_at_mut(block);
        sinusoid_into(grid.rx[t], period, a);
        sinusoid_into(grid.ry[t], period, b);
        c.copy_from_slice(&lfx);
        d.copy_from_slice(&lfy);
    }
    Ok(EmbeddingGrid {
        rows: grid.rows,
        cols: grid.cols,
        dim,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{apply_transform, PixelTransform};
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_grid() {
        let k = Intrinsics::new(1000.0, 1000.0, 14.0, 14.0, 28, 28).unwrap();
        let g = ray_grid(&k, &TokenGridSpec::new(2, 2, 14)).unwrap();
        // centers at 7 and 21: (7 - 14) / 1000, (21 - 14) / 1000
        assert_eq!(g.rx, vec![-0.007, 0.007, -0.007, 0.007]);
        assert_eq!(g.ry, vec![-0.007, -0.007, 0.007, 0.007]);
    }

    #[test]
    fn principal_token_is_zero() {
        let k = Intrinsics::new(800.0, 800.0, 21.0, 7.0, 42, 14).unwrap();
        let g = ray_grid(&k, &TokenGridSpec::new(1, 3, 14)).unwrap();
        assert_eq!((g.rx_at(0, 1), g.ry_at(0, 1)), (0.0, 0.0));
    }

    #[test]
    fn corner_anchor() {
        let k = Intrinsics::new(100.0, 100.0, 0.0, 0.0, 28, 28).unwrap();
        let mut spec = TokenGridSpec::new(2, 2, 14);
        spec.anchor = TokenAnchor::Corner;
        let g = ray_grid(&k, &spec).unwrap();
        assert_eq!(g.rx, vec![0.0, 0.14, 0.0, 0.14]);
    }

    #[test]
    fn grid_bounds() {
        let k = Intrinsics::new(100.0, 100.0, 10.0, 10.0, 30, 20).unwrap();
        // partial last patch is fine
        assert!(ray_grid(&k, &TokenGridSpec::new(2, 3, 14)).is_ok());
        assert!(matches!(
            ray_grid(&k, &TokenGridSpec::new(3, 3, 14)),
            Err(EmbedError::GridExceedsImage { .. })
        ));
        assert_eq!(ray_grid(&k, &TokenGridSpec::new(0, 3, 14)), Err(EmbedError::EmptyGrid));
        assert_eq!(TokenGridSpec::covering(&k, 14), TokenGridSpec::new(2, 3, 14));
    }

    #[test]
    fn zero_input_pattern() {
        let k = Intrinsics::new(1000.0, 1000.0, 7.0, 7.0, 14, 14).unwrap();
        let g = ray_grid(&k, &TokenGridSpec::new(1, 1, 14)).unwrap();
        let e = embed(&g, &k, &CameraEmbedConfig { dim: 16, ..Default::default() }).unwrap();
        // rx, ry and ln(1000/1000) are all zero
        let expect: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        assert_eq!(e.token(0, 0), expect.as_slice());
    }

    #[test]
    fn scalar_sinusoid_oracle() {
        let v = sinusoid(1.0f64, 4, 10_000.0);
        let expect = [1f64.sin(), 1f64.cos(), 0.01f64.sin(), 0.01f64.cos()];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_checks() {
        let k = Intrinsics::new(1000.0, 1000.0, 7.0, 7.0, 14, 14).unwrap();
        let g = ray_grid(&k, &TokenGridSpec::new(1, 1, 14)).unwrap();
        for dim in [0, 4, 12, 250] {
            let cfg = CameraEmbedConfig { dim, ..Default::default() };
            assert!(matches!(embed(&g, &k, &cfg), Err(EmbedError::BadDimension { .. })));
        }
        let cfg = CameraEmbedConfig { period: 0.0, ..Default::default() };
        assert_eq!(embed(&g, &k, &cfg), Err(EmbedError::BadPeriod));
    }

    #[test]
    fn layout_blocks() {
        let k = Intrinsics::new(2000.0, 500.0, 0.0, 0.0, 14, 14).unwrap();
        let g = ray_grid(&k, &TokenGridSpec::new(1, 1, 14)).unwrap();
        let cfg = CameraEmbedConfig { dim: 32, ..Default::default() };
        let e = embed(&g, &k, &cfg).unwrap();
        let tok = e.token(0, 0);
        assert_eq!(&tok[0..8], sinusoid(g.rx[0], 8, 10_000.0).as_slice());
        assert_eq!(&tok[8..16], sinusoid(g.ry[0], 8, 10_000.0).as_slice());
        assert_eq!(&tok[16..24], sinusoid(2f64.ln(), 8, 10_000.0).as_slice());
        assert_eq!(&tok[24..32], sinusoid(0.5f64.ln(), 8, 10_000.0).as_slice());
    }

    #[test]
    fn consistent_scaling_keeps_rays() {
        let k = Intrinsics::new(577.9, 580.2, 319.4, 238.7, 640, 480).unwrap();
        let spec = TokenGridSpec::covering(&k, 14);
        let base = ray_grid(&k, &spec).unwrap();
        for (s, patch) in [(2.0f64, 28), (0.5, 7)] {
            let t = PixelTransform::resize(s, 640, 480).unwrap();
            let k2 = apply_transform(&k, &t).unwrap();
            let g = ray_grid(&k2, &TokenGridSpec::new(spec.rows, spec.cols, patch)).unwrap();
            for (a, b) in base.rx.iter().zip(&g.rx).chain(base.ry.iter().zip(&g.ry)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(fx in 50.0f64..5000.0, fy in 50.0f64..5000.0, cx in 0.0f64..640.0, cy in 0.0f64..480.0) {
            let k = Intrinsics::new(fx, fy, cx, cy, 640, 480).unwrap();
            let spec = TokenGridSpec::covering(&k, 16);
            let g = ray_grid(&k, &spec).unwrap();
            for i in 0..g.rows {
                for j in 1..g.cols {
                    prop_assert!(g.rx_at(i, j) > g.rx_at(i, j - 1));
                }
            }
            for i in 1..g.rows {
                prop_assert!(g.ry_at(i, 0) > g.ry_at(i - 1, 0));
            }
            let e = embed(&g, &k, &CameraEmbedConfig { dim: 32, ..Default::default() }).unwrap();
            prop_assert!(e.data.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
