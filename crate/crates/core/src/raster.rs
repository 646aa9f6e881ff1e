//! Minimal raster container and bilinear resampling under a [`PixelTransform`].

use serde::{Deserialize, Serialize};

use crate::camera::Pixel;
use crate::transform::PixelTransform;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum RasterError {
    #[error("raster needs {expected} samples, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("raster must have 1 or 3 channels, got {0}")]
    BadChannels(u32),
    #[error("crop window [{u0:.3}, {u1:.3}] x [{v0:.3}, {v1:.3}] leaves the {width}x{height} source")]
    CropOutOfBounds {
        u0: f64,
        u1: f64,
        v0: f64,
        v1: f64,
        width: u32,
        height: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major interleaved raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u32,
    data: Samples,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u32, data: Samples) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::BadChannels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(RasterError::BadLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> u32 {
        self.channels
    }
    pub fn data(&self) -> &Samples {
        &self.data
    }

    pub fn into_data(self) -> Samples {
        self.data
    }

    /// Sample as f64, no bounds clamping.
    pub fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        let i = (row * self.width as usize + col) * self.channels as usize + ch;
        match &self.data {
            Samples::U8(v) => v[i] as f64,
            Samples::F32(v) => v[i] as f64,
        }
    }
}

/// How output pixels that fall outside the scaled source are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMode {
    /// Fill with zero.
    #[default]
    Pad,
    /// The whole output window must lie inside the scaled source.
    Crop,
}

const EDGE_TOL: f64 = 1e-9;

/// Checks that the output canvas maps inside the source canvas.
pub fn check_crop_window(width: u32, height: u32, t: &PixelTransform<f64>) -> Result<(), RasterError> {
    let a = t.apply_inverse(Pixel::new(0.0, 0.0));
    let b = t.apply_inverse(Pixel::new(t.out_width() as f64, t.out_height() as f64));
    let (w, h) = (width as f64, height as f64);
    if a.u < -EDGE_TOL || a.v < -EDGE_TOL || b.u > w + EDGE_TOL || b.v > h + EDGE_TOL {
        return Err(RasterError::CropOutOfBounds {
            u0: a.u,
            u1: b.u,
            v0: a.v,
            v1: b.v,
            width,
            height,
        });
    }
    Ok(())
}

/// Bilinear resampling with pixel centers at half-integers. Each output pixel
/// center is mapped back to the source; positions off the source canvas get 0
/// in pad mode. Crop mode rejects windows that leave the source.
pub fn resample(image: &RasterImage, t: &PixelTransform<f64>, mode: FillMode) -> Result<RasterImage, RasterError> {
    if mode == FillMode::Crop {
        check_crop_window(image.width, image.height, t)?;
    }
    let (ow, oh) = (t.out_width() as usize, t.out_height() as usize);
    let ch = image.channels as usize;
    let (w, h) = (image.width as f64, image.height as f64);
    let (wi, hi) = (image.width as usize, image.height as usize);

    let mut out = vec![0.0f64; ow * oh * ch];
    for row in 0..oh {
        for col in 0..ow {
            let src = t.apply_inverse(Pixel::center_of(row, col));
            if src.u < -EDGE_TOL || src.v < -EDGE_TOL || src.u > w + EDGE_TOL || src.v > h + EDGE_TOL {
                continue;
            }
            let x = src.u - 0.5;
            let y = src.v - 0.5;
            let x0f = x.floor();
            let y0f = y.floor();
            let ax = x - x0f;
            let ay = y - y0f;
            let clamp = |i: f64, n: usize| -> usize { i.max(0.0).min((n - 1) as f64) as usize };
            let (x0, x1) = (clamp(x0f, wi), clamp(x0f + 1.0, wi));
            let (y0, y1) = (clamp(y0f, hi), clamp(y0f + 1.0, hi));
            let base = (row * ow + col) * ch;
            for c in 0..ch {
                let top = image.at(y0, x0, c) * (1.0 - ax) + image.at(y0, x1, c) * ax;
                let bot = image.at(y1, x0, c) * (1.0 - ax) + image.at(y1, x1, c) * ax;
                out[base + c] = top * (1.0 - ay) + bot * ay;
            }
        }
    }
    let data = match image.data {
        Samples::U8(_) => Samples::U8(out.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()),
        Samples::F32(_) => Samples::F32(out.iter().map(|v| *v as f32).collect()),
    };
    RasterImage::new(t.out_width(), t.out_height(), image.channels, data)
}
