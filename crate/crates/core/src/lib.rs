//! Camera-aware pinhole geometry toolkit.
//!
//! Geometry (`camera`, `transform`, `embedding`, `prior`) is generic over
//! `f32` / `f64` through [`Real`]; rasters, boxes, evaluation and the
//! experiments work in `f64`. Aliases for the common concrete types are
//! exported at the crate root.

// `!(x > 0)` style checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod augment;
pub mod boxes;
pub mod camera;
pub mod embedding;
pub mod eval;
pub mod io;
pub mod prior;
pub mod raster;
pub mod scalar;
pub mod transform;

pub use augment::{AugmentationPolicy, AugmentedSample, Sample};
pub use boxes::{iou3d, IouOptions, OrientedBox3};
pub use camera::{back_project, project, CameraPose, Intrinsics, Pixel, Point3, Ray};
pub use embedding::{CameraEmbedConfig, EmbeddingGrid, TokenGridSpec};
pub use eval::{parse_detections, Detection};
pub use prior::{DepthMap, GeoEmbedConfig};
pub use raster::{FillMode, RasterImage};
pub use scalar::Real;
pub use transform::PixelTransform;

pub type IntrinsicsF64 = camera::Intrinsics<f64>;
pub type IntrinsicsF32 = camera::Intrinsics<f32>;
pub type PixelTransformF64 = transform::PixelTransform<f64>;
pub type PixelTransformF32 = transform::PixelTransform<f32>;
pub type Point3F64 = camera::Point3<f64>;
pub type Point3F32 = camera::Point3<f32>;
pub type PixelF64 = camera::Pixel<f64>;
pub type PixelF32 = camera::Pixel<f32>;
pub type RayF64 = camera::Ray<f64>;
pub type CameraPoseF64 = camera::CameraPose<f64>;
pub type DepthMapF64 = prior::DepthMap<f64>;
pub type DepthMapF32 = prior::DepthMap<f32>;
pub type EmbeddingGridF64 = embedding::EmbeddingGrid<f64>;
pub type EmbeddingGridF32 = embedding::EmbeddingGrid<f32>;
