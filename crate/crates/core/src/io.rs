//! File formats: CGEM float tensors, binary PPM, JSON sidecars and the
//! JSON-lines augmentation manifest.
//!
//! CGEM layout: magic `CGEM`, then `rows`, `cols`, `dim` as little-endian u32,
//! then `rows * cols * dim` little-endian f32 values in row-major order.

use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentedSample, Sample};
use crate::camera::Intrinsics;
use crate::embedding::EmbeddingGrid;
use crate::eval::{parse_detections, Detection};
use crate::prior::DepthMap;
use crate::raster::{RasterImage, Samples};
use crate::scalar::Real;

#[derive(thiserror::Error, Debug)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, msg: impl ToString) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }
}

pub const CGEM_MAGIC: &[u8; 4] = b"CGEM";

/// Dense `rows x cols x dim` f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub rows: u32,
    pub cols: u32,
    pub dim: u32,
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(rows: u32, cols: u32, dim: u32, data: Vec<f32>) -> Result<Self, String> {
        let n = rows as usize * cols as usize * dim as usize;
        if data.len() != n {
            return Err(format!("tensor {rows}x{cols}x{dim} needs {n} values, got {}", data.len()));
        }
        Ok(Self { rows, cols, dim, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(CGEM_MAGIC);
        for v in [self.rows, self.cols, self.dim] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 16 || &bytes[..4] != CGEM_MAGIC {
            return Err("not a CGEM tensor (bad magic or short header)".into());
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let (rows, cols, dim) = (word(0), word(1), word(2));
        let n = rows as usize * cols as usize * dim as usize;
        let body = &bytes[16..];
        if body.len() != 4 * n {
            return Err(format!("CGEM {rows}x{cols}x{dim} expects {} payload bytes, found {}", 4 * n, body.len()));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { rows, cols, dim, data })
    }
}

pub fn read_cgem(path: &Path) -> Result<Tensor3, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    Tensor3::decode(&bytes).map_err(|m| IoError::format(path, m))
}

pub fn write_cgem(path: &Path, t: &Tensor3) -> Result<(), IoError> {
    write_bytes(path, &t.encode())
}

pub fn embedding_tensor<T: Real>(g: &EmbeddingGrid<T>) -> Tensor3 {
    let data = g.data.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
    Tensor3 {
        rows: g.rows as u32,
        cols: g.cols as u32,
        dim: g.dim as u32,
        data,
    }
}

/// Depth as a `height x width x 1` tensor with NaN for invalid pixels.
pub fn depth_tensor(d: &DepthMap<f64>) -> Tensor3 {
    Tensor3 {
        rows: d.height(),
        cols: d.width(),
        dim: 1,
        data: d.to_nan_encoded().into_iter().map(|v| v as f32).collect(),
    }
}

pub fn depth_from_tensor(t: &Tensor3) -> Result<DepthMap<f64>, String> {
    if t.dim != 1 {
        return Err(format!("depth tensor must have dim 1, got {}", t.dim));
    }
    DepthMap::from_values(t.cols, t.rows, t.data.iter().map(|&v| v as f64).collect()).map_err(|e| e.to_string())
}

/// Binary PPM (P6, maxval 255). Only 3-channel 8-bit images are representable.
pub fn encode_ppm(img: &RasterImage) -> Result<Vec<u8>, String> {
    match img.data() {
        Samples::U8(d) if img.channels() == 3 => {
            let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend_from_slice(d);
            Ok(out)
        }
        _ => Err("PPM output needs a 3-channel 8-bit image".into()),
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RasterImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(format!("unsupported PPM magic {:?} (only P6)", fields[0]));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| format!("bad PPM header field {s:?}"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(format!("unsupported PPM maxval {maxval} (only 255)"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).unwrap_or_default().to_vec();
    RasterImage::new(w, h, 3, Samples::U8(data)).map_err(|e| e.to_string())
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// `.ppm` reads as 8-bit RGB; `.cgem` as float with `dim` channels.
pub fn read_image(path: &Path) -> Result<RasterImage, IoError> {
    if has_ext(path, "cgem") {
        let t = read_cgem(path)?;
        return RasterImage::new(t.cols, t.rows, t.dim, Samples::F32(t.data)).map_err(|e| IoError::format(path, e));
    }
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_ppm(&bytes).map_err(|m| IoError::format(path, m))
}

/// File extension [`write_image`] will use for `img`.
pub fn image_extension(img: &RasterImage) -> &'static str {
    match img.data() {
        Samples::U8(_) if img.channels() == 3 => "ppm",
        _ => "cgem",
    }
}

pub fn encode_image(img: &RasterImage) -> Vec<u8> {
    match encode_ppm(img) {
        Ok(b) => b,
        Err(_) => {
            let data = match img.data() {
                Samples::U8(d) => d.iter().map(|&v| v as f32).collect(),
                Samples::F32(d) => d.clone(),
            };
            Tensor3 {
                rows: img.height(),
                cols: img.width(),
                dim: img.channels(),
                data,
            }
            .encode()
        }
    }
}

pub fn write_image(path: &Path, img: &RasterImage) -> Result<(), IoError> {
    write_bytes(path, &encode_image(img))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), IoError> {
    write_bytes(path, &to_json_bytes(value))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::format(path, e))
}

pub fn write_jsonl<S: Serialize>(path: &Path, rows: &[S]) -> Result<(), IoError> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("serializable value");
        buf.write_all(b"\n").expect("vec write");
    }
    write_bytes(path, &buf)
}

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics<f64>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    Intrinsics::from_json_str(&text).map_err(|e| IoError::format(path, e))
}

/// Reads a detection list, with or without a code fence.
pub fn read_detections(path: &Path) -> Result<Vec<Detection>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_detections(&text)
        .map(|p| p.detections)
        .map_err(|e| IoError::format(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntrinsicsRef {
    Inline(Intrinsics<f64>),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub intrinsics: IntrinsicsRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<PathBuf>,
}

/// One line of the manifest: either a parsed entry or the reason it is
/// unusable, so a bad line fails only its own sample.
pub type ManifestLine = Result<ManifestEntry, String>;

/// Reads a JSON-lines manifest; blank lines are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestLine>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("manifest line {}: {e}", i + 1)))
        .collect())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads the sample described by `entry`; relative paths are taken from `base`.
pub fn load_sample(entry: &ManifestEntry, base: &Path) -> Result<Sample, IoError> {
    let image = read_image(&resolve(base, &entry.image))?;
    let intrinsics = match &entry.intrinsics {
        IntrinsicsRef::Inline(k) => *k,
        IntrinsicsRef::Path(p) => read_intrinsics(&resolve(base, p))?,
    };
    let depth = match &entry.depth {
        Some(p) => {
            let path = resolve(base, p);
            Some(depth_from_tensor(&read_cgem(&path)?).map_err(|m| IoError::format(&path, m))?)
        }
        None => None,
    };
    let boxes = match &entry.boxes {
        Some(p) => Some(read_detections(&resolve(base, p))?),
        None => None,
    };
    Ok(Sample {
        id: entry.id.clone(),
        image,
        intrinsics,
        depth,
        boxes,
    })
}

/// Output location for an input path: relative inputs keep their layout under
/// `root`; absolute or escaping ones go to `root/<id>/<file name>`.
pub fn mirrored_path(root: &Path, id: &str, input: &Path) -> PathBuf {
    let inside = input.is_relative() && input.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if inside {
        root.join(input)
    } else {
        root.join(id).join(input.file_name().unwrap_or(input.as_os_str()))
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes an augmented sample under `root`, mirroring the input layout. Box
/// files are copied byte for byte. Returns the output entry.
pub fn write_augmented(root: &Path, entry: &ManifestEntry, base: &Path, out: &AugmentedSample) -> Result<ManifestEntry, IoError> {
    let img_in = mirrored_path(root, &entry.id, &entry.image);
    let img_path = img_in.with_extension(image_extension(&out.image));
    write_image(&img_path, &out.image)?;

    let k_path = match &entry.intrinsics {
        IntrinsicsRef::Path(p) => mirrored_path(root, &entry.id, p),
        IntrinsicsRef::Inline(_) => sibling(&img_in, ".intrinsics.json"),
    };
    write_bytes(&k_path, format!("{}\n", out.intrinsics.to_json_string()).as_bytes())?;

    let depth = match (&entry.depth, &out.depth) {
        (Some(p), Some(d)) => {
            let path = mirrored_path(root, &entry.id, p).with_extension("cgem");
            write_cgem(&path, &depth_tensor(d))?;
            Some(path)
        }
        _ => None,
    };
    let boxes = match &entry.boxes {
        Some(p) => {
            let src = resolve(base, p);
            let bytes = fs::read(&src).map_err(|e| IoError::io(&src, e))?;
            let path = mirrored_path(root, &entry.id, p);
            write_bytes(&path, &bytes)?;
            Some(path)
        }
        None => None,
    };
    let rel = |p: PathBuf| p.strip_prefix(root).map(Path::to_path_buf).unwrap_or(p);
    Ok(ManifestEntry {
        id: entry.id.clone(),
        image: rel(img_path),
        intrinsics: IntrinsicsRef::Path(rel(k_path)),
        depth: depth.map(rel),
        boxes: boxes.map(rel),
    })
}
