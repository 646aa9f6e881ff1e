use std::path::Path;

use anyhow::{bail, Context, Result};
use camgeom::ambiguity::ExperimentConfig;
use camgeom::boxes::IouOptions;
use camgeom::embedding::{CameraEmbedConfig, TokenAnchor};
use camgeom::prior::GeoEmbedConfig;
use camgeom::AugmentationPolicy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub camera: CameraEmbedConfig,
    pub geo: GeoEmbedConfig,
    pub patch: u32,
    pub anchor: TokenAnchor,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            camera: CameraEmbedConfig::default(),
            geo: GeoEmbedConfig::default(),
            patch: 14,
            anchor: TokenAnchor::Center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub iou_thresholds: Vec<f64>,
    pub iou: IouOptions,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.25],
            iou: IouOptions::default(),
        }
    }
}

/// Every tunable of every command. Values come from the defaults, then the
/// config file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Drives the augmentation and experiment seeds.
    pub seed: u64,
    pub workers: usize,
    pub embedding: EmbeddingSettings,
    pub augmentation: AugmentationPolicy,
    pub eval: EvalSettings,
    pub ambiguity: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            embedding: EmbeddingSettings::default(),
            augmentation: AugmentationPolicy::default(),
            eval: EvalSettings::default(),
            ambiguity: ExperimentConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Propagates the shared seed and checks every section.
    pub fn finalize(&mut self) -> Result<()> {
        self.augmentation.seed = self.seed;
        self.ambiguity.seed = self.seed;
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        self.embedding.camera.validate().context("embedding.camera")?;
        let g = &self.embedding.geo;
        if g.dim == 0 || !g.dim.is_multiple_of(6) || !(g.period > 0.0 && g.period.is_finite()) {
            bail!("embedding.geo: dim must be a positive multiple of 6 and period positive, got {g:?}");
        }
        if self.embedding.patch == 0 {
            bail!("embedding.patch must be at least 1");
        }
        self.augmentation.validate().context("augmentation")?;
        if self.eval.iou_thresholds.is_empty() {
            bail!("eval.iou_thresholds is empty");
        }
        for &t in &self.eval.iou_thresholds {
            if !(t > 0.0 && t <= 1.0) {
                bail!("eval.iou_thresholds: {t} is outside (0, 1]");
            }
        }
        self.ambiguity.validate().context("ambiguity")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let mut c = Config::default();
        c.finalize().unwrap();
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c: Config = serde_json::from_str(r#"{"seed": 4, "embedding": {"patch": 16}}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.embedding.patch, 16);
        assert_eq!(c.embedding.camera.dim, 256);
        assert_eq!(c.augmentation.scale_range, [0.7, 1.4]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"sed": 4}"#).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = Config::default();
        c.embedding.camera.dim = 100;
        assert!(c.finalize().is_err());
        let mut c = Config::default();
        c.eval.iou_thresholds = vec![1.5];
        assert!(c.finalize().is_err());
    }
}
