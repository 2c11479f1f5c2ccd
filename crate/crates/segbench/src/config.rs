//! Run configuration, read from JSON. Every field has a default, so `{}`
//! is a valid config.

use std::path::Path;

use anyhow::Result;
use segbench_core::bench::{BuildConfig, EvalRegions, Variation};
use segbench_core::diffusion::{ScheduleKind, TrainOptions};
use segbench_core::geometry::GeometryKind;
use segbench_core::prompt::AttributeKind;
use segbench_core::scenes::SceneWorld;
use serde::{Deserialize, Serialize};

use crate::http::LanguageConfig;
use crate::io::read_json;

fn default_world() -> SceneWorld {
    let mut w = SceneWorld::standard(56);
    w.color_variation = 0.5;
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    #[serde(flatten)]
    pub options: TrainOptions,
    /// Add copies of each scene with the leading object in every palette color.
    pub recolor: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            options: TrainOptions {
                steps: 1500,
                ..TrainOptions::default()
            },
            recolor: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self { dim: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_world")]
    pub world: SceneWorld,
    /// Number of scenes `scenes gen` renders.
    pub scenes: usize,
    pub schedule: ScheduleKind,
    pub diffusion_steps: usize,
    pub training: TrainingConfig,
    pub build: BuildConfig,
    /// Softmax temperature of the surrogate segmenter used for filtering.
    pub surrogate_temperature: f64,
    /// Softmax temperature of the evaluated prototype segmenter.
    pub model_temperature: f64,
    pub embedder: EmbedderConfig,
    /// Evaluation region per edit family.
    pub eval_region: EvalRegions,
    /// Caption for the inpainter; `{}` is replaced by the repaint prompt.
    pub inpaint_caption: String,
    pub language: Option<LanguageConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let build = BuildConfig {
            plan: vec![
                Variation::Appearance {
                    attribute: AttributeKind::Color,
                },
                Variation::Geometry {
                    kind: GeometryKind::Size,
                    level: 0.2,
                },
                Variation::Geometry {
                    kind: GeometryKind::Size,
                    level: 0.4,
                },
            ],
            ..BuildConfig::default()
        };
        Self {
            seed: 0,
            world: default_world(),
            scenes: 50,
            schedule: ScheduleKind::Linear,
            diffusion_steps: 50,
            training: TrainingConfig::default(),
            build,
            surrogate_temperature: 0.3,
            model_temperature: 0.05,
            embedder: EmbedderConfig::default(),
            eval_region: EvalRegions::default(),
            inpaint_caption: "a photo of the {}".to_string(),
            language: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_json(path)?;
        c.build.validate()?;
        Ok(c)
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> Result<String> {
        crate::store::json_hash(self)
    }
}
