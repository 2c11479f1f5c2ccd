//! Scene datasets on disk: `<id>.png`, `<id>_label.png` and a `<id>.json`
//! metadata sidecar per scene.

use std::path::Path;

use anyhow::{Context, Result};
use segbench_core::bench::SourceSample;
use segbench_core::scenes::{generate_scene, Scene, SceneWorld};
use serde::{Deserialize, Serialize};

use crate::io::{load_image, load_label, read_json, save_image, save_label, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMeta {
    pub class: u8,
    /// `[x0, y0, x1, y1]`, end-exclusive.
    pub bbox: Option<[usize; 4]>,
    pub area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub id: String,
    pub class_names: Vec<String>,
    pub objects: Vec<ObjectMeta>,
    pub seed: u64,
    pub caption: String,
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Renders `count` scenes with spec seeds `seed, seed + 1, ...`.
pub fn generate(world: &SceneWorld, count: usize, seed: u64) -> Result<Vec<(Scene, SceneMeta)>> {
    (0..count)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let spec = world.sample_spec(s);
            let scene = generate_scene(&spec)?;
            let meta = SceneMeta {
                id: scene_id(i),
                class_names: world.class_names(),
                objects: scene
                    .objects
                    .iter()
                    .map(|o| ObjectMeta {
                        class: o.class,
                        bbox: o.bbox,
                        area_fraction: o.area_fraction,
                    })
                    .collect(),
                seed: s,
                caption: world.caption(&spec),
            };
            Ok((scene, meta))
        })
        .collect()
}

pub fn save_scene(dir: &Path, scene: &Scene, meta: &SceneMeta) -> Result<()> {
    save_image(&dir.join(format!("{}.png", meta.id)), &scene.image)?;
    save_label(&dir.join(format!("{}_label.png", meta.id)), &scene.label)?;
    write_json(&dir.join(format!("{}.json", meta.id)), meta)
}

/// Loads every scene with a metadata sidecar in `dir`, sorted by id.
pub fn load_dataset(dir: &Path) -> Result<Vec<(SourceSample, SceneMeta)>> {
    let mut metas: Vec<SceneMeta> = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            metas.push(read_json(&path)?);
        }
    }
    metas.sort_by(|a, b| a.id.cmp(&b.id));
    metas
        .into_iter()
        .map(|meta| {
            let image = load_image(&dir.join(format!("{}.png", meta.id)))?;
            let label = load_label(
                &dir.join(format!("{}_label.png", meta.id)),
                meta.class_names.len(),
            )?;
            let sample = SourceSample {
                id: meta.id.clone(),
                image,
                label,
                caption: meta.caption.clone(),
            };
            Ok((sample, meta))
        })
        .collect()
}
