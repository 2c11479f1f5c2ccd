//! Synthetic labeled scenes and the prototype segmenter used as a
//! stand-in for trained segmentation models.

mod image;
mod render;
mod segmenter;
mod world;

pub use image::{BinaryMask, Image, SegLabel, Sized2d, SoftMask, IGNORE_INDEX, MIN_SIDE};
pub use render::{generate_scene, kind_name, Scene, SceneObject, SceneSpec, ShapeKind, ShapeSpec};
pub use segmenter::{
    loss_map, loss_map_from_scores, LossMap, PrototypeSegmenter, ScoreMap, Segmenter,
};
pub use world::{ClassInfo, ClassRole, NamedColor, SceneWorld};
