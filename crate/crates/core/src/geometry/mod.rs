//! Object size and position edits: rigid transform of image, label and
//! mask, remaining-area computation, soft masks and inpainting.

mod edit;
mod inpaint;
mod soften;
mod transform;

pub use edit::{
    dominant_adjacent_class, edit_geometry, repaint_prompt, repaint_question, GeometryContext,
    GeometryEdit, GeometryLog, VisionLanguageClient,
};
pub use inpaint::{composite, DiffusionInpainter, Inpainter, PrototypeFill};
pub use soften::{dilate, soften_mask};
pub use transform::{
    apply_rigid, apply_rigid_plane, make_transform, remaining_mask, GeometryEditSpec, GeometryKind,
    RigidResult, RigidTransform,
};
