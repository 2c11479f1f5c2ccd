//! Mask-guided appearance editing: a reconstruction branch and an edit
//! branch share the inverted noise; the edit branch receives injected
//! features and self-attention, energy guidance toward the mask, and is
//! blended back outside the mask after every step.

mod editor;
mod energy;

pub use editor::{
    blend_latents, edit_appearance, guided_update, inject_at, inject_features,
    inject_self_attention, reconstruct, AppearanceEdit, EditConfig, EditLog, GuidanceState,
    GuidanceStep,
};
pub use energy::{mask_energy, LatentMask, MaskEnergy};
