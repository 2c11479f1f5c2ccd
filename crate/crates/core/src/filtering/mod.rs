//! Two-stage filtering of edited samples: embedding-similarity gates per
//! sample, then surrogate-loss masking per pixel.

mod embed;
mod pixel;
mod sample;

pub use embed::{dot, normalize, Embedder, LexiconEmbedder};
pub use pixel::{
    class_loss_profile, class_loss_profile_from_maps, pixel_filter, region_discard,
    ClassLossProfile,
};
pub use sample::{
    directional_similarity, sample_filter, sample_filter_same_prompt, FilterRecord,
    FilterThresholds, SampleMetrics,
};
