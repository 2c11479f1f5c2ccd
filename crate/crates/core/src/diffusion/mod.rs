//! Diffusion-time machinery: schedules, DDIM sampling and inversion, and the
//! denoiser contract with its capture and override hooks.

mod denoiser;
mod latent;
mod linear;
mod sampler;
mod schedule;
mod toy;
mod train;

pub use denoiser::{
    AttentionGradient, AttentionObjective, Conditioning, CrossAttention, DenoiseOutput, Denoiser,
    Overrides,
};
pub use latent::{
    decode, downsample_mask, downsample_soft_mask, encode, latent_shape_for, structure_map,
    upsample_plane, LATENT_CHANNELS, LATENT_FACTOR,
};
pub use linear::{LinearDenoiser, LINEAR_ATTENTION_LAYER};
pub use sampler::{
    ddim_invert, ddim_invert_step, ddim_sample, ddim_step, forward_diffuse, predict_x0, LatentState,
};
pub use schedule::{cosine_alpha_bar, make_schedule, NoiseSchedule, ScheduleKind, DEFAULT_STEPS};
pub use toy::{ToyConfig, ToyDenoiser, CROSS_ATTN_UP, FEATURE_DOWN, FEATURE_UP, SELF_ATTN_MID};
pub use train::{denoising_loss, train_toy_denoiser, TrainOptions, TrainReport, TrainingExample};
