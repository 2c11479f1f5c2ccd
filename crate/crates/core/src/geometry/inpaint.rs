use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::{
    ddim_step, decode, downsample_soft_mask, encode, forward_diffuse, structure_map, Conditioning,
    Denoiser, NoiseSchedule,
};
use crate::error::{invalid, shape_err, Result};
use crate::prompt::{tokenize, Vocabulary};
use crate::scenes::{Image, SegLabel, SoftMask};
use crate::tensor::Latent;

/// Repaints the soft-masked region of an image.
pub trait Inpainter: Sync {
    /// `structure` is the target label map G*; `prompt` describes what
    /// should fill the region. Pixels where `soft` is 0 must come back
    /// unchanged.
    fn inpaint(
        &self,
        image: &Image,
        soft: &SoftMask,
        structure: &SegLabel,
        prompt: &str,
        seed: u64,
    ) -> Result<Image>;
}

/// `soft·generated + (1 − soft)·image`, copying `image` exactly where
/// `soft = 0` and `generated` exactly where `soft = 1`.
pub fn composite(image: &Image, generated: &Image, soft: &SoftMask) -> Result<Image> {
    if !image.same_size(generated) || soft.height != image.height || soft.width != image.width {
        return Err(shape_err("composite inputs differ in size"));
    }
    let mut data = Vec::with_capacity(image.data.len());
    for (p, &m) in soft.values.iter().enumerate() {
        for c in 0..3 {
            let (a, g) = (image.data[p * 3 + c], generated.data[p * 3 + c]);
            data.push(if m == 0.0 {
                a
            } else if m == 1.0 {
                g
            } else {
                a + m * (g - a)
            });
        }
    }
    Image::new(image.height, image.width, data)
}

/// Fills the region with a fixed color per target class.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFill {
    pub prototypes: Vec<[f64; 3]>,
}

impl Inpainter for PrototypeFill {
    fn inpaint(
        &self,
        image: &Image,
        soft: &SoftMask,
        structure: &SegLabel,
        _prompt: &str,
        _seed: u64,
    ) -> Result<Image> {
        structure.check_same_size(image)?;
        let mut gen = image.clone();
        for y in 0..image.height {
            for x in 0..image.width {
                let c = structure.at(y, x) as usize;
                if soft.at(y, x) > 0.0 {
                    let rgb = self
                        .prototypes
                        .get(c)
                        .ok_or_else(|| invalid("no prototype for class"))?;
                    gen.set_pixel(y, x, *rgb);
                }
            }
        }
        composite(image, &gen, soft)
    }
}

/// Diffusion inpainting with known-region replacement: each step the
/// latent outside the mask is reset to the forward-noised original, and the
/// result is composited back in pixel space.
pub struct DiffusionInpainter<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub vocab: &'a Vocabulary,
    pub schedule: &'a NoiseSchedule,
    /// Caption template with `{}` standing for the repaint prompt.
    pub caption_template: String,
}

impl DiffusionInpainter<'_> {
    fn caption(&self, prompt: &str) -> String {
        self.caption_template.replacen("{}", prompt, 1)
    }
}

impl Inpainter for DiffusionInpainter<'_> {
    fn inpaint(
        &self,
        image: &Image,
        soft: &SoftMask,
        structure: &SegLabel,
        prompt: &str,
        seed: u64,
    ) -> Result<Image> {
        structure.check_same_size(image)?;
        let z_known = encode(image)?;
        let m = downsample_soft_mask(soft)?;
        let n = z_known.shape.positions();
        let g = structure_map(structure)?;
        let ids = self.vocab.encode(&tokenize(&self.caption(prompt)));
        let cond = Conditioning {
            tokens: &ids,
            structure: Some(&g),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |shape| -> Result<Latent> {
            let data = (0..z_known.shape.len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            Latent::from_vec(shape, data)
        };
        let steps = self.schedule.steps();
        let mut z = normal(z_known.shape)?;
        for t in (1..=steps).rev() {
            let eps = self.denoiser.denoise(&z, t, &cond, None)?.eps;
            z = ddim_step(&z, &eps, t, self.schedule)?;
            let known = forward_diffuse(&z_known, t - 1, &normal(z_known.shape)?, self.schedule)?;
            for (i, v) in z.data.iter_mut().enumerate() {
                let w = m[i % n];
                *v = known.data[i] + w * (*v - known.data[i]);
            }
        }
        let generated = decode(&z, image.height, image.width)?;
        composite(image, &generated, soft)
    }
}
