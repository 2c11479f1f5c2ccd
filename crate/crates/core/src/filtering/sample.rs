use alloc::string::String;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::embed::{dot, Embedder};
use crate::error::{invalid, Error, Result};
use crate::scenes::Image;

/// Acceptance thresholds for both filtering stages. The similarity
/// defaults are chosen, not taken from a published configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    pub min_directional: f64,
    pub min_image_image: f64,
    pub min_image_text: f64,
    pub max_noisy_area_fraction: f64,
    /// Loss margin factor of the pixel filter.
    pub alpha: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_directional: 0.2,
            min_image_image: 0.7,
            min_image_text: 0.2,
            max_noisy_area_fraction: 0.10,
            alpha: 2.0,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_directional", self.min_directional),
            ("min_image_image", self.min_image_image),
            ("min_image_text", self.min_image_text),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(invalid(alloc::format!(
                    "{name} must lie in [-1, 1], got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.max_noisy_area_fraction) {
            return Err(invalid("max_noisy_area_fraction must lie in [0, 1]"));
        }
        if !(self.alpha >= 1.0) {
            return Err(invalid("alpha must be at least 1"));
        }
        Ok(())
    }
}

/// Cosine between the image change `vI - vI*` and the text change
/// `vT - vT*`.
pub fn directional_similarity(
    v_i: &[f64],
    v_i_star: &[f64],
    v_t: &[f64],
    v_t_star: &[f64],
) -> Result<f64> {
    if v_i.len() != v_i_star.len() || v_t.len() != v_t_star.len() || v_i.len() != v_t.len() {
        return Err(crate::error::shape_err("embedding lengths differ"));
    }
    let di: alloc::vec::Vec<f64> = v_i.iter().zip(v_i_star).map(|(a, b)| a - b).collect();
    let dt: alloc::vec::Vec<f64> = v_t.iter().zip(v_t_star).map(|(a, b)| a - b).collect();
    let ni = dot(&di, &di).sqrt();
    let nt = dot(&dt, &dt).sqrt();
    if !(ni > 1e-12) {
        return Err(Error::ZeroDirection("image"));
    }
    if !(nt > 1e-12) {
        return Err(Error::ZeroDirection("text"));
    }
    Ok((dot(&di, &dt) / (ni * nt)).clamp(-1.0, 1.0))
}

/// Sample-level similarity scores. `directional` is `None` when either
/// edit direction vanishes or the check was not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub directional: Option<f64>,
    pub image_image: f64,
    pub image_text: f64,
    pub accepted: bool,
}

impl SampleMetrics {
    fn decide(
        directional: Option<f64>,
        image_image: f64,
        image_text: f64,
        t: &FilterThresholds,
        need_dir: bool,
    ) -> Self {
        let dir_ok = match directional {
            Some(d) => d >= t.min_directional,
            None => !need_dir,
        };
        let accepted = dir_ok && image_image >= t.min_image_image && image_text >= t.min_image_text;
        Self {
            directional,
            image_image,
            image_text,
            accepted,
        }
    }
}

/// Scores an edited pair `(I, P) → (I*, P*)`. Accepted iff every metric
/// is at or above its threshold; an edit without a measurable image or
/// text change is rejected.
pub fn sample_filter(
    image: &Image,
    edited: &Image,
    prompt: &str,
    edited_prompt: &str,
    embedder: &dyn Embedder,
    thresholds: &FilterThresholds,
) -> Result<SampleMetrics> {
    let vi = embedder.embed_image(image)?;
    let vis = embedder.embed_image(edited)?;
    let vt = embedder.embed_text(prompt)?;
    let vts = embedder.embed_text(edited_prompt)?;
    let directional = match directional_similarity(&vi, &vis, &vt, &vts) {
        Ok(d) => Some(d),
        Err(Error::ZeroDirection(which)) => {
            log::debug!("no measurable {which} edit; rejecting sample");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(SampleMetrics::decide(
        directional,
        dot(&vi, &vis),
        dot(&vis, &vts),
        thresholds,
        true,
    ))
}

/// Sample filter for edits that keep the caption (size and position):
/// only image-image and image-text similarity are checked.
pub fn sample_filter_same_prompt(
    image: &Image,
    edited: &Image,
    prompt: &str,
    embedder: &dyn Embedder,
    thresholds: &FilterThresholds,
) -> Result<SampleMetrics> {
    let vi = embedder.embed_image(image)?;
    let vis = embedder.embed_image(edited)?;
    let vts = embedder.embed_text(prompt)?;
    Ok(SampleMetrics::decide(
        None,
        dot(&vi, &vis),
        dot(&vis, &vts),
        thresholds,
        false,
    ))
}

/// One line of the filter report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub sample_id: String,
    pub directional: Option<f64>,
    pub image_image: f64,
    pub image_text: f64,
    pub accepted: bool,
    /// `None` for samples rejected before the pixel stage.
    pub noisy_pixel_fraction: Option<f64>,
    pub discarded: bool,
}

impl FilterRecord {
    /// Kept in the benchmark.
    pub fn kept(&self) -> bool {
        self.accepted && !self.discarded
    }
}
