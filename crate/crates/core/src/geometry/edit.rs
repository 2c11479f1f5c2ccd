use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::inpaint::Inpainter;
use super::soften::{dilate, soften_mask};
use super::transform::{
    apply_rigid, make_transform, remaining_mask, GeometryEditSpec, RigidTransform,
};
use crate::error::{invalid, Result};
use crate::scenes::{BinaryMask, Image, SegLabel};

/// Question put to a vision-language model about what should fill the
/// vacated area.
pub fn repaint_question(object_name: &str) -> String {
    format!("If the size or position of the {object_name} is changed, what is the remaining area that should be filled?")
}

/// Vision-language backend answering a question about an image.
pub trait VisionLanguageClient {
    fn ask(&self, image: &Image, question: &str) -> Result<String>;
}

/// Inpainting prompt P'. Uses the client's answer when available and
/// non-empty, otherwise `fallback` (the scene's background class name).
pub fn repaint_prompt(
    client: Option<&dyn VisionLanguageClient>,
    image: &Image,
    object_name: &str,
    fallback: &str,
) -> Result<String> {
    if object_name.trim().is_empty() {
        return Err(invalid("object name must be non-empty"));
    }
    if let Some(c) = client {
        match c.ask(image, &repaint_question(object_name)) {
            Ok(a) if !a.trim().is_empty() => return Ok(a.trim().to_string()),
            Ok(_) => log::warn!("empty repaint answer for {object_name:?}; using {fallback:?}"),
            Err(e) => log::warn!("repaint prompt backend failed ({e}); using {fallback:?}"),
        }
    }
    Ok(fallback.to_string())
}

/// Most frequent background class among pixels bordering `region` (outside
/// it and outside `exclude`); ties go to the lower class id. Falls back to
/// the most frequent background class in the whole label.
pub fn dominant_adjacent_class(
    label: &SegLabel,
    region: &BinaryMask,
    exclude: &BinaryMask,
    background: &[u8],
) -> Option<u8> {
    let ring = dilate(region, 1).and_not(region).and_not(exclude);
    let mut counts = vec![0usize; label.num_classes];
    let tally = |mask: &BinaryMask, counts: &mut Vec<usize>| {
        for (i, &on) in mask.bits.iter().enumerate() {
            let c = label.classes[i];
            if on && background.contains(&c) && (c as usize) < counts.len() {
                counts[c as usize] += 1;
            }
        }
    };
    tally(&ring, &mut counts);
    if counts.iter().all(|&c| c == 0) {
        tally(&exclude.not(), &mut counts);
    }
    let (best, n) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (c, &n)| if n > acc.1 { (c, n) } else { acc });
    (n > 0).then_some(best as u8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryLog {
    pub sample_id: String,
    pub kind: String,
    pub level: f64,
    pub e_x: f64,
    pub e_y: f64,
    pub b_x: f64,
    pub b_y: f64,
    /// Degrees, position edits only.
    pub direction: Option<f64>,
    pub inpaint_area_fraction: f64,
    #[serde(rename = "prompt")]
    pub prompt: String,
}

#[derive(Debug, Clone)]
pub struct GeometryEdit {
    pub image: Image,
    pub label: SegLabel,
    /// Transformed object mask M*.
    pub mask: BinaryMask,
    pub transform: RigidTransform,
    pub log: GeometryLog,
}

/// Inputs describing the object and scene context of a geometry edit.
pub struct GeometryContext<'a> {
    pub object_mask: &'a BinaryMask,
    pub object_name: &'a str,
    pub background_classes: &'a [u8],
    pub background_names: &'a [String],
    pub vlm: Option<&'a dyn VisionLanguageClient>,
}

/// Rigidly transform the object, relabel the vacated area with the
/// adjacent background class, and inpaint the softened remaining area.
pub fn edit_geometry(
    image: &Image,
    label: &SegLabel,
    ctx: &GeometryContext<'_>,
    spec: &GeometryEditSpec,
    inpainter: &dyn Inpainter,
    inpaint_seed: u64,
) -> Result<GeometryEdit> {
    let object = ctx.object_mask;
    let (transform, direction) = make_transform(spec, object)?;
    let moved = apply_rigid(image, label, object, &transform, [0.5; 3])?;
    let vacated = remaining_mask(object, &moved.mask)?;

    let mut g_star = moved.label.clone();
    let bg = dominant_adjacent_class(
        label,
        &vacated,
        &object.or(&moved.mask),
        ctx.background_classes,
    )
    .ok_or_else(|| invalid("scene has no background class to fill the vacated area"))?;
    for (i, c) in g_star.classes.iter_mut().enumerate() {
        if vacated.bits[i] {
            *c = bg;
        }
    }

    let fallback = ctx
        .background_classes
        .iter()
        .position(|&c| c == bg)
        .and_then(|i| ctx.background_names.get(i))
        .cloned()
        .unwrap_or_else(|| "background".to_string());
    let prompt = repaint_prompt(ctx.vlm, image, ctx.object_name, &fallback)?;
    let soft = soften_mask(&vacated);
    let out = if vacated.is_empty() {
        moved.image.clone()
    } else {
        inpainter.inpaint(&moved.image, &soft, &g_star, &prompt, inpaint_seed)?
    };

    let log = GeometryLog {
        sample_id: String::new(),
        kind: spec.kind.name().to_string(),
        level: spec.level,
        e_x: transform.e_x,
        e_y: transform.e_y,
        b_x: transform.b_x,
        b_y: transform.b_y,
        direction,
        inpaint_area_fraction: soft.support().area_fraction(),
        prompt,
    };
    Ok(GeometryEdit {
        image: out,
        label: g_star,
        mask: moved.mask,
        transform,
        log,
    })
}
