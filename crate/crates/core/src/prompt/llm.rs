use alloc::string::String;
use alloc::vec::Vec;

use super::edit::{request_from_pair, AttributeKind, AttributeVocabulary, EditRequest};
use super::parts::decompose_caption;
use super::tokenize::tokenize;
use crate::error::Result;

const COLOR_TEMPLATE: &str = "I want to change the color of the object in the source image. Please generate all possible target text prompts given the source text prompt describing the source image. For example, the source is \"a cat\", you can generate \"a blue cat\".";
const MATERIAL_TEMPLATE: &str = "I want to change the material of the object in the source image. Please generate all possible target text prompts given the source text prompt describing the source image. For example, source is \"a cat\", you can generate \"a wooden cat sculpture\".";
const STYLE_TEMPLATE: &str = "I want to change the image style of source images without perturbing the content. Please generate all possible target text prompts given the source text prompt describing the source image. For example, source is 'a cat', you can generate 'a watercolor cat'.";
const WEATHER_TEMPLATE: &str = "I want to change the weather or season condition of the source image. Please generate all possible target text prompts given the source text prompt that describes the source image, only changing the weather conditions, or adding a description of the weather if not already present.";

/// Instruction sent to a language model for one attribute category.
pub fn render_instruction(kind: AttributeKind) -> &'static str {
    match kind {
        AttributeKind::Color => COLOR_TEMPLATE,
        AttributeKind::Material => MATERIAL_TEMPLATE,
        AttributeKind::Style => STYLE_TEMPLATE,
        AttributeKind::Weather => WEATHER_TEMPLATE,
    }
}

/// Text-to-text backend proposing edited captions.
pub trait LanguageClient {
    fn candidates(&self, template: &str, caption: &str) -> Result<Vec<String>>;
}

/// Ask `client` for edits of `caption` and keep those that change a single
/// span while preserving the subject noun. Rejected candidates are logged.
pub fn llm_edit(
    client: &dyn LanguageClient,
    caption: &str,
    kind: AttributeKind,
    vocab: &AttributeVocabulary,
) -> Result<Vec<EditRequest>> {
    let source = decompose_caption(caption)?;
    let subject = source.subject_text().to_lowercase();
    let raw = client.candidates(render_instruction(kind), caption)?;
    let mut out = Vec::with_capacity(raw.len());
    for cand in raw {
        let parsed = match decompose_caption(&cand) {
            Ok(p) => p,
            Err(e) => {
                log::info!("dropping candidate {cand:?}: {e}");
                continue;
            }
        };
        if parsed.subject_text().to_lowercase() != subject {
            log::info!("dropping candidate {cand:?}: subject changed from {subject:?}");
            continue;
        }
        let changed = |v: &String| {
            let vt = tokenize(v);
            let t = tokenize(&cand);
            t.windows(vt.len().max(1))
                .any(|w| w.iter().zip(&vt).all(|(a, b)| a.eq_ignore_ascii_case(b)))
        };
        let value = vocab
            .values(kind)
            .iter()
            .find(|v| changed(v))
            .cloned()
            .unwrap_or_default();
        match request_from_pair(caption, &cand, kind, &value) {
            Ok(req) => out.push(req),
            Err(e) => log::info!("dropping candidate {cand:?}: {e}"),
        }
    }
    Ok(out)
}
