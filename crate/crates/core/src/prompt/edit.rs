use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::parts::{
    is_in, PromptParts, Span, ANIMATE_NOUNS, CONJUNCTIONS, DETERMINERS, FORM_NOUNS, PREPOSITIONS,
};
use super::tokenize::{detokenize, tokenize};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Color,
    Material,
    Style,
    Weather,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [Self::Color, Self::Material, Self::Style, Self::Weather];

    pub fn name(self) -> &'static str {
        match self {
            Self::Color => "color",
            Self::Material => "material",
            Self::Style => "style",
            Self::Weather => "weather",
        }
    }

    /// Local edits touch only the object; global ones restyle the whole image.
    pub fn is_local(self) -> bool {
        matches!(self, Self::Color | Self::Material)
    }
}

/// Closed value sets per attribute kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeVocabulary {
    pub color: Vec<String>,
    pub material: Vec<String>,
    pub style: Vec<String>,
    pub weather: Vec<String>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for AttributeVocabulary {
    fn default() -> Self {
        Self {
            color: strings(&[
                "red", "blue", "green", "yellow", "white", "black", "brown", "purple",
            ]),
            material: strings(&["wooden", "metallic", "stone", "glass", "plastic"]),
            style: strings(&[
                "watercolor painting",
                "pencil sketch",
                "digital painting",
                "oil painting",
            ]),
            weather: strings(&["heavy rain", "snowfall", "dense fog", "night"]),
        }
    }
}

impl AttributeVocabulary {
    pub fn values(&self, kind: AttributeKind) -> &[String] {
        match kind {
            AttributeKind::Color => &self.color,
            AttributeKind::Material => &self.material,
            AttributeKind::Style => &self.style,
            AttributeKind::Weather => &self.weather,
        }
    }

    pub fn check(&self, kind: AttributeKind, value: &str) -> Result<()> {
        let values = self.values(kind);
        if values.iter().any(|v| v == value) {
            Ok(())
        } else {
            Err(Error::UnknownAttributeValue {
                value: value.to_string(),
                vocabulary: values.to_vec(),
            })
        }
    }

    /// Every word that can appear in an edited caption.
    pub fn words(&self) -> Vec<String> {
        let mut out = Vec::new();
        for kind in AttributeKind::ALL {
            for v in self.values(kind) {
                out.extend(tokenize(v));
                if kind == AttributeKind::Weather {
                    out.extend(tokenize(&weather_phrase(v)));
                }
            }
        }
        out.extend(["of", "an", "a"].iter().map(|s| s.to_string()));
        out.extend(FORM_NOUNS.iter().map(|s| s.to_string()));
        out
    }
}

const EXTRA_COLORS: &[&str] = &[
    "orange", "pink", "gray", "grey", "silver", "gold", "golden", "beige", "tan",
];

/// Phrase appended to a caption for a weather value.
pub fn weather_phrase(value: &str) -> String {
    match value {
        "heavy rain" => "under a heavy downpour".to_string(),
        "snowfall" => "in heavy snowfall".to_string(),
        "dense fog" => "in dense fog".to_string(),
        "night" => "at night".to_string(),
        other => format!("in {other}"),
    }
}

fn is_function_word(token: &str) -> bool {
    is_in(DETERMINERS, token)
        || is_in(CONJUNCTIONS, token)
        || is_in(PREPOSITIONS, token)
        || token.eq_ignore_ascii_case("of")
        || token.chars().all(|c| !c.is_alphanumeric())
}

/// A source/target caption pair differing in one contiguous token span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    pub source: String,
    pub target: String,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    /// Replaced range in the source tokens.
    pub source_span: Span,
    /// Replacement range in the target tokens.
    pub target_span: Span,
    /// Edit-token positions within the target tokens (S').
    pub edit_indices: Vec<usize>,
    pub kind: AttributeKind,
    pub value: String,
}

impl EditRequest {
    /// Request whose target equals its source; editing with it reproduces
    /// the reconstruction.
    pub fn identity(caption: &str, kind: AttributeKind) -> Self {
        let tokens = tokenize(caption);
        let n = tokens.len();
        Self {
            source: caption.to_string(),
            target: caption.to_string(),
            source_tokens: tokens.clone(),
            target_tokens: tokens,
            source_span: Span::empty_at(n),
            target_span: Span::empty_at(n),
            edit_indices: Vec::new(),
            kind,
            value: String::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.source_tokens == self.target_tokens
    }

    /// Target with the edited span swapped back to the source tokens.
    pub fn revert(&self) -> String {
        let mut t: Vec<&str> = self.target_tokens[..self.target_span.start]
            .iter()
            .map(String::as_str)
            .collect();
        t.extend(
            self.source_tokens[self.source_span.start..self.source_span.end]
                .iter()
                .map(String::as_str),
        );
        t.extend(
            self.target_tokens[self.target_span.end..]
                .iter()
                .map(String::as_str),
        );
        detokenize(&t)
    }

    /// Edit tokens as words.
    pub fn edit_words(&self) -> Vec<&str> {
        self.edit_indices
            .iter()
            .map(|&i| self.target_tokens[i].as_str())
            .collect()
    }
}

/// Derive the single changed span between two captions by stripping the
/// longest common prefix and suffix. Edit tokens are the content words of
/// the target span that do not already occur in the source span.
pub fn request_from_pair(
    source: &str,
    target: &str,
    kind: AttributeKind,
    value: &str,
) -> Result<EditRequest> {
    let s = tokenize(source);
    let t = tokenize(target);
    let prefix = s.iter().zip(&t).take_while(|(a, b)| a == b).count();
    if prefix == s.len() && prefix == t.len() {
        return Err(invalid("target caption is identical to the source"));
    }
    let max_suffix = s.len().min(t.len()) - prefix;
    let suffix = s
        .iter()
        .rev()
        .zip(t.iter().rev())
        .take(max_suffix)
        .take_while(|(a, b)| a == b)
        .count();
    let source_span = Span::new(prefix, s.len() - suffix);
    let target_span = Span::new(prefix, t.len() - suffix);
    let old: Vec<String> = s[source_span.start..source_span.end]
        .iter()
        .map(|w| w.to_lowercase())
        .collect();
    let edit_indices: Vec<usize> = (target_span.start..target_span.end)
        .filter(|&i| !is_function_word(&t[i]) && !old.contains(&t[i].to_lowercase()))
        .collect();
    if edit_indices.is_empty() {
        return Err(invalid(format!(
            "edit {source:?} -> {target:?} changes no content words"
        )));
    }
    Ok(EditRequest {
        source: detokenize(&s),
        target: detokenize(&t),
        source_tokens: s,
        target_tokens: t,
        source_span,
        target_span,
        edit_indices,
        kind,
        value: value.to_string(),
    })
}

fn starts_with_vowel(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'))
}

/// Make `tokens[i]` agree with the word after it when it is "a"/"an",
/// keeping its capitalization.
fn fix_article(tokens: &mut [String], i: usize) {
    if i + 1 >= tokens.len()
        || !(tokens[i].eq_ignore_ascii_case("a") || tokens[i].eq_ignore_ascii_case("an"))
    {
        return;
    }
    let capital = tokens[i].starts_with(|c: char| c.is_uppercase());
    let art = if starts_with_vowel(&tokens[i + 1]) {
        "an"
    } else {
        "a"
    };
    tokens[i] = if capital {
        format!("{}{}", art[..1].to_uppercase(), &art[1..])
    } else {
        art.to_string()
    };
}

fn noun_phrase_start(parts: &PromptParts) -> usize {
    parts
        .adjectives
        .first()
        .map_or(parts.subject.start, |s| s.start.min(parts.subject.start))
}

/// Rule-based caption edit for one attribute value.
pub fn edit_attribute(
    parts: &PromptParts,
    kind: AttributeKind,
    value: &str,
    vocab: &AttributeVocabulary,
) -> Result<EditRequest> {
    vocab.check(kind, value)?;
    let raw = &parts.raw;
    let value_tokens = tokenize(value);
    let mut t: Vec<String> = raw.clone();
    let np = noun_phrase_start(parts);
    let is_color =
        |w: &str| vocab.color.iter().any(|c| c.eq_ignore_ascii_case(w)) || is_in(EXTRA_COLORS, w);
    let is_material = |w: &str| vocab.material.iter().any(|c| c.eq_ignore_ascii_case(w));

    match kind {
        AttributeKind::Color => {
            match parts
                .adjectives
                .iter()
                .rev()
                .find(|s| is_color(&raw[s.start]))
            {
                Some(s) => {
                    if raw[s.start].eq_ignore_ascii_case(value) {
                        return Err(invalid(format!(
                            "caption already describes the object as {value}"
                        )));
                    }
                    t.splice(s.start..s.end, value_tokens);
                }
                None => {
                    t.splice(parts.subject.start..parts.subject.start, value_tokens);
                }
            }
            if np > 0 {
                fix_article(&mut t, np - 1);
            }
        }
        AttributeKind::Material => {
            let subject_start = parts.subject.start;
            let has_form = raw
                .get(parts.subject.end)
                .is_some_and(|w| is_in(FORM_NOUNS, w));
            if !has_form {
                let form = if is_in(ANIMATE_NOUNS, &raw[subject_start]) {
                    "sculpture"
                } else {
                    "model"
                };
                t.insert(parts.subject.end, form.to_string());
            }
            match parts
                .adjectives
                .iter()
                .rev()
                .find(|s| is_color(&raw[s.start]) || is_material(&raw[s.start]))
            {
                Some(s) => {
                    if raw[s.start].eq_ignore_ascii_case(value) {
                        return Err(invalid(format!(
                            "caption already describes the object as {value}"
                        )));
                    }
                    t.splice(s.start..s.end, value_tokens);
                }
                None => {
                    t.splice(subject_start..subject_start, value_tokens);
                }
            }
            if np > 0 {
                fix_article(&mut t, np - 1);
            }
        }
        AttributeKind::Style => {
            if !parts.domain.is_empty() {
                let d = parts.domain;
                let current: Vec<String> = raw[d.start..d.end]
                    .iter()
                    .filter(|w| !is_in(DETERMINERS, w))
                    .map(|w| w.to_lowercase())
                    .collect();
                if current == value_tokens {
                    return Err(invalid(format!("caption is already a {value}")));
                }
                let article = if is_in(DETERMINERS, &raw[d.start]) {
                    raw[d.start].clone()
                } else {
                    "a".to_string()
                };
                let mut repl = vec![article];
                repl.extend(value_tokens);
                t.splice(d.start..d.end, repl);
                fix_article(&mut t, d.start);
            } else if raw[0].eq_ignore_ascii_case("a") || raw[0].eq_ignore_ascii_case("an") {
                let mut ins = value_tokens;
                ins.push("of".to_string());
                ins.push(raw[0].to_lowercase());
                t.splice(1..1, ins);
                fix_article(&mut t, 0);
            } else {
                let mut ins = vec!["a".to_string()];
                ins.extend(value_tokens);
                ins.push("of".to_string());
                t.splice(0..0, ins);
                fix_article(&mut t, 0);
            }
        }
        AttributeKind::Weather => {
            let end = raw
                .iter()
                .rposition(|w| w.chars().any(char::is_alphanumeric))
                .map_or(0, |i| i + 1);
            t.splice(end..end, tokenize(&weather_phrase(value)));
        }
    }
    request_from_pair(&detokenize(raw), &detokenize(&t), kind, value)
}
