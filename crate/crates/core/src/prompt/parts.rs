use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tokenize::{detokenize, tokenize};
use crate::error::{invalid, Error, Result};

pub const DOMAIN_NOUNS: &[&str] = &[
    "photo",
    "photograph",
    "picture",
    "image",
    "painting",
    "sketch",
    "drawing",
    "rendering",
    "illustration",
    "snapshot",
    "render",
    "view",
    "close-up",
];

pub const DETERMINERS: &[&str] = &[
    "a", "an", "the", "one", "two", "three", "four", "five", "some", "several", "many", "this",
    "that", "these", "those", "his", "her", "their", "its", "my", "our",
];

pub const CONJUNCTIONS: &[&str] = &["and", "or", ",", "&"];

pub const PREPOSITIONS: &[&str] = &[
    "on",
    "in",
    "at",
    "under",
    "near",
    "by",
    "beside",
    "over",
    "above",
    "behind",
    "inside",
    "across",
    "along",
    "through",
    "against",
    "into",
    "onto",
    "underneath",
    "below",
    "within",
    "among",
    "around",
    "beneath",
];

/// Nouns that follow the subject in material edits ("a wooden cat sculpture").
pub const FORM_NOUNS: &[&str] = &["model", "sculpture", "statue", "figurine"];

pub const ANIMATE_NOUNS: &[&str] = &[
    "cat", "dog", "horse", "sheep", "cow", "bird", "elephant", "bear", "zebra", "giraffe",
    "person", "man", "woman", "boy", "girl", "child", "people", "duck", "lion", "tiger", "monkey",
    "rabbit", "fish", "deer", "goat", "pig",
];

pub const OBJECT_NOUNS: &[&str] = &[
    "ball",
    "box",
    "kite",
    "egg",
    "train",
    "airplane",
    "plane",
    "aeroplane",
    "car",
    "bus",
    "boat",
    "bicycle",
    "bike",
    "motorcycle",
    "motorbike",
    "truck",
    "couch",
    "sofa",
    "chair",
    "table",
    "bottle",
    "plant",
    "tv",
    "monitor",
    "bench",
    "umbrella",
    "cup",
    "vase",
    "clock",
    "laptop",
    "bowl",
    "teddy",
    "toy",
    "lamp",
    "bed",
    "house",
    "tree",
    "hat",
    "bag",
    "backpack",
    "suitcase",
    "pizza",
    "cake",
    "apple",
    "banana",
    "orange",
    "donut",
    "sandwich",
    "book",
    "phone",
    "skateboard",
    "surfboard",
    "frisbee",
    "hydrant",
    "sign",
    "grass",
    "sky",
    "sand",
    "sidewalk",
    "road",
    "street",
    "field",
    "beach",
    "water",
    "ground",
    "snow",
    "floor",
    "room",
];

pub(crate) fn is_in(list: &[&str], token: &str) -> bool {
    let lower = token.to_lowercase();
    list.iter().any(|w| *w == lower)
}

pub(crate) fn is_noun(token: &str) -> bool {
    is_in(OBJECT_NOUNS, token) || is_in(ANIMATE_NOUNS, token)
}

fn is_punct(token: &str) -> bool {
    token.chars().all(|c| !c.is_alphanumeric())
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn empty_at(i: usize) -> Self {
        Self { start: i, end: i }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Domain,
    Adjective,
    Subject,
    Action,
    Background,
    /// Tokens between the named parts (articles, "of", conjunctions, punctuation).
    Other,
}

/// A caption split into ⟨domain⟩ of ⟨adjectives⟩ ⟨subject⟩ ⟨action⟩ ⟨background⟩.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptParts {
    pub raw: Vec<String>,
    pub domain: Span,
    pub adjectives: Vec<Span>,
    pub subject: Span,
    pub action: Span,
    pub background: Span,
}

impl PromptParts {
    pub fn text(&self, span: Span) -> String {
        detokenize(&self.raw[span.start..span.end])
    }

    pub fn subject_text(&self) -> String {
        self.text(self.subject)
    }

    pub fn adjective_texts(&self) -> Vec<String> {
        self.adjectives.iter().map(|s| self.text(*s)).collect()
    }

    /// Named spans in token order, each non-empty.
    fn named(&self) -> Vec<(Role, Span)> {
        let mut v = alloc::vec![(Role::Domain, self.domain)];
        v.extend(self.adjectives.iter().map(|s| (Role::Adjective, *s)));
        v.extend([
            (Role::Subject, self.subject),
            (Role::Action, self.action),
            (Role::Background, self.background),
        ]);
        v.retain(|(_, s)| !s.is_empty());
        v
    }

    /// Check that named spans are ordered, disjoint and inside `raw`.
    pub fn validate(&self) -> Result<()> {
        let mut pos = 0;
        for (role, s) in self.named() {
            if s.start < pos || s.end > self.raw.len() || s.start > s.end {
                return Err(invalid(alloc::format!("{role:?} span {s:?} out of order")));
            }
            pos = s.end;
        }
        Ok(())
    }

    /// Cover of `raw` by consecutive segments, filling gaps with [`Role::Other`].
    pub fn segments(&self) -> Vec<(Role, Span)> {
        let mut out = Vec::new();
        let mut pos = 0;
        for (role, s) in self.named() {
            if s.start > pos {
                out.push((Role::Other, Span::new(pos, s.start)));
            }
            out.push((role, s));
            pos = s.end;
        }
        if pos < self.raw.len() {
            out.push((Role::Other, Span::new(pos, self.raw.len())));
        }
        out
    }

    /// Caption text rebuilt from the segments.
    pub fn reassemble(&self) -> String {
        let tokens: Vec<&str> = self
            .segments()
            .iter()
            .flat_map(|(_, s)| self.raw[s.start..s.end].iter().map(String::as_str))
            .collect();
        detokenize(&tokens)
    }
}

/// Rule-based split of a caption. The subject is the first known noun after
/// the domain phrase; adjectives are the words between its determiner and
/// it; the action runs to the first preposition after the subject and the
/// background is the noun phrase that follows.
pub fn decompose_caption(text: &str) -> Result<PromptParts> {
    let raw = tokenize(text);
    if raw.is_empty() {
        return Err(invalid("empty caption"));
    }
    let n = raw.len();

    let mut domain = Span::empty_at(0);
    let mut np_start = 0;
    if let Some(of) = raw.iter().position(|t| t.eq_ignore_ascii_case("of")) {
        if raw[..of].iter().any(|t| is_in(DOMAIN_NOUNS, t)) {
            domain = Span::new(0, of);
            np_start = of + 1;
        }
    }

    let subj = (np_start..n)
        .find(|&i| is_noun(&raw[i]))
        .ok_or_else(|| Error::NoSubject(String::from(text)))?;
    let subject = Span::new(subj, subj + 1);

    let adjectives = (np_start..subj)
        .filter(|&i| {
            !is_in(DETERMINERS, &raw[i]) && !is_in(CONJUNCTIONS, &raw[i]) && !is_punct(&raw[i])
        })
        .map(|i| Span::new(i, i + 1))
        .collect();

    let mut after = subj + 1;
    while after < n && is_in(FORM_NOUNS, &raw[after]) {
        after += 1;
    }
    let content_end = (after..n).find(|&i| is_punct(&raw[i])).unwrap_or(n);
    let (action, background) = match (after..content_end).find(|&i| is_in(PREPOSITIONS, &raw[i])) {
        Some(prep) => {
            let action = Span::new(after, prep + 1);
            let mut b = prep + 1;
            while b < content_end && is_in(DETERMINERS, &raw[b]) {
                b += 1;
            }
            let e = (b..content_end)
                .find(|&i| is_in(PREPOSITIONS, &raw[i]))
                .unwrap_or(content_end);
            (action, Span::new(b, e))
        }
        None => (Span::new(after, content_end), Span::empty_at(content_end)),
    };

    let parts = PromptParts {
        raw,
        domain,
        adjectives,
        subject,
        action,
        background,
    };
    parts.validate()?;
    Ok(parts)
}
