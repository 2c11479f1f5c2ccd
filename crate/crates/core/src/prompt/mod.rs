//! Caption decomposition and attribute-directed caption edits.

mod edit;
mod llm;
mod parts;
mod tokenize;

pub use edit::{
    edit_attribute, request_from_pair, weather_phrase, AttributeKind, AttributeVocabulary,
    EditRequest,
};
pub use llm::{llm_edit, render_instruction, LanguageClient};
pub use parts::{
    decompose_caption, PromptParts, Role, Span, ANIMATE_NOUNS, DOMAIN_NOUNS, OBJECT_NOUNS,
};
pub use tokenize::{detokenize, tokenize, Vocabulary, BOS, BOS_ID, UNK, UNK_ID};
