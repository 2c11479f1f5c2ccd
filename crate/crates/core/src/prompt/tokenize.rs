use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const BOS: &str = "<bos>";
pub const UNK: &str = "<unk>";
pub const BOS_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

fn is_punct(c: char) -> bool {
    matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '"' | '(' | ')')
}

/// Split on whitespace; punctuation characters become tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Join tokens with single spaces, attaching closing punctuation to the
/// preceding word.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        let attach = matches!(t, "." | "," | "!" | "?" | ";" | ":" | ")");
        if i > 0 && !attach && !s.ends_with('(') {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}

/// Fixed word list mapping lowercase tokens to embedding ids. Id 0 is the
/// start-of-prompt token and id 1 stands in for unknown words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Build from content words; the two reserved entries are prepended and
    /// duplicates dropped (first occurrence wins).
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            words: Vec::new(),
            index: BTreeMap::new(),
        };
        for w in [BOS, UNK]
            .into_iter()
            .map(String::from)
            .chain(words.into_iter().map(|w| w.as_ref().to_lowercase()))
        {
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len() as u32);
                v.words.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(&token.to_lowercase())
    }

    /// Ids of `tokens` preceded by the start token, so attention column
    /// `j + 1` belongs to prompt token `j`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        core::iter::once(BOS_ID)
            .chain(tokens.iter().map(|t| self.id(t.as_ref())))
            .collect()
    }

    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        self.encode(&tokenize(text))
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = crate::Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        if words.first().map(String::as_str) != Some(BOS)
            || words.get(1).map(String::as_str) != Some(UNK)
        {
            return Err(invalid("vocabulary must start with the reserved tokens"));
        }
        let v = Vocabulary::new(&words[2..]);
        if v.len() != words.len() {
            return Err(invalid("vocabulary contains duplicate words"));
        }
        Ok(v)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn punctuation_is_split_and_reattached() {
        let t = tokenize("Two sheep lying in the grass.");
        assert_eq!(t, vec!["Two", "sheep", "lying", "in", "the", "grass", "."]);
        assert_eq!(detokenize(&t), "Two sheep lying in the grass.");
    }

    #[test]
    fn vocabulary_reserves_start_and_unknown() {
        let v = Vocabulary::new(["a", "cat", "A"]);
        assert_eq!(v.len(), 4);
        assert_eq!(v.encode(&["A", "dog"]), vec![BOS_ID, 2, UNK_ID]);
        let back = Vocabulary::try_from(Vec::<String>::from(v.clone())).unwrap();
        assert_eq!(back, v);
    }
}
