//! Character vocabulary: every distinct Unicode scalar in the corpus gets an
//! id, after two reserved ids for padding and unknown characters.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
const RESERVED: usize = 2;

/// Which end of an over-long text survives encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    #[default]
    Head,
    Tail,
}

impl std::str::FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Truncation::Head),
            "tail" => Ok(Truncation::Tail),
            other => Err(Error::Config(format!("truncation must be head or tail, got {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    ids: HashMap<char, usize>,
}

impl CharVocab {
    /// Builds the vocabulary from the distinct characters of `corpus`,
    /// assigned in ascending code-point order.
    pub fn build(corpus: &str) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("cannot build a vocabulary from an empty corpus"));
        }
        let mut chars: Vec<char> = corpus.chars().collect();
        chars.sort_unstable();
        chars.dedup();
        Ok(Self::from_chars(chars))
    }

    fn from_chars(chars: Vec<char>) -> Self {
        let ids = chars.iter().enumerate().map(|(i, &c)| (c, i + RESERVED)).collect();
        CharVocab { chars, ids }
    }

    /// Total number of ids, reserved ones included.
    pub fn size(&self) -> usize {
        self.chars.len() + RESERVED
    }

    /// Number of distinct corpus characters (`size() - 2`).
    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn pad_id(&self) -> usize {
        PAD_ID
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    pub fn id(&self, c: char) -> usize {
        self.ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(RESERVED).and_then(|i| self.chars.get(i).copied())
    }

    /// Maps `text` to exactly `max_len` ids, keeping the head and padding
    /// at the end.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<usize> {
        self.encode_with(text, max_len, Truncation::Head)
    }

    pub fn encode_with(&self, text: &str, max_len: usize, truncation: Truncation) -> Vec<usize> {
        let mut ids: Vec<usize> = match truncation {
            Truncation::Head => text.chars().take(max_len).map(|c| self.id(c)).collect(),
            Truncation::Tail => {
                let n = text.chars().count();
                text.chars().skip(n.saturating_sub(max_len)).map(|c| self.id(c)).collect()
            }
        };
        ids.resize(max_len, PAD_ID);
        ids
    }

    /// Ids without padding or truncation.
    pub fn encode_all(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.id(c)).collect()
    }

    /// Inverse of `encode`: pad ids are dropped and unknown ids decode to U+FFFD.
    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            match id {
                PAD_ID => {}
                UNK_ID => out.push(char::REPLACEMENT_CHARACTER),
                _ => out.push(self.char_of(id).ok_or(Error::OutOfRange {
                    index: id,
                    size: self.size(),
                })?),
            }
        }
        Ok(out)
    }

    /// Entries in id order, reserved tokens first.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        out.extend(self.chars.iter().map(|c| c.to_string()));
        out
    }

    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        if tokens.len() < RESERVED || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Config("vocabulary must start with <pad>, <unk>".into()));
        }
        let mut chars = Vec::with_capacity(tokens.len() - RESERVED);
        for t in &tokens[RESERVED..] {
            let mut it = t.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => return Err(Error::Config(format!("vocabulary entry {t:?} is not a single character"))),
            }
        }
        let vocab = Self::from_chars(chars);
        if vocab.ids.len() != vocab.chars.len() {
            return Err(Error::Config("vocabulary contains duplicate characters".into()));
        }
        Ok(vocab)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.tokens()).expect("strings serialize")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let tokens: Vec<String> = serde_json::from_str(json)?;
        Self::from_tokens(&tokens)
    }

    /// Hex SHA-256 of the JSON file form; identifies the vocabulary in
    /// checkpoints and embedding exports.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reserved_ids_are_added() {
        let v = CharVocab::build("aba").unwrap();
        assert_eq!(v.size(), 4);
        assert_eq!(v.id('a'), 2);
        assert_eq!(v.id('b'), 3);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(CharVocab::build("").is_err());
    }

    #[test]
    fn ninety_seven_chars_give_ninety_nine_ids() {
        let corpus: String = (0..97u32).map(|i| char::from_u32(0x21 + i).unwrap()).collect();
        let v = CharVocab::build(&corpus).unwrap();
        assert_eq!(v.size(), 99);
        assert_eq!(v.char_count(), 97);
    }

    #[test]
    fn encode_pads_truncates_and_maps_unknowns() {
        let v = CharVocab::build("abcd").unwrap();
        assert_eq!(v.encode("abc", 5), vec![2, 3, 4, 0, 0]);
        assert_eq!(v.encode("abcd", 2), vec![2, 3]);
        assert_eq!(v.encode("aζ", 2), vec![2, 1]);
        assert_eq!(v.encode_with("abcd", 2, Truncation::Tail), vec![4, 5]);
    }

    #[test]
    fn decode_drops_padding() {
        let v = CharVocab::build("ab").unwrap();
        assert_eq!(v.decode(&[2, 3, 0, 0]).unwrap(), "ab");
        assert_eq!(v.decode(&[]).unwrap(), "");
        assert!(matches!(v.decode(&[99]), Err(Error::OutOfRange { index: 99, .. })));
    }

    #[test]
    fn json_round_trip() {
        let v = CharVocab::build("I: OK\n\"é").unwrap();
        let back = CharVocab::from_json(&v.to_json()).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.hash(), back.hash());
        assert_eq!(back.tokens()[0], "<pad>");
    }

    proptest! {
        #[test]
        fn round_trip_over_vocab_alphabet(
            idx in proptest::collection::vec(0usize..6, 0..40),
            slack in 0usize..5,
        ) {
            let alphabet = ['a', 'Z', ' ', '\n', ':', 'é'];
            let v = CharVocab::build(&alphabet.iter().collect::<String>()).unwrap();
            let text: String = idx.iter().map(|&i| alphabet[i]).collect();
            let ids = v.encode(&text, idx.len() + slack);
            prop_assert_eq!(ids.len(), idx.len() + slack);
            prop_assert_eq!(v.decode(&ids).unwrap(), text);
        }

        #[test]
        fn encode_length_is_max_len(text in ".{0,50}", max_len in 1usize..64) {
            let v = CharVocab::build("abc").unwrap();
            prop_assert_eq!(v.encode(&text, max_len).len(), max_len);
        }
    }
}
