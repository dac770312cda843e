use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const SEP: TokenId = 3;
pub const EOS: TokenId = 4;

/// Surface forms of the special tokens, in id order.
pub const SPECIAL_TOKENS: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<sep>", "<eos>"];

/// Token ↔ id mapping with five fixed special ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, TokenId>,
    tokens: Vec<String>,
    min_freq: usize,
}

impl Vocabulary {
    fn specials_only(min_freq: usize) -> Self {
        let tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocabulary {
            ids,
            tokens,
            min_freq,
        }
    }

    /// Every token seen at least `min_freq` times, ordered by descending
    /// frequency and then lexicographically.
    pub fn build<'a, I, D>(docs: I, min_freq: usize) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        if min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for tok in doc {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq && !SPECIAL_TOKENS.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Self::specials_only(min_freq);
        for (tok, _) in kept {
            vocab.push(tok.to_string());
        }
        Ok(vocab)
    }

    fn push(&mut self, tok: String) {
        let id = self.tokens.len() as TokenId;
        self.ids.insert(tok.clone(), id);
        self.tokens.push(tok);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    /// Id of `token`, or [`UNK`] when absent.
    pub fn id(&self, token: &str) -> TokenId {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::IdOutOfRange(id, self.tokens.len()))
    }

    pub fn is_special(id: TokenId) -> bool {
        (id as usize) < SPECIAL_TOKENS.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line; line number is the id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < SPECIAL_TOKENS.len() || lines[..5] != SPECIAL_TOKENS {
            return Err(Error::Input(
                "vocabulary file must start with the five special tokens".into(),
            ));
        }
        let mut vocab = Self::specials_only(1);
        for (n, line) in lines.iter().enumerate().skip(SPECIAL_TOKENS.len()) {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::Input(format!("vocabulary line {}: bad token", n + 1)));
            }
            if vocab.ids.contains_key(*line) {
                return Err(Error::Input(format!(
                    "vocabulary line {}: duplicate token `{line}`",
                    n + 1
                )));
            }
            vocab.push(line.to_string());
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// SHA-256 of the persisted text form.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn vocab_of(texts: &[&str], min_freq: usize) -> Vocabulary {
        let sents: Vec<Sentence> = texts.iter().map(|t| Sentence::new(*t)).collect();
        Vocabulary::build(sents.iter().map(|s| s.tokens()), min_freq).unwrap()
    }

    #[test]
    fn min_freq_filters() {
        let v = vocab_of(&["a b", "a c"], 2);
        assert_eq!(&v.tokens()[5..], ["a"]);
        let v = vocab_of(&["a"], 1);
        assert_eq!(&v.tokens()[5..], ["a"]);
        let v = vocab_of(&[], 1);
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let v = vocab_of(&["c b a", "c b", "c d"], 1);
        assert_eq!(&v.tokens()[5..], ["c", "b", "a", "d"]);
    }

    #[test]
    fn unknown_maps_to_unk() {
        let v = vocab_of(&["a"], 1);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.id("<sep>"), SEP);
    }

    #[test]
    fn text_round_trip_and_bijection() {
        let v = vocab_of(&["the cat sat", "the dog sat down"], 1);
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back.tokens(), v.tokens());
        assert_eq!(back.hash(), v.hash());
        for i in 0..v.len() as TokenId {
            assert_eq!(v.id(v.token(i).unwrap()), i);
        }
        assert!(matches!(v.token(999), Err(Error::IdOutOfRange(999, _))));
    }

    #[test]
    fn rejects_zero_min_freq_and_bad_files() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(Vocabulary::build(empty.iter(), 0).is_err());
        assert!(Vocabulary::from_text("a\nb\n").is_err());
    }
}
