//! Word-level tokenizer.
//!
//! Rules, applied in order:
//!
//! | step | rule                                                             | example              |
//! |------|------------------------------------------------------------------|----------------------|
//! | 1    | lowercase the whole string (Unicode lowercase mapping)           | `How` → `how`        |
//! | 2    | split on runs of Unicode whitespace                              | `a  b` → `a`, `b`    |
//! | 3    | a maximal run of alphanumeric characters is one token            | `cook` → `cook`      |
//! | 4    | every other character is a token of its own                      | `cook?` → `cook`, `?`|
//!
//! So `"it's fine"` becomes `[it, ', s, fine]`, `"3.5"` becomes `[3, ., 5]`
//! and `"...!"` becomes four tokens. Tokens are never empty and never contain
//! whitespace, and `tokenize(&detokenize(&tokenize(t))) == tokenize(t)`.

use serde::{Deserialize, Serialize};

pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lower.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Joins tokens with single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

/// Raw text together with its tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct Sentence {
    raw: String,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Sentence { raw, tokens }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl From<String> for Sentence {
    fn from(raw: String) -> Self {
        Sentence::new(raw)
    }
}

impl From<&str> for Sentence {
    fn from(raw: &str) -> Self {
        Sentence::new(raw)
    }
}

impl From<Sentence> for String {
    fn from(s: Sentence) -> Self {
        s.raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(toks("How do I cook?"), ["how", "do", "i", "cook", "?"]);
        assert_eq!(toks("it's fine"), ["it", "'", "s", "fine"]);
        assert_eq!(toks("days, mean?"), ["days", ",", "mean", "?"]);
        assert_eq!(toks("3.5  ...!"), ["3", ".", "5", ".", ".", ".", "!"]);
    }

    #[test]
    fn empty_and_blank_inputs() {
        assert!(toks("").is_empty());
        assert!(toks(" \t\n ").is_empty());
    }

    #[test]
    fn sentence_tokens_match_tokenize() {
        let s = Sentence::new("You're following on Quora?");
        assert_eq!(s.tokens(), tokenize(s.raw()).as_slice());
    }

    proptest! {
        #[test]
        fn idempotent_on_joined_output(text in "\\PC{0,40}") {
            let once = tokenize(&text);
            prop_assert_eq!(tokenize(&detokenize(&once)), once.clone());
            for t in &once {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}
