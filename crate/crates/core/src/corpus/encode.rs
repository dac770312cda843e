use serde::{Deserialize, Serialize};

use super::vocab::{TokenId, Vocabulary, BOS, EOS, SEP};
use crate::{Error, Result};

/// `BOS ⧺ source ⧺ SEP ⧺ target ⧺ EOS` as ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input_ids: Vec<TokenId>,
    pub sep_index: usize,
    pub source_len: usize,
    pub target_len: usize,
    /// Set when the target side was cut to fit `max_len`.
    #[serde(default)]
    pub truncated: bool,
}

impl TrainingExample {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    pub fn source_ids(&self) -> &[TokenId] {
        &self.input_ids[1..self.sep_index]
    }

    pub fn target_ids(&self) -> &[TokenId] {
        &self.input_ids[self.sep_index + 1..self.input_ids.len() - 1]
    }

    /// Prompt used at inference time: everything up to and including SEP.
    pub fn prompt(&self) -> &[TokenId] {
        &self.input_ids[..=self.sep_index]
    }
}

pub fn encode<S: AsRef<str>, T: AsRef<str>>(
    source: &[S],
    target: &[T],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TrainingExample> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Input("encode needs non-empty source and target".into()));
    }
    // BOS + SEP + at least one target token + EOS
    if source.len() + 4 > max_len {
        return Err(Error::SequenceTooLong {
            len: source.len() + 4,
            max: max_len,
        });
    }
    let room = max_len - source.len() - 3;
    let target_len = target.len().min(room);

    let mut input_ids = Vec::with_capacity(source.len() + target_len + 3);
    input_ids.push(BOS);
    input_ids.extend(source.iter().map(|t| vocab.id(t.as_ref())));
    let sep_index = input_ids.len();
    input_ids.push(SEP);
    input_ids.extend(target[..target_len].iter().map(|t| vocab.id(t.as_ref())));
    input_ids.push(EOS);

    Ok(TrainingExample {
        input_ids,
        sep_index,
        source_len: source.len(),
        target_len,
        truncated: target_len < target.len(),
    })
}

/// Maps ids back to tokens, dropping every special id.
pub fn decode(ids: &[TokenId], vocab: &Vocabulary) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let tok = vocab.token(id)?;
        if !Vocabulary::is_special(id) {
            out.push(tok.to_string());
        }
    }
    Ok(out)
}

/// Source and target token lists of an encoded example.
pub fn decode_example(
    example: &TrainingExample,
    vocab: &Vocabulary,
) -> Result<(Vec<String>, Vec<String>)> {
    Ok((
        decode(example.source_ids(), vocab)?,
        decode(example.target_ids(), vocab)?,
    ))
}
