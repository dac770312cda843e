//! Glue between the corruption, language-model and scoring stages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::ParaphraseSource;
use crate::corpus::{decode, detokenize, encode, Sentence, TokenId, TrainingExample, Vocabulary, BOS, SEP};
use crate::corruption::{corrupt_corpus, CorruptedSource, CorruptionConfig, SynonymLexicon};
use crate::lm::{sample_top_k, Model, Real, SampleConfig};
use crate::scoring::{build_candidate_set, select_top_m, CandidateSet, Embedder, FilterStats, Generator, ScoringConfig};
use crate::seed::Rng;
use crate::{Error, Result};

/// Samples reconstructions from a trained model given a keyword skeleton.
pub struct LmGenerator<'a, F: Real = f64> {
    model: &'a Model<F>,
    vocab: &'a Vocabulary,
    sample: SampleConfig,
}

impl<'a, F: Real> LmGenerator<'a, F> {
    pub fn new(model: &'a Model<F>, vocab: &'a Vocabulary, sample: SampleConfig) -> Result<Self> {
        if model.config().vocab_size != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                got: model.config().vocab_size,
            });
        }
        Ok(LmGenerator { model, vocab, sample })
    }

    /// `BOS ⧺ source ⧺ SEP`.
    pub fn prompt(&self, source: &[String]) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(source.len() + 2);
        ids.push(BOS);
        ids.extend(source.iter().map(|t| self.vocab.id(t)));
        ids.push(SEP);
        ids
    }
}

impl<F: Real> Generator for LmGenerator<'_, F> {
    fn generate(&self, _original: &str, source: &[String], n: usize, rng: &mut Rng) -> Result<Vec<String>> {
        let prompt = self.prompt(source);
        (0..n)
            .map(|_| {
                let ids = sample_top_k(self.model, &prompt, &self.sample, rng)?;
                Ok(detokenize(&decode(&ids, self.vocab)?))
            })
            .collect()
    }
}

/// Why a training sentence produced no example.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleStats {
    pub sentences: usize,
    pub examples: usize,
    pub skipped_degenerate: usize,
    pub skipped_too_long: usize,
    pub truncated: usize,
}

/// A corrupted training pair and its encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedExample {
    pub target: String,
    pub source: CorruptedSource,
    pub example: TrainingExample,
}

/// Corrupts and encodes `sentences`. Degenerate sources and sources that do
/// not fit `max_len` are skipped and counted.
pub fn build_examples(
    sentences: &[Sentence],
    vocab: &Vocabulary,
    corruption: &CorruptionConfig,
    lexicon: &SynonymLexicon,
    max_len: usize,
) -> Result<(Vec<PreparedExample>, ExampleStats)> {
    corruption.validate()?;
    let mut stats = ExampleStats {
        sentences: sentences.len(),
        ..ExampleStats::default()
    };
    let mut out = Vec::new();
    for (sentence, source) in sentences.iter().zip(corrupt_corpus(sentences, corruption, lexicon)) {
        let source = match source {
            Ok(s) => s,
            Err(Error::DegenerateSource) => {
                stats.skipped_degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let example = match encode(&source.tokens, sentence.tokens(), vocab, max_len) {
            Ok(ex) => ex,
            Err(Error::SequenceTooLong { .. }) => {
                stats.skipped_too_long += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        stats.truncated += usize::from(example.truncated);
        out.push(PreparedExample {
            target: sentence.raw().to_string(),
            source,
            example,
        });
    }
    stats.examples = out.len();
    Ok((out, stats))
}

/// Everything needed to turn sentences into filtered candidate sets.
pub struct Paraphraser<'a> {
    pub generator: &'a dyn Generator,
    pub embedder: &'a dyn Embedder,
    pub corruption: &'a CorruptionConfig,
    pub lexicon: &'a SynonymLexicon,
    pub scoring: ScoringConfig,
}

impl Paraphraser<'_> {
    /// `Ok(None)` when the sentence has no content words.
    pub fn candidate_set(&self, sentence: &Sentence, index: usize) -> Result<Option<CandidateSet>> {
        match build_candidate_set(
            sentence,
            index,
            self.generator,
            self.embedder,
            self.corruption,
            self.lexicon,
            &self.scoring,
        ) {
            Ok(set) => Ok(Some(set)),
            Err(Error::DegenerateSource) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// One candidate set per sentence, in input order. Degenerate sentences
    /// get an empty set and are counted as skipped. Sentence `i` always draws
    /// from stream `i`, so the result does not depend on the thread count.
    pub fn candidate_sets(&self, sentences: &[Sentence]) -> Result<(Vec<CandidateSet>, FilterStats)> {
        let sets: Vec<Option<CandidateSet>> = sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.candidate_set(s, i))
            .collect::<Result<_>>()?;
        let mut stats = FilterStats::default();
        let mut out = Vec::with_capacity(sets.len());
        for (set, sentence) in sets.into_iter().zip(sentences) {
            match set {
                Some(set) => {
                    stats.add(&set);
                    out.push(set);
                }
                None => {
                    stats.skipped_degenerate += 1;
                    out.push(CandidateSet {
                        original: sentence.clone(),
                        candidates: Vec::new(),
                        threshold: self.scoring.threshold,
                        seed: self.scoring.seed,
                        n_requested: self.scoring.n,
                    });
                }
            }
        }
        Ok((out, stats))
    }
}

impl ParaphraseSource for Paraphraser<'_> {
    fn paraphrases(&self, text: &str, index: usize, max: usize) -> Result<Vec<String>> {
        Ok(match self.candidate_set(&Sentence::new(text), index)? {
            Some(set) => select_top_m(&set, max).into_iter().map(|c| c.text.clone()).collect(),
            None => Vec::new(),
        })
    }
}
