//! Corrupted-source construction.
//!
//! A sentence `T` becomes its source `S` by deleting stop words, then (with
//! one Bernoulli draw per example) permuting the survivors, then replacing
//! each surviving token with a random synonym with a per-token probability.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::seed::{self, Rng};
use crate::{Error, Result};

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// The stop-word set `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.chars().any(char::is_whitespace) || line.to_lowercase() != line {
                return Err(Error::Input(format!(
                    "stop-word line {}: `{line}` is not a single lowercase token",
                    n + 1
                )));
            }
            set.insert(line.to_string());
        }
        if set.is_empty() {
            return Err(Error::Config("stop-word set is empty".into()));
        }
        Ok(StopWords(set))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn default_list() -> Self {
        Self::parse(DEFAULT_STOPWORDS).expect("shipped stop-word list is valid")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Result<Self> {
        let set: HashSet<String> = tokens.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::Config("stop-word set is empty".into()));
        }
        Ok(StopWords(set))
    }
}

/// Token → ordered synonym list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon(HashMap<String, Vec<String>>);

impl SynonymLexicon {
    /// `word<TAB>syn1,syn2,...` per line. A word listed as its own synonym is
    /// dropped from its list; an entry left with no synonyms is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: HashMap<String, Vec<String>> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| {
                Error::Input(format!("lexicon line {}: expected word<TAB>synonyms", n + 1))
            })?;
            let word = word.trim();
            let valid = |t: &str| !t.is_empty() && !t.contains(char::is_whitespace);
            if !valid(word) || word.to_lowercase() != word {
                return Err(Error::Input(format!("lexicon line {}: bad word `{word}`", n + 1)));
            }
            let entry = map.entry(word.to_string()).or_default();
            for syn in syns.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !valid(syn) || syn.to_lowercase() != syn {
                    return Err(Error::Input(format!(
                        "lexicon line {}: bad synonym `{syn}`",
                        n + 1
                    )));
                }
                if syn != word && !entry.iter().any(|s| s == syn) {
                    entry.push(syn.to_string());
                }
            }
            if entry.is_empty() {
                return Err(Error::Input(format!(
                    "lexicon line {}: `{word}` has no synonym other than itself",
                    n + 1
                )));
            }
        }
        Ok(SynonymLexicon(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn default_lexicon() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn from_pairs<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a [&'a str])>,
    {
        let text: String = entries
            .into_iter()
            .map(|(w, s)| format!("{w}\t{}\n", s.join(",")))
            .collect();
        Self::parse(&text)
    }

    pub fn synonyms(&self, token: &str) -> Option<&[String]> {
        self.0.get(token).map(Vec::as_slice)
    }

    /// True when either word lists the other.
    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        let lists = |x: &str, y: &str| self.0.get(x).is_some_and(|s| s.iter().any(|t| t == y));
        lists(a, b) || lists(b, a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone)]
pub struct CorruptionConfig {
    pub stopwords: StopWords,
    pub shuffle_prob: f64,
    pub synonym_prob: f64,
    /// Probabilities used by [`inference_source`]; zero keeps the prompt a
    /// deterministic keyword skeleton.
    pub inference_shuffle_prob: f64,
    pub inference_synonym_prob: f64,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn new(stopwords: StopWords, seed: u64) -> Self {
        CorruptionConfig {
            stopwords,
            shuffle_prob: 0.2,
            synonym_prob: 0.2,
            inference_shuffle_prob: 0.0,
            inference_synonym_prob: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("shuffle_prob", self.shuffle_prob)?;
        check_prob("synonym_prob", self.synonym_prob)?;
        check_prob("inference_shuffle_prob", self.inference_shuffle_prob)?;
        check_prob("inference_synonym_prob", self.inference_synonym_prob)?;
        if self.stopwords.is_empty() {
            return Err(Error::Config("stop-word set is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedOps {
    pub stopwords_removed: usize,
    pub shuffled: bool,
    pub synonyms_replaced: usize,
}

/// The corrupted source `S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedSource {
    pub tokens: Vec<String>,
    pub applied_ops: AppliedOps,
}

pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], stopwords: &StopWords) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// With probability `prob` returns a uniform permutation of `tokens`,
/// otherwise an unchanged copy. The flag reports whether the gate fired.
pub fn shuffle_tokens(tokens: &[String], prob: f64, rng: &mut Rng) -> (Vec<String>, bool) {
    let mut out = tokens.to_vec();
    let fire = rng.gen_bool(prob);
    if fire {
        out.shuffle(rng);
    }
    (out, fire)
}

/// Each token independently, with probability `prob`, is replaced by a
/// uniformly chosen synonym when the lexicon has one. Returns the new tokens
/// and the number of replacements.
pub fn replace_synonyms(
    tokens: &[String],
    lexicon: &SynonymLexicon,
    prob: f64,
    rng: &mut Rng,
) -> (Vec<String>, usize) {
    replace_excluding(tokens, lexicon, prob, rng, None)
}

fn replace_excluding(
    tokens: &[String],
    lexicon: &SynonymLexicon,
    prob: f64,
    rng: &mut Rng,
    exclude: Option<&StopWords>,
) -> (Vec<String>, usize) {
    let mut replaced = 0;
    let out = tokens
        .iter()
        .map(|tok| {
            if !rng.gen_bool(prob) {
                return tok.clone();
            }
            let Some(syns) = lexicon.synonyms(tok) else {
                return tok.clone();
            };
            let allowed: Vec<&String> = syns
                .iter()
                .filter(|s| exclude.map_or(true, |sw| !sw.contains(s)))
                .collect();
            match allowed.choose(rng) {
                Some(s) => {
                    replaced += 1;
                    (*s).clone()
                }
                None => tok.clone(),
            }
        })
        .collect();
    (out, replaced)
}

fn corrupt_with(
    sentence: &Sentence,
    stopwords: &StopWords,
    shuffle_prob: f64,
    synonym_prob: f64,
    lexicon: &SynonymLexicon,
    rng: &mut Rng,
) -> Result<CorruptedSource> {
    if sentence.is_empty() {
        return Err(Error::Input("cannot corrupt an empty sentence".into()));
    }
    check_prob("shuffle_prob", shuffle_prob)?;
    check_prob("synonym_prob", synonym_prob)?;
    let kept = remove_stopwords(sentence.tokens(), stopwords);
    if kept.is_empty() {
        return Err(Error::DegenerateSource);
    }
    let stopwords_removed = sentence.tokens().len() - kept.len();
    let (shuffled_tokens, shuffled) = shuffle_tokens(&kept, shuffle_prob, rng);
    // synonyms that are themselves stop words would break `S ∩ A = ∅`
    let (tokens, synonyms_replaced) =
        replace_excluding(&shuffled_tokens, lexicon, synonym_prob, rng, Some(stopwords));
    Ok(CorruptedSource {
        tokens,
        applied_ops: AppliedOps {
            stopwords_removed,
            shuffled,
            synonyms_replaced,
        },
    })
}

/// remove stop words → shuffle → replace synonyms.
pub fn corrupt(
    sentence: &Sentence,
    config: &CorruptionConfig,
    lexicon: &SynonymLexicon,
    rng: &mut Rng,
) -> Result<CorruptedSource> {
    corrupt_with(
        sentence,
        &config.stopwords,
        config.shuffle_prob,
        config.synonym_prob,
        lexicon,
        rng,
    )
}

/// Prompt-side corruption, using the config's inference probabilities and a
/// generator seeded only from the config seed.
pub fn inference_source(
    sentence: &Sentence,
    config: &CorruptionConfig,
    lexicon: &SynonymLexicon,
) -> Result<CorruptedSource> {
    let mut rng = seed::component_rng(config.seed, "inference", 0);
    corrupt_with(
        sentence,
        &config.stopwords,
        config.inference_shuffle_prob,
        config.inference_synonym_prob,
        lexicon,
        &mut rng,
    )
}

/// Corrupts every sentence; record `i` uses a generator seeded with
/// `derive(seed, "corruption", 0) + i`, so output is independent of how the
/// work is scheduled.
pub fn corrupt_corpus(
    sentences: &[Sentence],
    config: &CorruptionConfig,
    lexicon: &SynonymLexicon,
) -> Vec<Result<CorruptedSource>> {
    let base = seed::derive(config.seed, "corruption", 0);
    sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = seed::rng(base.wrapping_add(i as u64));
            corrupt(s, config, lexicon, &mut rng)
        })
        .collect()
}
