//! From raw generations to a valid candidate set.
//!
//! Each raw candidate is checked in generation order:
//!
//! 1. near-duplicate of the original → `rejected_duplicate`
//! 2. same normalized text as an earlier candidate → `rejected_duplicate`
//! 3. cosine to the original below the threshold → `rejected_similarity`
//! 4. otherwise `valid`
//!
//! Normalization lowercases, re-tokenizes (which collapses whitespace and
//! spacing around punctuation) and strips trailing punctuation tokens.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{detokenize, tokenize, Sentence, TokenId, Vocabulary};
use crate::corruption::{inference_source, CorruptionConfig, SynonymLexicon};
use crate::lm::backend::{BackendClient, Endpoint};
use crate::lm::{Model, Real};
use crate::seed::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Raw,
    RejectedDuplicate,
    RejectedSimilarity,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub cosine: Option<f64>,
    pub status: CandidateStatus,
    #[serde(skip)]
    pub rejection_reason: Option<String>,
}

impl Candidate {
    pub fn raw(text: impl Into<String>) -> Self {
        Candidate {
            text: text.into(),
            cosine: None,
            status: CandidateStatus::Raw,
            rejection_reason: None,
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }

    pub fn is_valid(&self) -> bool {
        self.status == CandidateStatus::Valid
    }
}

fn default_n() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub original: Sentence,
    pub candidates: Vec<Candidate>,
    pub threshold: f64,
    pub seed: u64,
    #[serde(skip, default = "default_n")]
    pub n_requested: usize,
}

impl CandidateSet {
    pub fn valid(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.is_valid())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("candidate sets serialize")
    }
}

/// Parameters of the filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub n: usize,
    pub threshold: f64,
    /// Use `cosine > threshold` instead of `>=`.
    pub strict: bool,
    pub seed: u64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            n: 10,
            threshold: 0.75,
            strict: false,
            seed: 0,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [-1, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn passes(&self, cosine: f64) -> bool {
        if self.strict {
            cosine > self.threshold
        } else {
            cosine >= self.threshold
        }
    }
}

/// Produces `n` raw candidate texts for a corrupted source. `original` is
/// the uncorrupted sentence, available to generators that want it as context
/// (the language-model generator ignores it).
pub trait Generator: Sync {
    fn generate(&self, original: &str, source: &[String], n: usize, rng: &mut Rng) -> Result<Vec<String>>;
}

/// Maps a non-empty token list to a fixed-width vector.
pub trait Embedder: Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    LmMeanIdf,
    External,
}

impl std::str::FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lm_mean_idf" | "lm" => Ok(EmbedderKind::LmMeanIdf),
            "external" => Ok(EmbedderKind::External),
            other => Err(format!("unknown embedder `{other}` (expected lm_mean_idf or external)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dimension: usize,
}

/// Smoothed inverse document frequency per vocabulary id:
/// `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    values: Vec<f64>,
}

impl IdfTable {
    pub fn fit<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> Self {
        let mut df = vec![0usize; vocab.len()];
        let mut seen = vec![usize::MAX; vocab.len()];
        for (d, doc) in docs.iter().enumerate() {
            for tok in doc.as_ref() {
                let id = vocab.id(tok) as usize;
                if seen[id] != d {
                    seen[id] = d;
                    df[id] += 1;
                }
            }
        }
        let n = docs.len() as f64;
        let values = df
            .into_iter()
            .map(|df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
        IdfTable { values }
    }

    pub fn uniform(vocab_size: usize) -> Self {
        IdfTable {
            values: vec![1.0; vocab_size],
        }
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.values.get(id as usize).copied().unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One value per line in id order, written with round-trip precision.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|v| format!("{v:?}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let values = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("idf line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IdfTable { values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// IDF-weighted mean of the language model's input-embedding rows.
pub struct LmMeanIdfEmbedder<'a, F: Real = f64> {
    model: &'a Model<F>,
    vocab: &'a Vocabulary,
    idf: &'a IdfTable,
}

impl<'a, F: Real> LmMeanIdfEmbedder<'a, F> {
    pub fn new(model: &'a Model<F>, vocab: &'a Vocabulary, idf: &'a IdfTable) -> Result<Self> {
        if model.config().vocab_size != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                got: model.config().vocab_size,
            });
        }
        Ok(LmMeanIdfEmbedder { model, vocab, idf })
    }

    pub fn spec(&self) -> EmbedderSpec {
        EmbedderSpec {
            kind: EmbedderKind::LmMeanIdf,
            dimension: self.dimension(),
        }
    }
}

impl<F: Real> Embedder for LmMeanIdfEmbedder<'_, F> {
    fn dimension(&self) -> usize {
        self.model.config().d_model
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::Input("cannot embed an empty sentence".into()));
        }
        let mut out = vec![0.0; self.dimension()];
        let mut total = 0.0;
        for tok in tokens {
            let id = self.vocab.id(tok);
            let w = self.idf.get(id);
            for (o, &e) in out.iter_mut().zip(self.model.embedding_row(id)?) {
                *o += w * e.f64();
            }
            total += w;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
        Ok(out)
    }
}

/// Embeddings served by a backend process.
pub struct ExternalEmbedder {
    client: Mutex<BackendClient>,
    dimension: usize,
}

impl ExternalEmbedder {
    pub fn spawn(endpoint: &Endpoint, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        Ok(ExternalEmbedder {
            client: Mutex::new(BackendClient::spawn(endpoint)?),
            dimension,
        })
    }
}

impl Embedder for ExternalEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::Input("cannot embed an empty sentence".into()));
        }
        let v = self
            .client
            .lock()
            .expect("backend lock poisoned")
            .embed(&detokenize(tokens))?;
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        Ok(v)
    }
}

/// Generations served by a backend process.
pub struct ExternalGenerator {
    client: Mutex<BackendClient>,
}

impl ExternalGenerator {
    pub fn spawn(endpoint: &Endpoint) -> Result<Self> {
        Ok(ExternalGenerator {
            client: Mutex::new(BackendClient::spawn(endpoint)?),
        })
    }
}

impl Generator for ExternalGenerator {
    fn generate(&self, original: &str, source: &[String], n: usize, _rng: &mut Rng) -> Result<Vec<String>> {
        self.client
            .lock()
            .expect("backend lock poisoned")
            .generate(&detokenize(source), original, n)
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Character-level Levenshtein distance.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn is_punct_token(t: &str) -> bool {
    t.chars().all(|c| !c.is_alphanumeric())
}

/// Lowercased, whitespace-collapsed, trailing punctuation removed.
pub fn normalize_text(text: &str) -> String {
    let mut toks = tokenize(text);
    while toks.last().is_some_and(|t| is_punct_token(t)) {
        toks.pop();
    }
    detokenize(&toks)
}

/// True when the normalized texts are equal or within
/// `max(2, ceil(0.05 * len(original)))` character edits of each other.
pub fn is_near_duplicate(candidate: &str, original: &str) -> bool {
    let c = normalize_text(candidate);
    let o = normalize_text(original);
    if c == o {
        return true;
    }
    let limit = 2usize.max((0.05 * o.chars().count() as f64).ceil() as usize);
    edit_distance(&c, &o) <= limit
}

/// Classifies raw candidates against the original in generation order.
pub fn filter_candidates(
    original: &Sentence,
    raw: Vec<String>,
    embedder: &dyn Embedder,
    cfg: &ScoringConfig,
) -> Result<CandidateSet> {
    let orig_vec = embedder.embed(original.tokens())?;
    if orig_vec.len() != embedder.dimension() {
        return Err(Error::DimensionMismatch {
            expected: embedder.dimension(),
            got: orig_vec.len(),
        });
    }
    let mut seen: Vec<String> = Vec::new();
    let mut candidates = Vec::with_capacity(raw.len());
    for text in raw {
        let mut cand = Candidate::raw(text);
        let norm = normalize_text(&cand.text);
        let tokens = cand.tokens();
        if is_near_duplicate(&cand.text, original.raw()) {
            cand.status = CandidateStatus::RejectedDuplicate;
            cand.rejection_reason = Some("near-duplicate of the original".into());
        } else if let Some(j) = seen.iter().position(|s| *s == norm) {
            cand.status = CandidateStatus::RejectedDuplicate;
            cand.rejection_reason = Some(format!("repeats candidate {j}"));
        } else if tokens.is_empty() {
            cand.status = CandidateStatus::RejectedSimilarity;
            cand.rejection_reason = Some("empty generation".into());
        } else {
            match cosine(&orig_vec, &embedder.embed(&tokens)?) {
                Ok(c) => {
                    cand.cosine = Some(c);
                    if cfg.passes(c) {
                        cand.status = CandidateStatus::Valid;
                    } else {
                        cand.status = CandidateStatus::RejectedSimilarity;
                        cand.rejection_reason = Some(format!("cosine {c:.4} below threshold"));
                    }
                }
                Err(Error::DegenerateEmbedding) => {
                    cand.status = CandidateStatus::RejectedSimilarity;
                    cand.rejection_reason = Some("degenerate embedding".into());
                }
                Err(e) => return Err(e),
            }
        }
        seen.push(norm);
        candidates.push(cand);
    }
    Ok(CandidateSet {
        original: original.clone(),
        candidates,
        threshold: cfg.threshold,
        seed: cfg.seed,
        n_requested: cfg.n,
    })
}

/// Generates `cfg.n` candidates from the inference source of `sentence` and
/// filters them. Sentence `index` selects an independent generator stream.
pub fn build_candidate_set(
    sentence: &Sentence,
    index: usize,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    corruption: &CorruptionConfig,
    lexicon: &SynonymLexicon,
    cfg: &ScoringConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let source = inference_source(sentence, corruption, lexicon)?;
    let mut rng = seed::component_rng(cfg.seed, "generate", index as u64);
    let mut raw = generator.generate(sentence.raw(), &source.tokens, cfg.n, &mut rng)?;
    raw.truncate(cfg.n);
    filter_candidates(sentence, raw, embedder, cfg)
}

/// Indices of valid candidates ranked by cosine descending, generation order
/// breaking ties.
pub fn rank_valid(set: &CandidateSet) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.candidates.len())
        .filter(|&i| set.candidates[i].is_valid())
        .collect();
    let key = |i: usize| set.candidates[i].cosine.unwrap_or(f64::NEG_INFINITY);
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    idx
}

pub fn select_top_m(set: &CandidateSet, m: usize) -> Vec<&Candidate> {
    rank_valid(set)
        .into_iter()
        .take(m)
        .map(|i| &set.candidates[i])
        .collect()
}

/// Checks the post-hoc invariants of a (possibly deserialized) set: every
/// valid candidate clears the threshold, is not a near-duplicate of the
/// original, and valid texts are pairwise distinct after normalization.
pub fn verify_candidate_set(set: &CandidateSet) -> std::result::Result<(), String> {
    let mut seen = Vec::new();
    for (i, c) in set.candidates.iter().enumerate() {
        if !c.is_valid() {
            continue;
        }
        match c.cosine {
            Some(cos) if cos >= set.threshold => {}
            other => return Err(format!("candidate {i}: cosine {other:?} below threshold")),
        }
        if is_near_duplicate(&c.text, set.original.raw()) {
            return Err(format!("candidate {i} is a near-duplicate of the original"));
        }
        let norm = normalize_text(&c.text);
        if seen.contains(&norm) {
            return Err(format!("candidate {i} repeats an earlier valid candidate"));
        }
        seen.push(norm);
    }
    Ok(())
}

/// Status counts over a batch of sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub sets: usize,
    pub skipped_degenerate: usize,
    pub generated: usize,
    pub rejected_duplicate: usize,
    pub rejected_similarity: usize,
    pub valid: usize,
    pub sets_without_valid: usize,
}

impl FilterStats {
    pub fn add(&mut self, set: &CandidateSet) {
        self.sets += 1;
        self.generated += set.candidates.len();
        let mut valid = 0;
        for c in &set.candidates {
            match c.status {
                CandidateStatus::RejectedDuplicate => self.rejected_duplicate += 1,
                CandidateStatus::RejectedSimilarity => self.rejected_similarity += 1,
                CandidateStatus::Valid => valid += 1,
                CandidateStatus::Raw => {}
            }
        }
        self.valid += valid;
        if valid == 0 {
            self.sets_without_valid += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::StopWords;

    struct Fixed(Vec<&'static str>);

    impl Generator for Fixed {
        fn generate(&self, _: &str, _: &[String], n: usize, _: &mut Rng) -> Result<Vec<String>> {
            Ok(self.0.iter().cycle().take(n).map(|s| s.to_string()).collect())
        }
    }

    struct Echo;

    impl Generator for Echo {
        fn generate(&self, original: &str, _: &[String], n: usize, _: &mut Rng) -> Result<Vec<String>> {
            Ok(vec![original.to_string(); n])
        }
    }

    /// 3-dim toy embedding: counts of tokens in three word classes.
    struct Toy;

    impl Embedder for Toy {
        fn dimension(&self) -> usize {
            3
        }
        fn embed(&self, tokens: &[String]) -> Result<Vec<f64>> {
            let mut v = vec![0.0; 3];
            for t in tokens {
                match t.as_str() {
                    "cook" | "make" | "prepare" => v[0] += 1.0,
                    "rice" | "grain" => v[1] += 1.0,
                    _ => v[2] += 1.0,
                }
            }
            Ok(v)
        }
    }

    fn corruption() -> CorruptionConfig {
        CorruptionConfig::new(StopWords::default_list(), 0)
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.70710678).abs() < 1e-4);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::DegenerateEmbedding)));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    fn dp_oracle(a: &str, b: &str) -> usize {
        // plain full-table recurrence
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            t[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                t[i][j] = (t[i - 1][j] + 1).min(t[i][j - 1] + 1).min(t[i - 1][j - 1] + c);
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn near_duplicate_examples() {
        assert!(is_near_duplicate("how do i cook rice", "how do i cook rice"));
        assert!(is_near_duplicate("how do i cook rice", "How do I cook rice?"));
        let original = "what is the best way to learn a language"; // 40 chars
        assert_eq!(original.chars().count(), 40);
        let cand = "what is the best way to learn a languish";
        assert_eq!(dp_oracle(cand, original), 3);
        assert_eq!(edit_distance(cand, original), 3);
        assert!(!is_near_duplicate(cand, original));
        let close = "what is the best way to learn a languag";
        assert!(dp_oracle(close, original) <= 2);
        assert!(is_near_duplicate(close, original));
    }

    #[test]
    fn edit_distance_matches_table_oracle() {
        let words = ["", "a", "ab", "kitten", "sitting", "flaw", "lawn", "intention", "execution"];
        for a in words {
            for b in words {
                assert_eq!(edit_distance(a, b), dp_oracle(a, b), "{a} / {b}");
            }
        }
    }

    #[test]
    fn echo_generator_yields_only_duplicates() {
        let s = Sentence::new("cook rice");
        let set = build_candidate_set(&s, 0, &Echo, &Toy, &corruption(), &SynonymLexicon::default(), &ScoringConfig::default()).unwrap();
        assert_eq!(set.candidates.len(), 10);
        assert!(set.candidates.iter().all(|c| c.status == CandidateStatus::RejectedDuplicate));
        assert_eq!(set.valid().count(), 0);
    }

    #[test]
    fn threshold_zero_keeps_distinct_survivors() {
        let s = Sentence::new("how do i cook rice ?");
        let g = Fixed(vec!["prepare grain now", "make the rice", "boil water fast", "anything else here"]);
        let cfg = ScoringConfig { n: 4, threshold: 0.0, ..ScoringConfig::default() };
        let set = build_candidate_set(&s, 0, &g, &Toy, &corruption(), &SynonymLexicon::default(), &cfg).unwrap();
        assert!(set.candidates.iter().all(Candidate::is_valid));
    }

    #[test]
    fn statuses_match_hand_computed_cosines() {
        // original [cook, rice, how] → (1, 1, 1)
        let s = Sentence::new("cook rice how");
        let g = Fixed(vec!["prepare grain", "make tasty tasty food", "grain grain grain", "prepare grain"]);
        let cfg = ScoringConfig { n: 4, ..ScoringConfig::default() };
        let set = build_candidate_set(&s, 0, &g, &Toy, &corruption(), &SynonymLexicon::default(), &cfg).unwrap();
        let c = &set.candidates;
        // (1,1,0): 2/(sqrt3 sqrt2) = 0.8165
        assert!((c[0].cosine.unwrap() - 2.0 / (3f64.sqrt() * 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(c[0].status, CandidateStatus::Valid);
        // (1,0,3): 4/(sqrt3 sqrt10) = 0.7303
        assert!((c[1].cosine.unwrap() - 4.0 / (3f64.sqrt() * 10f64.sqrt())).abs() < 1e-12);
        assert_eq!(c[1].status, CandidateStatus::RejectedSimilarity);
        // (0,3,0): 1/sqrt3 = 0.577
        assert_eq!(c[2].status, CandidateStatus::RejectedSimilarity);
        assert_eq!(c[3].status, CandidateStatus::RejectedDuplicate);
        assert_eq!(c[3].cosine, None);
        verify_candidate_set(&set).unwrap();
    }

    #[test]
    fn strict_flag_excludes_the_boundary() {
        let s = Sentence::new("cook how");
        // (1,0,1)·(1,0,0) = 1/sqrt2
        let g = Fixed(vec!["prepare"]);
        let t = 1.0 / 2f64.sqrt();
        let inclusive = ScoringConfig { n: 1, threshold: t, ..ScoringConfig::default() };
        let strict = ScoringConfig { strict: true, ..inclusive.clone() };
        let lex = SynonymLexicon::default();
        let a = build_candidate_set(&s, 0, &g, &Toy, &corruption(), &lex, &inclusive).unwrap();
        let b = build_candidate_set(&s, 0, &g, &Toy, &corruption(), &lex, &strict).unwrap();
        assert_eq!(a.candidates[0].cosine, Some(t));
        assert!(a.candidates[0].is_valid());
        assert!(!b.candidates[0].is_valid());
    }

    fn set_with(cosines: &[f64]) -> CandidateSet {
        CandidateSet {
            original: Sentence::new("x"),
            candidates: cosines
                .iter()
                .enumerate()
                .map(|(i, &c)| Candidate {
                    text: format!("c{i}"),
                    cosine: Some(c),
                    status: CandidateStatus::Valid,
                    rejection_reason: None,
                })
                .collect(),
            threshold: 0.0,
            seed: 0,
            n_requested: 10,
        }
    }

    #[test]
    fn top_m_ordering() {
        let s = set_with(&[0.8, 0.9]);
        assert_eq!(select_top_m(&s, 1)[0].text, "c1");
        let s = set_with(&[0.7, 0.8, 0.8]);
        let top: Vec<&str> = select_top_m(&s, 2).iter().map(|c| c.text.as_str()).collect();
        assert_eq!(top, ["c1", "c2"]);
        assert_eq!(select_top_m(&s, 10).len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let mut s = set_with(&[0.8]);
        s.candidates.push(Candidate { text: "dup".into(), cosine: None, status: CandidateStatus::RejectedDuplicate, rejection_reason: None });
        let line = s.to_json_line();
        assert!(line.contains("\"status\":\"rejected_duplicate\""));
        assert!(line.contains("\"cosine\":null"));
        let back: CandidateSet = serde_json::from_str(&line).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn idf_table_smoothing() {
        let docs: Vec<Vec<String>> = ["a b", "a c", "a b b"].iter().map(|d| tokenize(d)).collect();
        let vocab = Vocabulary::build(docs.iter(), 1).unwrap();
        let idf = IdfTable::fit(&docs, &vocab);
        let f = |df: f64| (4.0 / (1.0 + df)).ln() + 1.0;
        assert!((idf.get(vocab.id("a")) - f(3.0)).abs() < 1e-12);
        assert!((idf.get(vocab.id("b")) - f(2.0)).abs() < 1e-12);
        assert!((idf.get(vocab.id("c")) - f(1.0)).abs() < 1e-12);
        let back = IdfTable::from_text(&idf.to_text()).unwrap();
        assert_eq!(back, idf);
    }

    #[test]
    fn lm_embedder_rows_means_and_order_invariance() {
        use crate::lm::ModelConfig;
        let docs: Vec<Vec<String>> = ["red cat", "blue dog", "red dog"].iter().map(|d| tokenize(d)).collect();
        let vocab = Vocabulary::build(docs.iter(), 1).unwrap();
        let cfg = ModelConfig { vocab_size: vocab.len(), d_model: 4, n_heads: 2, n_layers: 1, d_ffn: 4, max_len: 8, dropout: 0.0 };
        let model = Model::<f64>::new(cfg, 2).unwrap();
        let uniform = IdfTable::uniform(vocab.len());
        let emb = LmMeanIdfEmbedder::new(&model, &vocab, &uniform).unwrap();
        assert_eq!(emb.spec().dimension, 4);

        let cat = model.embedding_row(vocab.id("cat")).unwrap().to_vec();
        assert_eq!(emb.embed(&tokenize("cat")).unwrap(), cat);

        let red = model.embedding_row(vocab.id("red")).unwrap();
        let mean = emb.embed(&tokenize("red cat")).unwrap();
        for k in 0..4 {
            assert!((mean[k] - (red[k] + cat[k]) / 2.0).abs() < 1e-15);
        }
        assert_eq!(emb.embed(&tokenize("cat red")).unwrap(), mean);

        // out-of-vocabulary words use the UNK row
        let unk = model.embedding_row(crate::corpus::UNK).unwrap().to_vec();
        assert_eq!(emb.embed(&tokenize("zebra")).unwrap(), unk);
        assert!(emb.embed(&[]).is_err());
    }
}
