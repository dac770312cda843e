//! Resolved per-subcommand configuration.
//!
//! Each subcommand starts from its defaults, overlays the optional JSON
//! config file (either the whole file or its section named after the
//! subcommand), and finally applies command-line flags. The result is what
//! gets echoed into the run manifest and what `replay` feeds back in.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augment::{ClassifierKind, ClassifierSpec};
use crate::lm::{Precision, SampleConfig, TrainConfig};
use crate::metrics::{MetricConfig, Protocol};
use crate::scoring::EmbedderKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// `pairs` when the first line is a header naming `question1`, else `plain`.
    Auto,
    Pairs,
    Plain,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(CorpusFormat::Auto),
            "pairs" => Ok(CorpusFormat::Pairs),
            "plain" => Ok(CorpusFormat::Plain),
            other => Err(format!("unknown corpus format `{other}` (expected auto, pairs or plain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub corpus: PathBuf,
    pub format: CorpusFormat,
    pub stopwords: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out: PathBuf,
    pub train_frac: f64,
    pub min_freq: usize,
    pub max_len: usize,
    /// Duplicate pairs held out as the paraphrase test set (pair corpora only).
    pub test_pairs: usize,
    pub shuffle_prob: f64,
    pub synonym_prob: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            corpus: PathBuf::new(),
            format: CorpusFormat::Auto,
            stopwords: None,
            lexicon: None,
            out: PathBuf::new(),
            train_frac: 0.9,
            min_freq: 2,
            max_len: 128,
            test_pairs: 0,
            shuffle_prob: 0.2,
            synonym_prob: 0.2,
            seed: 0,
        }
    }
}

/// Model shape; the vocabulary size and maximum length come from the
/// prepared directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ffn: usize,
    pub dropout: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            d_model: 128,
            n_heads: 4,
            n_layers: 4,
            d_ffn: 512,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub prepared: PathBuf,
    pub out: PathBuf,
    /// Per-epoch CSV log; defaults to `<out>.log.csv`.
    pub log: Option<PathBuf>,
    pub precision: Precision,
    pub model: ModelSettings,
    /// `train.seed` is always set to the run seed.
    pub train: TrainConfig,
    pub seed: u64,
}

impl TrainCommandConfig {
    pub fn log_path(&self) -> PathBuf {
        self.log.clone().unwrap_or_else(|| suffixed(&self.out, ".log.csv"))
    }
}

/// How candidates are produced and filtered; shared by `generate` and
/// `augment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParaphraseSettings {
    pub checkpoint: Option<PathBuf>,
    /// Prepared directory supplying the vocabulary, IDF table, stop words
    /// and lexicon that belong with `checkpoint`.
    pub prepared: Option<PathBuf>,
    /// External generation backend command line; replaces the checkpoint
    /// as the generator.
    pub backend: Option<String>,
    pub embedder: EmbedderKind,
    pub embed_backend: Option<String>,
    pub embed_dim: Option<usize>,
    pub deadline_ms: u64,
    /// Override the stop words and lexicon from `prepared`.
    pub stopwords: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub n: usize,
    pub sample: SampleConfig,
    pub threshold: f64,
    pub strict: bool,
    pub inference_shuffle_prob: f64,
    pub inference_synonym_prob: f64,
}

impl Default for ParaphraseSettings {
    fn default() -> Self {
        ParaphraseSettings {
            checkpoint: None,
            prepared: None,
            backend: None,
            embedder: EmbedderKind::LmMeanIdf,
            embed_backend: None,
            embed_dim: None,
            deadline_ms: crate::lm::backend::DEFAULT_DEADLINE.as_millis() as u64,
            stopwords: None,
            lexicon: None,
            n: 10,
            sample: SampleConfig::default(),
            threshold: 0.75,
            strict: false,
            inference_shuffle_prob: 0.0,
            inference_synonym_prob: 0.0,
        }
    }
}

impl ParaphraseSettings {
    pub fn inputs(&self) -> Vec<PathBuf> {
        [&self.checkpoint, &self.prepared, &self.stopwords, &self.lexicon]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// One sentence per line; text after a tab is ignored, so a
    /// `sentence<TAB>reference` file can be used directly.
    pub input: PathBuf,
    pub out: PathBuf,
    pub paraphrase: ParaphraseSettings,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub candidates: PathBuf,
    /// `sentence<TAB>reference` lines joined to candidate sets by sentence.
    /// Without it, `candidates` must hold evaluation records.
    pub references: Option<PathBuf>,
    pub protocol: Protocol,
    pub out: PathBuf,
    pub metrics: MetricConfig,
    /// Synonym table for METEOR; the built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub seed: u64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            candidates: PathBuf::new(),
            references: None,
            protocol: Protocol::BestCandidate,
            out: PathBuf::new(),
            metrics: MetricConfig::default(),
            lexicon: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    pub out: PathBuf,
    /// Optional dump of the augmented training set as `label<TAB>text`.
    pub augmented_out: Option<PathBuf>,
    pub per_doc: usize,
    /// `classifier.forest.seed` is always derived from the run seed.
    pub classifier: ClassifierSpec,
    pub paraphrase: ParaphraseSettings,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            train_data: PathBuf::new(),
            test_data: PathBuf::new(),
            out: PathBuf::new(),
            augmented_out: None,
            per_doc: 1,
            classifier: ClassifierSpec::new(ClassifierKind::Nbsvm),
            paraphrase: ParaphraseSettings::default(),
            seed: 0,
        }
    }
}

/// `path` with `suffix` appended to its file name.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn require(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::Config(format!("missing required `{what}`")));
    }
    Ok(())
}

/// Recursively overlays `patch` onto `base`; objects merge, anything else
/// replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults overlaid with the config file's section for `subcommand` (or the
/// whole file when it has no such key).
pub fn resolve<T>(subcommand: &str, file: Option<&Path>) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut patch: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(section) = patch.get_mut(subcommand) {
            patch = section.take();
        }
        merge(&mut value, patch);
    }
    from_value(value)
}

pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}
