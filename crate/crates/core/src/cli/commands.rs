//! Subcommand bodies. Each takes a fully resolved config and returns a JSON
//! summary that ends up in the manifest's `stats` field.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{
    require, AugmentConfig, CorpusFormat, EvaluateConfig, GenerateConfig, ParaphraseSettings,
    PrepareConfig, TrainCommandConfig,
};
use crate::augment::{load_labeled_tsv, run_experiment, write_labeled_tsv};
use crate::corpus::{
    load_pair_dataset, load_plain_corpus, normalize_whitespace, split_corpus, split_pairs, Sentence,
    TrainingExample, Vocabulary,
};
use crate::corruption::{
    corrupt_corpus, CorruptionConfig, StopWords, SynonymLexicon, DEFAULT_LEXICON, DEFAULT_STOPWORDS,
};
use crate::lm::backend::Endpoint;
use crate::lm::{self, Checkpoint, EpochLog, ModelConfig, Precision};
use crate::metrics::{evaluate as score_records, load_eval_records, render_table, EvalRecord};
use crate::pipeline::{build_examples, ExampleStats, LmGenerator, Paraphraser, PreparedExample};
use crate::scoring::{
    CandidateSet, Embedder, EmbedderKind, ExternalEmbedder, ExternalGenerator, Generator, IdfTable,
    LmMeanIdfEmbedder, ScoringConfig,
};
use crate::{Error, Result};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const VALID_FILE: &str = "valid.jsonl";
pub const IDF_FILE: &str = "idf.txt";
pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const TEST_PAIRS_FILE: &str = "test_pairs.tsv";
pub const STATS_FILE: &str = "stats.json";

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn one_line(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

/// Contents of `stats.json` in a prepared directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedStats {
    pub format: CorpusFormat,
    pub malformed_rows: usize,
    pub vocab_size: usize,
    pub min_freq: usize,
    pub max_len: usize,
    pub train: ExampleStats,
    pub valid: ExampleStats,
    pub test_pairs: usize,
}

fn detect_format(path: &Path) -> Result<CorpusFormat> {
    let text = read_text(path)?;
    let first = text.lines().next().unwrap_or("");
    Ok(if first.split('\t').any(|h| h.trim() == "question1") {
        CorpusFormat::Pairs
    } else {
        CorpusFormat::Plain
    })
}

pub fn prepare(cfg: &PrepareConfig) -> Result<Value> {
    require(&cfg.corpus, "corpus")?;
    require(&cfg.out, "out")?;
    let stop_text = match &cfg.stopwords {
        Some(p) => read_text(p)?,
        None => DEFAULT_STOPWORDS.to_string(),
    };
    let lex_text = match &cfg.lexicon {
        Some(p) => read_text(p)?,
        None => DEFAULT_LEXICON.to_string(),
    };
    let stopwords = StopWords::parse(&stop_text)?;
    let lexicon = SynonymLexicon::parse(&lex_text)?;
    let corruption = CorruptionConfig {
        shuffle_prob: cfg.shuffle_prob,
        synonym_prob: cfg.synonym_prob,
        ..CorruptionConfig::new(stopwords, cfg.seed)
    };
    corruption.validate()?;

    let format = match cfg.format {
        CorpusFormat::Auto => detect_format(&cfg.corpus)?,
        f => f,
    };
    let mut malformed = 0;
    let split = match format {
        CorpusFormat::Pairs => {
            let ds = load_pair_dataset(&cfg.corpus)?;
            malformed = ds.malformed;
            split_pairs(&ds.records, cfg.test_pairs, cfg.train_frac, cfg.seed)?
        }
        _ => {
            if cfg.test_pairs > 0 {
                return Err(Error::Config("test_pairs needs a pair corpus".into()));
            }
            split_corpus(&load_plain_corpus(&cfg.corpus)?, cfg.train_frac, cfg.seed)?
        }
    };

    // the vocabulary covers training targets and their corrupted sources, so
    // synonyms introduced by corruption get their own ids
    let sources = corrupt_corpus(&split.train, &corruption, &lexicon);
    let vocab = Vocabulary::build(
        split
            .train
            .iter()
            .map(|s| s.tokens())
            .chain(sources.iter().filter_map(|r| r.as_ref().ok()).map(|s| s.tokens.as_slice())),
        cfg.min_freq,
    )?;
    let (train, train_stats) = build_examples(&split.train, &vocab, &corruption, &lexicon, cfg.max_len)?;
    let (valid, valid_stats) = build_examples(&split.valid, &vocab, &corruption, &lexicon, cfg.max_len)?;
    if train.is_empty() {
        log::warn!(
            "every training sentence was skipped ({} degenerate, {} too long)",
            train_stats.skipped_degenerate,
            train_stats.skipped_too_long
        );
    }
    let train_tokens: Vec<Vec<String>> = split.train.iter().map(|s| s.tokens().to_vec()).collect();
    let idf = IdfTable::fit(&train_tokens, &vocab);

    let dir = &cfg.out;
    let jsonl = |rows: &[PreparedExample]| -> String {
        rows.iter()
            .map(|r| serde_json::to_string(r).expect("examples serialize") + "\n")
            .collect()
    };
    write_file(&dir.join(VOCAB_FILE), vocab.to_text())?;
    write_file(&dir.join(TRAIN_FILE), jsonl(&train))?;
    write_file(&dir.join(VALID_FILE), jsonl(&valid))?;
    write_file(&dir.join(IDF_FILE), idf.to_text())?;
    write_file(&dir.join(STOPWORDS_FILE), &stop_text)?;
    write_file(&dir.join(LEXICON_FILE), &lex_text)?;
    if format == CorpusFormat::Pairs {
        let body: String = split
            .test_pairs
            .iter()
            .map(|p| format!("{}\t{}\n", one_line(p.sentence.raw()), one_line(p.reference.raw())))
            .collect();
        write_file(&dir.join(TEST_PAIRS_FILE), body)?;
    }
    let stats = PreparedStats {
        format,
        malformed_rows: malformed,
        vocab_size: vocab.len(),
        min_freq: cfg.min_freq,
        max_len: cfg.max_len,
        train: train_stats,
        valid: valid_stats,
        test_pairs: split.test_pairs.len(),
    };
    write_file(&dir.join(STATS_FILE), pretty(&stats))?;
    Ok(serde_json::to_value(&stats).expect("stats serialize"))
}

/// A prepared directory opened for reading.
pub struct Prepared {
    pub dir: PathBuf,
    pub vocab: Vocabulary,
    pub stats: PreparedStats,
}

impl Prepared {
    pub fn open(dir: &Path) -> Result<Self> {
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        let stats_path = dir.join(STATS_FILE);
        let stats: PreparedStats = serde_json::from_str(&read_text(&stats_path)?)
            .map_err(|e| Error::Input(format!("{}: {e}", stats_path.display())))?;
        if stats.vocab_size != vocab.len() {
            return Err(Error::Input(format!(
                "{}: vocabulary has {} entries but stats record {}",
                dir.display(),
                vocab.len(),
                stats.vocab_size
            )));
        }
        Ok(Prepared {
            dir: dir.to_path_buf(),
            vocab,
            stats,
        })
    }

    pub fn examples(&self, file: &str) -> Result<Vec<TrainingExample>> {
        let path = self.dir.join(file);
        read_text(&path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<PreparedExample>(l)
                    .map(|p| p.example)
                    .map_err(|e| Error::Input(format!("{}: line {}: {e}", path.display(), i + 1)))
            })
            .collect()
    }

    pub fn idf(&self) -> Result<IdfTable> {
        let idf = IdfTable::load(&self.dir.join(IDF_FILE))?;
        if idf.len() != self.vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vocab.len(),
                got: idf.len(),
            });
        }
        Ok(idf)
    }
}

pub fn train(cfg: &TrainCommandConfig) -> Result<Value> {
    require(&cfg.prepared, "prepared")?;
    require(&cfg.out, "out")?;
    let prepared = Prepared::open(&cfg.prepared)?;
    let train_set = prepared.examples(TRAIN_FILE)?;
    let valid_set = prepared.examples(VALID_FILE)?;
    let model_cfg = ModelConfig {
        d_model: cfg.model.d_model,
        n_heads: cfg.model.n_heads,
        n_layers: cfg.model.n_layers,
        d_ffn: cfg.model.d_ffn,
        dropout: cfg.model.dropout,
        max_len: prepared.stats.max_len,
        ..ModelConfig::new(prepared.vocab.len())
    };
    let train_cfg = lm::TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let hash = prepared.vocab.hash();
    let outcome = match cfg.precision {
        Precision::F64 => lm::train::<f64>(&train_set, &valid_set, &model_cfg, &train_cfg, hash)?,
        Precision::F32 => lm::train::<f32>(&train_set, &valid_set, &model_cfg, &train_cfg, hash)?,
    };
    outcome.checkpoint.save(&cfg.out)?;
    write_file(&cfg.log_path(), epoch_csv(&outcome.epochs)?)?;
    Ok(json!({
        "train_examples": train_set.len(),
        "valid_examples": valid_set.len(),
        "parameters": outcome.checkpoint.model.num_params(),
        "epochs_run": outcome.epochs.len(),
        "stopped_early": outcome.stopped_early,
        "best_epoch": outcome.checkpoint.epoch,
        "best_valid_perplexity": outcome.checkpoint.valid_perplexity,
    }))
}

pub fn epoch_csv(epochs: &[EpochLog]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in epochs {
        w.serialize(row).map_err(|e| Error::Input(format!("training log: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Input(format!("training log: {e}")))
}

/// Loaded model, tables and backend processes behind a [`Paraphraser`].
struct Resources {
    corruption: CorruptionConfig,
    lexicon: SynonymLexicon,
    lm: Option<(Checkpoint, Vocabulary, IdfTable)>,
    generator: Option<ExternalGenerator>,
    embedder: Option<ExternalEmbedder>,
}

fn load_resources(s: &ParaphraseSettings, seed: u64) -> Result<Resources> {
    let from_prepared = |own: &Option<PathBuf>, file: &str| -> Option<PathBuf> {
        own.clone().or_else(|| s.prepared.as_ref().map(|d| d.join(file)))
    };
    let stopwords = match from_prepared(&s.stopwords, STOPWORDS_FILE) {
        Some(p) => StopWords::load(&p)?,
        None => StopWords::default_list(),
    };
    let lexicon = match from_prepared(&s.lexicon, LEXICON_FILE) {
        Some(p) => SynonymLexicon::load(&p)?,
        None => SynonymLexicon::default_lexicon(),
    };
    let corruption = CorruptionConfig {
        inference_shuffle_prob: s.inference_shuffle_prob,
        inference_synonym_prob: s.inference_synonym_prob,
        ..CorruptionConfig::new(stopwords, seed)
    };
    corruption.validate()?;

    let lm = match &s.checkpoint {
        Some(path) => {
            let dir = s
                .prepared
                .as_ref()
                .ok_or_else(|| Error::Config("a checkpoint needs its prepared directory".into()))?;
            let prepared = Prepared::open(dir)?;
            let idf = prepared.idf()?;
            let ckpt = Checkpoint::load(path, &prepared.vocab)?;
            Some((ckpt, prepared.vocab, idf))
        }
        None => None,
    };
    let endpoint = |cmd: &str| -> Result<Endpoint> {
        Ok(Endpoint::parse(cmd)?.with_deadline(std::time::Duration::from_millis(s.deadline_ms)))
    };
    let generator = match &s.backend {
        Some(cmd) => Some(ExternalGenerator::spawn(&endpoint(cmd)?)?),
        None if lm.is_none() => {
            return Err(Error::Config("generation needs a checkpoint or a backend".into()))
        }
        None => None,
    };
    let embedder = match s.embedder {
        EmbedderKind::External => {
            let cmd = s
                .embed_backend
                .as_deref()
                .ok_or_else(|| Error::Config("the external embedder needs embed_backend".into()))?;
            let dim = s
                .embed_dim
                .ok_or_else(|| Error::Config("the external embedder needs embed_dim".into()))?;
            Some(ExternalEmbedder::spawn(&endpoint(cmd)?, dim)?)
        }
        EmbedderKind::LmMeanIdf if lm.is_none() => {
            return Err(Error::Config(
                "the lm_mean_idf embedder needs a checkpoint and prepared directory".into(),
            ))
        }
        EmbedderKind::LmMeanIdf => None,
    };
    Ok(Resources {
        corruption,
        lexicon,
        lm,
        generator,
        embedder,
    })
}

/// Builds the paraphraser described by `s` and hands it to `f`.
pub fn with_paraphraser<R>(
    s: &ParaphraseSettings,
    seed: u64,
    f: impl FnOnce(&Paraphraser) -> Result<R>,
) -> Result<R> {
    let res = load_resources(s, seed)?;
    let lm_generator;
    let lm_embedder;
    let generator: &dyn Generator = match (&res.generator, &res.lm) {
        (Some(g), _) => g,
        (None, Some((ckpt, vocab, _))) => {
            lm_generator = LmGenerator::new(&ckpt.model, vocab, s.sample.clone())?;
            &lm_generator
        }
        (None, None) => unreachable!("checked in load_resources"),
    };
    let embedder: &dyn Embedder = match (&res.embedder, &res.lm) {
        (Some(e), _) => e,
        (None, Some((ckpt, vocab, idf))) => {
            lm_embedder = LmMeanIdfEmbedder::new(&ckpt.model, vocab, idf)?;
            &lm_embedder
        }
        (None, None) => unreachable!("checked in load_resources"),
    };
    let paraphraser = Paraphraser {
        generator,
        embedder,
        corruption: &res.corruption,
        lexicon: &res.lexicon,
        scoring: ScoringConfig {
            n: s.n,
            threshold: s.threshold,
            strict: s.strict,
            seed,
        },
    };
    f(&paraphraser)
}

/// Non-blank lines, each cut at its first tab.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    Ok(read_text(path)?
        .lines()
        .map(|l| l.split('\t').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(Sentence::new)
        .collect())
}

pub fn generate(cfg: &GenerateConfig) -> Result<Value> {
    require(&cfg.input, "input")?;
    require(&cfg.out, "out")?;
    let sentences = read_sentences(&cfg.input)?;
    if sentences.is_empty() {
        return Err(Error::Input(format!("{}: no input sentences", cfg.input.display())));
    }
    let (sets, stats) = with_paraphraser(&cfg.paraphrase, cfg.seed, |p| p.candidate_sets(&sentences))?;
    let body: String = sets.iter().map(|s| s.to_json_line() + "\n").collect();
    write_file(&cfg.out, body)?;
    if stats.skipped_degenerate > 0 {
        log::warn!("{} input sentences had no content words", stats.skipped_degenerate);
    }
    Ok(serde_json::to_value(&stats).expect("stats serialize"))
}

fn load_candidate_sets(path: &Path) -> Result<Vec<CandidateSet>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Input(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn load_references(path: &Path) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (sentence, reference) = line.split_once('\t').ok_or_else(|| {
            Error::Input(format!("{}: line {}: expected sentence<TAB>reference", path.display(), i + 1))
        })?;
        out.entry(normalize_whitespace(sentence))
            .or_insert_with(|| reference.trim().to_string());
    }
    Ok(out)
}

pub fn evaluate(cfg: &EvaluateConfig) -> Result<Value> {
    require(&cfg.candidates, "candidates")?;
    require(&cfg.out, "out")?;
    let lexicon = match &cfg.lexicon {
        Some(p) => SynonymLexicon::load(p)?,
        None => SynonymLexicon::default_lexicon(),
    };
    let records: Vec<EvalRecord> = match &cfg.references {
        Some(refs) => {
            let refs = load_references(refs)?;
            load_candidate_sets(&cfg.candidates)?
                .iter()
                .map(|set| {
                    let key = normalize_whitespace(set.original.raw());
                    refs.get(&key)
                        .map(|r| EvalRecord::from_candidate_set(set, r.clone()))
                        .ok_or_else(|| Error::Input(format!("no reference for `{key}`")))
                })
                .collect::<Result<_>>()?
        }
        None => load_eval_records(&cfg.candidates)?,
    };
    let report = score_records(&records, cfg.protocol, &cfg.metrics, &lexicon)?;
    write_file(&cfg.out, pretty(&report))?;
    print!("{}", render_table(&report));
    Ok(json!({ "evaluated": report.evaluated, "skipped": report.skipped }))
}

pub fn augment(cfg: &AugmentConfig) -> Result<Value> {
    require(&cfg.train_data, "train_data")?;
    require(&cfg.test_data, "test_data")?;
    require(&cfg.out, "out")?;
    let train = load_labeled_tsv(&cfg.train_data)?;
    let test = load_labeled_tsv(&cfg.test_data)?;
    let seeds = json!({
        "seed": cfg.seed,
        "forest": cfg.classifier.forest.seed,
    });
    let outcome = if cfg.per_doc == 0 {
        let none = |_: &str, _: usize, _: usize| -> Result<Vec<String>> { Ok(Vec::new()) };
        run_experiment(&train, &test, &cfg.classifier, &none, 0, seeds)?
    } else {
        with_paraphraser(&cfg.paraphrase, cfg.seed, |p| {
            run_experiment(&train, &test, &cfg.classifier, p, cfg.per_doc, seeds)
        })?
    };
    write_file(&cfg.out, pretty(&outcome.report))?;
    if let Some(path) = &cfg.augmented_out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_labeled_tsv(path, &outcome.augmented_train)?;
    }
    let r = &outcome.report;
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:+.2}%"));
    println!(
        "{:?}: baseline acc {:.4} f1 {:.4} | enhanced acc {:.4} f1 {:.4} | increment acc {} f1 {}",
        r.classifier,
        r.baseline.acc,
        r.baseline.f1,
        r.enhanced.acc,
        r.enhanced.f1,
        pct(r.increment_pct.acc),
        pct(r.increment_pct.f1)
    );
    Ok(json!({
        "train_docs": train.len(),
        "augmented_docs": outcome.augmented_train.len() - train.len(),
        "test_docs": test.len(),
    }))
}
