//! The `paraphrase` command-line front end.
//!
//! Every run writes a [`RunManifest`] (on success and on failure) recording
//! the resolved configuration; `paraphrase replay <manifest>` re-executes it.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augment::ClassifierKind;
use crate::lm::Precision;
use crate::metrics::Protocol;
use crate::scoring::EmbedderKind;
use crate::seed::derive;
use crate::{Error, Result};
use config::{
    from_value, resolve, suffixed, AugmentConfig, CorpusFormat, EvaluateConfig, GenerateConfig,
    ParaphraseSettings, PrepareConfig, TrainCommandConfig,
};

const FORMATS: &str = "\
File formats:
  corpus (prepare --corpus)
      pairs: TSV with a header naming question1, question2, is_duplicate (0|1);
             fields may be double-quoted
      plain: one sentence per line
  stop words (--stopwords)   one lowercase token per line, # comments
  lexicon (--lexicon)        word<TAB>syn1,syn2,... per line, # comments
  prepared directory (prepare --out)
      vocab.txt              one token per line, id = line index, specials first
      train.jsonl, valid.jsonl
                             one example per line: {target, source: {tokens,
                             applied_ops}, example: {input_ids, sep_index, ...}}
      idf.txt                one IDF weight per vocabulary id
      stopwords.txt, lexicon.tsv
                             the lists used for corruption
      test_pairs.tsv         sentence<TAB>reference (pair corpora)
      stats.json             counts, including skipped degenerate sources
  checkpoint (train --out)   binary, little-endian, magic PRPHCKPT, SHA-256
                             trailer, bound to vocab.txt by hash
  training log               CSV: epoch,train_loss,valid_perplexity,improved
  sentences (generate --input)
                             one per line; text after a TAB is ignored
  candidate sets (generate --out)
      JSON lines, one per input: {original, candidates: [{text, cosine,
      status}], threshold, seed}; status is raw, rejected_duplicate,
      rejected_similarity or valid
  references (evaluate --references)
                             sentence<TAB>reference per line
  evaluation records (evaluate without --references)
      JSON lines: {source, reference, candidates: [text | {text, cosine,
      status}]}
  metric report (evaluate --out)
      JSON: {protocol, evaluated, skipped, aggregates, ..., pairs}
  labeled data (augment --train/--test)
                             label<TAB>text, label 0|1, optional header
  classifier report (augment --out)
      JSON: {classifier, baseline: {acc, f1}, enhanced, increment_pct, seeds,
      config}
  backend (--backend, --embed-backend)
      a process speaking JSON lines on stdin/stdout:
      {id, source, original, n} -> {id, candidates: [n strings]}
      {id, text} -> {id, embedding: [numbers]}
      {id, error} reports a failure
  config (--config)
      JSON object shaped like a manifest's `config`, either flat or keyed by
      subcommand; flags take precedence
  manifest (--manifest, default <out>.manifest.json or <dir>/manifest.json)
      JSON: {subcommand, tool_version, status, exit_code, error, seed, seeds,
      config, inputs, outputs, jobs, timings, stats}

Exit codes: 0 success, 2 input or configuration error, 3 numeric failure,
4 backend failure.

Seeds: every random stream is derived from --seed as the first 8 bytes of
SHA-256(seed, component name, index).";

#[derive(Debug, Parser)]
#[command(
    name = "paraphrase",
    version,
    about = "Paraphrase generation by reconstructing sentences from keyword skeletons",
    after_help = FORMATS
)]
pub struct Cli {
    /// Root seed for every random stream [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON config file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, corrupt and encode a corpus into a prepared directory
    Prepare(PrepareArgs),
    /// Train the reconstruction model on a prepared directory
    Train(TrainArgs),
    /// Sample and filter paraphrase candidates for input sentences
    Generate(GenerateArgs),
    /// Score candidate sets against references
    Evaluate(EvaluateArgs),
    /// Measure classifier accuracy with and without paraphrase augmentation
    Augment(AugmentArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
    /// Serve the echo backend protocol on stdin/stdout (testing aid)
    #[command(hide = true)]
    EchoBackend,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// auto, pairs or plain
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub min_freq: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub test_pairs: Option<usize>,
    #[arg(long)]
    pub shuffle_prob: Option<f64>,
    #[arg(long)]
    pub synonym_prob: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub prepared: Option<PathBuf>,
    /// Checkpoint path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch CSV log [default: <out>.log.csv]
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// f64 or f32
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub d_ffn: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_frac: Option<f64>,
    /// Global gradient-norm clip; 0 disables clipping
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Score only target-side tokens in the loss
    #[arg(long)]
    pub target_only: bool,
}

#[derive(Debug, Args)]
pub struct ParaphraseArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Prepared directory belonging to the checkpoint
    #[arg(long)]
    pub prepared: Option<PathBuf>,
    /// Generation backend command line
    #[arg(long)]
    pub backend: Option<String>,
    /// lm_mean_idf or external
    #[arg(long)]
    pub embedder: Option<EmbedderKind>,
    /// Embedding backend command line
    #[arg(long)]
    pub embed_backend: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Per-request backend deadline in milliseconds
    #[arg(long)]
    pub deadline_ms: Option<u64>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Candidates generated per sentence
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Top-k sampling width
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_new: Option<usize>,
    /// Minimum cosine similarity for a valid candidate
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Require cosine strictly above the threshold
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub inference_shuffle_prob: Option<f64>,
    #[arg(long)]
    pub inference_synonym_prob: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub paraphrase: ParaphraseArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// best_candidate or top3_mean
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub bleu_max_n: Option<usize>,
    /// Synonym table for METEOR
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "train")]
    pub train_data: Option<PathBuf>,
    #[arg(long = "test")]
    pub test_data: Option<PathBuf>,
    /// nbsvm or tfidf_rf
    #[arg(long)]
    pub classifier: Option<ClassifierKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub augmented_out: Option<PathBuf>,
    /// Paraphrases added per training document (0 disables generation)
    #[arg(long)]
    pub per_doc: Option<usize>,
    /// Longest n-gram feature
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[command(flatten)]
    pub paraphrase: ParaphraseArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest of the run to repeat
    pub source: PathBuf,
}

macro_rules! set {
    ($slot:expr, $flag:expr) => {
        if let Some(v) = $flag.clone() {
            $slot = v;
        }
    };
}

macro_rules! set_some {
    ($slot:expr, $flag:expr) => {
        if let Some(v) = $flag.clone() {
            $slot = Some(v);
        }
    };
}

fn apply_paraphrase(s: &mut ParaphraseSettings, a: &ParaphraseArgs) {
    set_some!(s.checkpoint, a.checkpoint);
    set_some!(s.prepared, a.prepared);
    set_some!(s.backend, a.backend);
    set!(s.embedder, a.embedder);
    set_some!(s.embed_backend, a.embed_backend);
    set_some!(s.embed_dim, a.embed_dim);
    set!(s.deadline_ms, a.deadline_ms);
    set_some!(s.stopwords, a.stopwords);
    set_some!(s.lexicon, a.lexicon);
    set!(s.n, a.n);
    set!(s.sample.k, a.k);
    set!(s.sample.temperature, a.temperature);
    set!(s.sample.max_new, a.max_new);
    set!(s.threshold, a.threshold);
    s.strict |= a.strict;
    set!(s.inference_shuffle_prob, a.inference_shuffle_prob);
    set!(s.inference_synonym_prob, a.inference_synonym_prob);
}

/// A resolved run of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Prepare(PrepareConfig),
    Train(TrainCommandConfig),
    Generate(GenerateConfig),
    Evaluate(EvaluateConfig),
    Augment(AugmentConfig),
}

impl Job {
    /// Resolves defaults, the config file and flags for `command`. `None`
    /// for commands that are not jobs.
    pub fn from_cli(cli: &Cli) -> Result<Option<Job>> {
        let file = cli.config.as_deref();
        let job = match &cli.command {
            Command::Prepare(a) => {
                let mut c: PrepareConfig = resolve("prepare", file)?;
                set!(c.corpus, a.corpus);
                set!(c.format, a.format);
                set_some!(c.stopwords, a.stopwords);
                set_some!(c.lexicon, a.lexicon);
                set!(c.out, a.out);
                set!(c.train_frac, a.train_frac);
                set!(c.min_freq, a.min_freq);
                set!(c.max_len, a.max_len);
                set!(c.test_pairs, a.test_pairs);
                set!(c.shuffle_prob, a.shuffle_prob);
                set!(c.synonym_prob, a.synonym_prob);
                set!(c.seed, cli.seed);
                Job::Prepare(c)
            }
            Command::Train(a) => {
                let mut c: TrainCommandConfig = resolve("train", file)?;
                set!(c.prepared, a.prepared);
                set!(c.out, a.out);
                set_some!(c.log, a.log);
                set!(c.precision, a.precision);
                set!(c.model.d_model, a.d_model);
                set!(c.model.n_heads, a.n_heads);
                set!(c.model.n_layers, a.n_layers);
                set!(c.model.d_ffn, a.d_ffn);
                set!(c.model.dropout, a.dropout);
                set!(c.train.max_epochs, a.epochs);
                set!(c.train.patience, a.patience);
                set!(c.train.learning_rate, a.lr);
                set!(c.train.batch_size, a.batch_size);
                set!(c.train.warmup_frac, a.warmup_frac);
                if let Some(clip) = a.grad_clip {
                    c.train.grad_clip = (clip > 0.0).then_some(clip);
                }
                c.train.target_only_loss |= a.target_only;
                set!(c.seed, cli.seed);
                c.train.seed = c.seed;
                Job::Train(c)
            }
            Command::Generate(a) => {
                let mut c: GenerateConfig = resolve("generate", file)?;
                set!(c.input, a.input);
                set!(c.out, a.out);
                apply_paraphrase(&mut c.paraphrase, &a.paraphrase);
                set!(c.seed, cli.seed);
                Job::Generate(c)
            }
            Command::Evaluate(a) => {
                let mut c: EvaluateConfig = resolve("evaluate", file)?;
                set!(c.candidates, a.candidates);
                set_some!(c.references, a.references);
                set!(c.protocol, a.protocol);
                set!(c.out, a.out);
                set!(c.metrics.bleu_max_n, a.bleu_max_n);
                set_some!(c.lexicon, a.lexicon);
                set!(c.seed, cli.seed);
                Job::Evaluate(c)
            }
            Command::Augment(a) => {
                let mut c: AugmentConfig = resolve("augment", file)?;
                set!(c.train_data, a.train_data);
                set!(c.test_data, a.test_data);
                set!(c.classifier.kind, a.classifier);
                set!(c.out, a.out);
                set_some!(c.augmented_out, a.augmented_out);
                set!(c.per_doc, a.per_doc);
                set!(c.classifier.max_n, a.max_n);
                set!(c.classifier.forest.n_trees, a.n_trees);
                apply_paraphrase(&mut c.paraphrase, &a.paraphrase);
                set!(c.seed, cli.seed);
                c.classifier.forest.seed = derive(c.seed, "forest", 0);
                Job::Augment(c)
            }
            Command::Replay(_) | Command::EchoBackend => return Ok(None),
        };
        Ok(Some(job))
    }

    /// Rebuilds the job recorded in a manifest.
    pub fn from_manifest(m: &RunManifest) -> Result<Job> {
        let c = m.config.clone();
        Ok(match m.subcommand.as_str() {
            "prepare" => Job::Prepare(from_value(c)?),
            "train" => Job::Train(from_value(c)?),
            "generate" => Job::Generate(from_value(c)?),
            "evaluate" => Job::Evaluate(from_value(c)?),
            "augment" => Job::Augment(from_value(c)?),
            other => return Err(Error::Config(format!("manifest names unknown subcommand `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Job::Prepare(_) => "prepare",
            Job::Train(_) => "train",
            Job::Generate(_) => "generate",
            Job::Evaluate(_) => "evaluate",
            Job::Augment(_) => "augment",
        }
    }

    pub fn config_value(&self) -> Value {
        let v = match self {
            Job::Prepare(c) => serde_json::to_value(c),
            Job::Train(c) => serde_json::to_value(c),
            Job::Generate(c) => serde_json::to_value(c),
            Job::Evaluate(c) => serde_json::to_value(c),
            Job::Augment(c) => serde_json::to_value(c),
        };
        v.expect("configs serialize")
    }

    pub fn seed(&self) -> u64 {
        match self {
            Job::Prepare(c) => c.seed,
            Job::Train(c) => c.seed,
            Job::Generate(c) => c.seed,
            Job::Evaluate(c) => c.seed,
            Job::Augment(c) => c.seed,
        }
    }

    /// Derived seeds (index 0) of the components this job draws from.
    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let components: &[&str] = match self {
            Job::Prepare(_) => &["split", "test-pairs", "corruption"],
            Job::Train(_) => &["init", "shuffle", "dropout"],
            Job::Generate(_) => &["inference", "generate"],
            Job::Evaluate(_) => &[],
            Job::Augment(_) => &["inference", "generate", "forest"],
        };
        components
            .iter()
            .map(|c| (c.to_string(), derive(self.seed(), c, 0)))
            .collect()
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        let mut v = match self {
            Job::Prepare(c) => {
                let mut v = vec![c.corpus.clone()];
                v.extend(c.stopwords.iter().chain(&c.lexicon).cloned());
                v
            }
            Job::Train(c) => vec![c.prepared.clone()],
            Job::Generate(c) => {
                let mut v = vec![c.input.clone()];
                v.extend(c.paraphrase.inputs());
                v
            }
            Job::Evaluate(c) => {
                let mut v = vec![c.candidates.clone()];
                v.extend(c.references.iter().chain(&c.lexicon).cloned());
                v
            }
            Job::Augment(c) => {
                let mut v = vec![c.train_data.clone(), c.test_data.clone()];
                v.extend(c.paraphrase.inputs());
                v
            }
        };
        v.retain(|p| !p.as_os_str().is_empty());
        v
    }

    pub fn outputs(&self) -> Vec<PathBuf> {
        match self {
            Job::Prepare(c) => vec![c.out.clone()],
            Job::Train(c) => vec![c.out.clone(), c.log_path()],
            Job::Generate(c) => vec![c.out.clone()],
            Job::Evaluate(c) => vec![c.out.clone()],
            Job::Augment(c) => std::iter::once(c.out.clone()).chain(c.augmented_out.clone()).collect(),
        }
    }

    pub fn default_manifest(&self) -> PathBuf {
        match self {
            Job::Prepare(c) => c.out.join("manifest.json"),
            Job::Train(c) => suffixed(&c.out, ".manifest.json"),
            Job::Generate(c) => suffixed(&c.out, ".manifest.json"),
            Job::Evaluate(c) => suffixed(&c.out, ".manifest.json"),
            Job::Augment(c) => suffixed(&c.out, ".manifest.json"),
        }
    }

    pub fn execute(&self) -> Result<Value> {
        match self {
            Job::Prepare(c) => commands::prepare(c),
            Job::Train(c) => commands::train(c),
            Job::Generate(c) => commands::generate(c),
            Job::Evaluate(c) => commands::evaluate(c),
            Job::Augment(c) => commands::augment(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix_ms: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub jobs: Option<usize>,
    pub timings: Timings,
    pub stats: Value,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifests serialize");
        text.push('\n');
        commands::write_file(path, text)
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Runs `job`, then writes its manifest to `manifest` (or the job's default
/// location). Returns the exit code.
pub fn run_job(job: &Job, manifest: Option<&Path>, jobs: Option<usize>) -> i32 {
    let started_unix_ms = unix_ms();
    let clock = Instant::now();
    log::info!("{}: starting", job.name());
    let result = job.execute();
    let (exit_code, error, stats) = match result {
        Ok(stats) => (0, None, stats),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()), Value::Null)
        }
    };
    let m = RunManifest {
        subcommand: job.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: if exit_code == 0 { "ok" } else { "failed" }.to_string(),
        exit_code,
        error,
        seed: job.seed(),
        seeds: job.seeds(),
        config: job.config_value(),
        inputs: job.inputs(),
        outputs: job.outputs(),
        jobs,
        timings: Timings {
            started_unix_ms,
            wall_ms: clock.elapsed().as_millis() as u64,
        },
        stats,
    };
    let path = manifest.map_or_else(|| job.default_manifest(), Path::to_path_buf);
    if let Err(e) = m.save(&path) {
        eprintln!("error: could not write manifest: {e}");
        if exit_code == 0 {
            return e.exit_code();
        }
    }
    exit_code
}

/// Manifest for a run whose configuration could not be resolved.
fn write_unresolved(cli: &Cli, err: &Error) {
    let Some(path) = &cli.manifest else { return };
    let name = match &cli.command {
        Command::Prepare(_) => "prepare",
        Command::Train(_) => "train",
        Command::Generate(_) => "generate",
        Command::Evaluate(_) => "evaluate",
        Command::Augment(_) => "augment",
        Command::Replay(_) => "replay",
        Command::EchoBackend => return,
    };
    let seed = cli.seed.unwrap_or(0);
    let m = RunManifest {
        subcommand: name.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: "failed".to_string(),
        exit_code: err.exit_code(),
        error: Some(err.to_string()),
        seed,
        seeds: BTreeMap::new(),
        config: Value::Null,
        inputs: Vec::new(),
        outputs: Vec::new(),
        jobs: cli.jobs,
        timings: Timings {
            started_unix_ms: unix_ms(),
            wall_ms: 0,
        },
        stats: Value::Null,
    };
    if let Err(e) = m.save(path) {
        eprintln!("error: could not write manifest: {e}");
    }
}

pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 2;
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let job = match &cli.command {
        Command::EchoBackend => {
            let stdin = std::io::stdin();
            return match crate::lm::backend::serve_echo(stdin.lock(), std::io::stdout().lock()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    4
                }
            };
        }
        Command::Replay(r) => RunManifest::load(&r.source).and_then(|m| Job::from_manifest(&m)),
        _ => Job::from_cli(&cli).map(|j| j.expect("job subcommand")),
    };
    match job {
        Ok(job) => run_job(&job, cli.manifest.as_deref(), cli.jobs),
        Err(e) => {
            eprintln!("error: {e}");
            write_unresolved(&cli, &e);
            e.exit_code()
        }
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    run(cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("paraphrase").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"generate": {"paraphrase": {"n": 4, "threshold": 0.5}, "seed": 9}}"#).unwrap();
        let cli = parse(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--threshold",
            "0.8",
            "--input",
            "in.txt",
            "--out",
            "o.jsonl",
        ]);
        let Some(Job::Generate(c)) = Job::from_cli(&cli).unwrap() else { panic!() };
        assert_eq!((c.paraphrase.n, c.paraphrase.threshold, c.seed), (4, 0.8, 9));
        let cli = parse(&["--seed", "3", "generate", "--config", cfg.to_str().unwrap()]);
        let Some(Job::Generate(c)) = Job::from_cli(&cli).unwrap() else { panic!() };
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn manifest_config_rebuilds_the_job() {
        let cli = parse(&["--seed", "5", "augment", "--train", "a.tsv", "--test", "b.tsv", "--out", "r.json", "--classifier", "tfidf_rf"]);
        let job = Job::from_cli(&cli).unwrap().unwrap();
        let Job::Augment(c) = &job else { panic!() };
        assert_eq!(c.classifier.kind, ClassifierKind::TfidfRf);
        assert_eq!(c.classifier.forest.seed, derive(5, "forest", 0));
        let m = RunManifest {
            subcommand: job.name().into(),
            tool_version: String::new(),
            status: "ok".into(),
            exit_code: 0,
            error: None,
            seed: job.seed(),
            seeds: job.seeds(),
            config: job.config_value(),
            inputs: job.inputs(),
            outputs: job.outputs(),
            jobs: None,
            timings: Timings {
                started_unix_ms: 0,
                wall_ms: 0,
            },
            stats: Value::Null,
        };
        assert_eq!(Job::from_manifest(&m).unwrap(), job);
        assert_eq!(job.default_manifest(), PathBuf::from("r.json.manifest.json"));
    }

    #[test]
    fn help_lists_formats() {
        let help = <Cli as clap::CommandFactory>::command().render_help().to_string();
        for needle in ["vocab.txt", "candidate sets", "label<TAB>text", "Exit codes", "backend"] {
            assert!(help.contains(needle), "{needle}");
        }
    }
}
