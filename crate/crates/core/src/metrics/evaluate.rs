use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bleu, mean, meteor, rouge_l_beta, rouge_n, self_bleu, MeteorParams};
use crate::corpus::{tokenize, Sentence};
use crate::corruption::SynonymLexicon;
use crate::scoring::{select_top_m, Candidate, CandidateSet, CandidateStatus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Per metric, the best valid candidate against the reference.
    BestCandidate,
    /// Mean over the three highest-cosine valid candidates.
    Top3Mean,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best_candidate" | "best" => Ok(Protocol::BestCandidate),
            "top3_mean" | "top3" => Ok(Protocol::Top3Mean),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub bleu_max_n: usize,
    pub rouge_l_beta: f64,
    pub meteor: MeteorParams,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            bleu_max_n: 4,
            rouge_l_beta: 1.0,
            meteor: MeteorParams::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCandidate {
    Text(String),
    Full {
        text: String,
        #[serde(default)]
        cosine: Option<f64>,
        #[serde(default)]
        status: Option<CandidateStatus>,
    },
}

/// A candidate in an evaluation record: either a bare string (taken as valid,
/// in ranked order) or an object with optional `cosine` and `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawCandidate")]
pub struct EvalCandidate {
    pub text: String,
    pub cosine: Option<f64>,
    pub status: Option<CandidateStatus>,
}

impl From<RawCandidate> for EvalCandidate {
    fn from(raw: RawCandidate) -> Self {
        match raw {
            RawCandidate::Text(text) => EvalCandidate {
                text,
                cosine: None,
                status: None,
            },
            RawCandidate::Full { text, cosine, status } => EvalCandidate { text, cosine, status },
        }
    }
}

impl From<&str> for EvalCandidate {
    fn from(text: &str) -> Self {
        EvalCandidate {
            text: text.to_string(),
            cosine: None,
            status: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub source: String,
    pub reference: String,
    pub candidates: Vec<EvalCandidate>,
}

impl EvalRecord {
    /// Pairs a filtered candidate set with its gold reference.
    pub fn from_candidate_set(set: &CandidateSet, reference: impl Into<String>) -> Self {
        EvalRecord {
            source: set.original.raw().to_string(),
            reference: reference.into(),
            candidates: set
                .candidates
                .iter()
                .map(|c| EvalCandidate {
                    text: c.text.clone(),
                    cosine: c.cosine,
                    status: Some(c.status),
                })
                .collect(),
        }
    }

    fn as_candidate_set(&self) -> CandidateSet {
        CandidateSet {
            original: Sentence::new(self.source.clone()),
            candidates: self
                .candidates
                .iter()
                .map(|c| Candidate {
                    text: c.text.clone(),
                    cosine: c.cosine,
                    status: c.status.unwrap_or(CandidateStatus::Valid),
                    rejection_reason: None,
                })
                .collect(),
            threshold: f64::NEG_INFINITY,
            seed: 0,
            n_requested: self.candidates.len(),
        }
    }
}

pub fn load_eval_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Input(format!("{}: line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

/// Scores for one pair, or corpus means. `rouge2` is absent when the
/// reference is shorter than two tokens; `self_bleu` when fewer than two
/// candidates were scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: Option<f64>,
    pub rouge_l: f64,
    pub meteor: f64,
    pub self_bleu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub index: usize,
    pub source: String,
    pub reference: String,
    /// Candidates that entered the protocol.
    pub scored: usize,
    /// `None` for skipped pairs.
    pub scores: Option<MetricScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub protocol: Protocol,
    pub evaluated: usize,
    pub skipped: usize,
    pub aggregates: MetricScores,
    pub rouge2_pairs: usize,
    pub self_bleu_sets: usize,
    pub config: MetricConfig,
    pub pairs: Vec<PairScores>,
}

struct CandScores {
    bleu: f64,
    rouge1: f64,
    rouge2: Option<f64>,
    rouge_l: f64,
    meteor: f64,
}

fn score_candidate(
    cand: &[String],
    reference: &[String],
    cfg: &MetricConfig,
    lexicon: &SynonymLexicon,
) -> CandScores {
    CandScores {
        bleu: bleu(cand, &[reference], cfg.bleu_max_n),
        rouge1: rouge_n(cand, reference, 1).map_or(0.0, |p| p.f),
        rouge2: rouge_n(cand, reference, 2).map(|p| p.f),
        rouge_l: rouge_l_beta(cand, reference, cfg.rouge_l_beta).f,
        meteor: meteor(cand, reference, lexicon, &cfg.meteor),
    }
}

fn evaluate_pair(
    index: usize,
    record: &EvalRecord,
    protocol: Protocol,
    cfg: &MetricConfig,
    lexicon: &SynonymLexicon,
) -> PairScores {
    let set = record.as_candidate_set();
    let chosen: Vec<&Candidate> = match protocol {
        Protocol::BestCandidate => set.valid().collect(),
        Protocol::Top3Mean => select_top_m(&set, 3),
    };
    let reference = tokenize(&record.reference);
    let mut pair = PairScores {
        index,
        source: record.source.clone(),
        reference: record.reference.clone(),
        scored: chosen.len(),
        scores: None,
    };
    if chosen.is_empty() || reference.is_empty() {
        return pair;
    }
    let token_lists: Vec<Vec<String>> = chosen.iter().map(|c| c.tokens()).collect();
    let per: Vec<CandScores> = token_lists
        .iter()
        .map(|c| score_candidate(c, &reference, cfg, lexicon))
        .collect();
    let agg = |f: &dyn Fn(&CandScores) -> f64| -> f64 {
        let xs: Vec<f64> = per.iter().map(f).collect();
        match protocol {
            Protocol::BestCandidate => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Protocol::Top3Mean => mean(&xs).expect("non-empty"),
        }
    };
    let rouge2 = per.iter().all(|p| p.rouge2.is_some()).then(|| agg(&|p| p.rouge2.unwrap()));
    let refs: Vec<&[String]> = token_lists.iter().map(Vec::as_slice).collect();
    pair.scores = Some(MetricScores {
        bleu: agg(&|p| p.bleu),
        rouge1: agg(&|p| p.rouge1),
        rouge2,
        rouge_l: agg(&|p| p.rouge_l),
        meteor: agg(&|p| p.meteor),
        self_bleu: self_bleu(&refs, cfg.bleu_max_n).ok(),
    });
    pair
}

/// Scores every record under `protocol`. Records without valid candidates
/// are counted as skipped and excluded from the means.
pub fn evaluate(
    records: &[EvalRecord],
    protocol: Protocol,
    cfg: &MetricConfig,
    lexicon: &SynonymLexicon,
) -> Result<MetricReport> {
    let pairs: Vec<PairScores> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| evaluate_pair(i, r, protocol, cfg, lexicon))
        .collect();
    let scored: Vec<&MetricScores> = pairs.iter().filter_map(|p| p.scores.as_ref()).collect();
    if scored.is_empty() {
        return Err(Error::NoEvaluablePairs);
    }
    let col = |f: &dyn Fn(&MetricScores) -> Option<f64>| -> Vec<f64> {
        scored.iter().filter_map(|s| f(s)).collect()
    };
    let rouge2 = col(&|s| s.rouge2);
    let self_bleus = col(&|s| s.self_bleu);
    let aggregates = MetricScores {
        bleu: mean(&col(&|s| Some(s.bleu))).expect("non-empty"),
        rouge1: mean(&col(&|s| Some(s.rouge1))).expect("non-empty"),
        rouge2: mean(&rouge2),
        rouge_l: mean(&col(&|s| Some(s.rouge_l))).expect("non-empty"),
        meteor: mean(&col(&|s| Some(s.meteor))).expect("non-empty"),
        self_bleu: mean(&self_bleus),
    };
    Ok(MetricReport {
        protocol,
        evaluated: scored.len(),
        skipped: pairs.len() - scored.len(),
        aggregates,
        rouge2_pairs: rouge2.len(),
        self_bleu_sets: self_bleus.len(),
        config: cfg.clone(),
        pairs,
    })
}

/// Human-readable summary of a report.
pub fn render_table(report: &MetricReport) -> String {
    let proto = match report.protocol {
        Protocol::BestCandidate => "best_candidate",
        Protocol::Top3Mean => "top3_mean",
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "protocol {proto}: {} pairs evaluated, {} skipped",
        report.evaluated, report.skipped
    );
    let a = &report.aggregates;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    for (name, v) in [
        ("BLEU", Some(a.bleu)),
        ("ROUGE-1", Some(a.rouge1)),
        ("ROUGE-2", a.rouge2),
        ("ROUGE-L", Some(a.rouge_l)),
        ("METEOR", Some(a.meteor)),
        ("self-BLEU", a.self_bleu),
    ] {
        let _ = writeln!(out, "{name:<10} {}", fmt(v));
    }
    out
}
