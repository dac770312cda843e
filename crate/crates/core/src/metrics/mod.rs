//! Reference-based evaluation of paraphrase candidates.

mod bleu;
mod evaluate;
mod meteor;
mod rouge;
mod stem;

pub use bleu::{bleu, clipped_precision, self_bleu, NGramCounts};
pub use evaluate::{
    evaluate, load_eval_records, render_table, EvalCandidate, EvalRecord, MetricConfig,
    MetricReport, MetricScores, PairScores, Protocol,
};
pub use meteor::{align, meteor, Alignment, MatchStage, MeteorParams};
pub use rouge::{lcs_length, rouge_l, rouge_l_beta, rouge_n, Prf};
pub use stem::stem;

/// Sum by recursive halving, so the result does not depend on how the terms
/// were produced and rounding error grows only logarithmically.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| pairwise_sum(xs) / xs.len() as f64)
}
