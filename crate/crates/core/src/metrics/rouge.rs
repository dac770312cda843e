use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::bleu::NGramCounts;

/// Precision, recall and F-measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl Prf {
    /// `F_β = (1 + β²)PR / (R + β²P)`, 0 when both are 0.
    pub fn new(precision: f64, recall: f64, beta: f64) -> Self {
        let b2 = beta * beta;
        let denom = recall + b2 * precision;
        let f = if denom > 0.0 {
            (1.0 + b2) * precision * recall / denom
        } else {
            0.0
        };
        Prf { precision, recall, f }
    }
}

/// Length of the longest common subsequence (single-row dynamic programme
/// over the shorter input; short inputs stay on the stack).
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let n = short.len();
    let mut stack = [0usize; 64];
    let mut heap = Vec::new();
    let row: &mut [usize] = if n < stack.len() {
        &mut stack[..=n]
    } else {
        heap.resize(n + 1, 0);
        &mut heap
    };
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[n]
}

/// ROUGE-L with balanced F.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Prf {
    rouge_l_beta(candidate, reference, 1.0)
}

/// ROUGE-L with `F_β`; `P = LCS/len(candidate)`, `R = LCS/len(reference)`.
pub fn rouge_l_beta<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> Prf {
    if candidate.is_empty() || reference.is_empty() {
        return Prf::default();
    }
    let l = lcs_length(candidate, reference) as f64;
    Prf::new(l / candidate.len() as f64, l / reference.len() as f64, beta)
}

/// ROUGE-N from clipped n-gram overlap; `None` when the reference has fewer
/// than `n` tokens.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> Option<Prf> {
    if n == 0 || reference.len() < n {
        return None;
    }
    let cand = NGramCounts::new(candidate, n);
    let refc = NGramCounts::new(reference, n);
    let overlap: usize = cand.counts.iter().map(|(g, &c)| c.min(refc.get(g))).sum();
    let ct = cand.total();
    let rt = refc.total();
    let p = if ct == 0 { 0.0 } else { overlap as f64 / ct as f64 };
    let r = overlap as f64 / rt as f64;
    Some(Prf::new(p, r, 1.0))
}
