use std::collections::HashMap;
use std::hash::Hash;

use crate::{Error, Result};

/// Multiset of the order-`n` n-grams of a token list.
#[derive(Debug, Clone)]
pub struct NGramCounts<'a, T> {
    pub n: usize,
    pub counts: HashMap<&'a [T], usize>,
}

impl<'a, T: Eq + Hash> NGramCounts<'a, T> {
    pub fn new(tokens: &'a [T], n: usize) -> Self {
        assert!(n >= 1, "n-gram order must be positive");
        let mut counts = HashMap::new();
        if tokens.len() >= n {
            for w in tokens.windows(n) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        NGramCounts { n, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn get(&self, gram: &[T]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

/// `(clipped matches, candidate n-gram total)` for order `n`, where each
/// candidate n-gram count is clipped by its maximum count in any reference.
pub fn clipped_precision<T: Eq + Hash>(candidate: &[T], references: &[&[T]], n: usize) -> (usize, usize) {
    let cand = NGramCounts::new(candidate, n);
    let refs: Vec<NGramCounts<T>> = references.iter().map(|r| NGramCounts::new(r, n)).collect();
    let matched = cand
        .counts
        .iter()
        .map(|(g, &c)| c.min(refs.iter().map(|r| r.get(g)).max().unwrap_or(0)))
        .sum();
    (matched, cand.total())
}

/// Sentence BLEU with orders `1..=max_n`.
///
/// Order `n` contributes `matches / total`; an order `n >= 2` with no matches
/// contributes `1 / (total + 1)` instead, and no unigram matches at all gives
/// 0. The brevity penalty is `min(1, exp(1 - r/c))` with `r` the reference
/// length closest to the candidate length `c` (the shorter on ties).
pub fn bleu<T: Eq + Hash>(candidate: &[T], references: &[&[T]], max_n: usize) -> f64 {
    if candidate.is_empty() || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matched, total) = clipped_precision(candidate, references, n);
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let c = candidate.len() as f64;
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(candidate.len()), len))
        .expect("at least one reference") as f64;
    let bp = (1.0 - r / c).exp().min(1.0);
    bp * (log_sum / max_n as f64).exp()
}

/// Mean over candidates of BLEU against all the other candidates.
pub fn self_bleu<T: Eq + Hash>(candidates: &[&[T]], max_n: usize) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::InsufficientCandidates {
            needed: 2,
            got: candidates.len(),
        });
    }
    let scores: Vec<f64> = (0..candidates.len())
        .map(|i| {
            let others: Vec<&[T]> = candidates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, c)| *c)
                .collect();
            bleu(candidates[i], &others, max_n)
        })
        .collect();
    Ok(super::mean(&scores).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn ngram_totals() {
        let t = toks("a b a b c");
        for n in 1..=6 {
            assert_eq!(NGramCounts::new(&t, n).total(), (t.len() + 1).saturating_sub(n));
        }
        assert_eq!(NGramCounts::new(&t, 2).get(&["a", "b"]), 2);
    }

    #[test]
    fn identity_and_brevity() {
        let c = toks("the cat sat on the mat");
        assert!((bleu(&c, &[&c], 4) - 1.0).abs() < 1e-12);
        let short = toks("the cat sat");
        let r = toks("the cat sat down");
        let b3 = bleu(&short, &[&r], 3);
        assert!((b3 - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
        assert!((b3 - 0.7165).abs() < 1e-4);
    }

    #[test]
    fn zero_unigram_overlap_is_zero() {
        assert_eq!(bleu(&toks("x y z"), &[&toks("a b c")], 4), 0.0);
        assert_eq!(bleu::<&str>(&[], &[&toks("a")], 4), 0.0);
    }

    #[test]
    fn clipping_caps_repeated_unigrams() {
        let c = toks("the the the the");
        let r = toks("the cat");
        assert_eq!(clipped_precision(&c, &[&r], 1), (1, 4));
    }

    #[test]
    fn closest_reference_length() {
        let c = toks("a b c");
        // lengths 6 and 2: 2 is closer, no penalty
        assert!((bleu(&c, &[&toks("a b c d e f"), &toks("a b")], 3) - 1.0).abs() < 1e-12);
        // lengths 4 and 1: 4 is closer, penalty exp(1 - 4/3)
        let b = bleu(&c, &[&toks("a b c d"), &toks("z")], 3);
        assert!((b - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
        // lengths 2 and 4 tie: the shorter wins, no penalty
        assert!((bleu(&c, &[&toks("a b c d"), &toks("q r")], 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_bleu_properties() {
        let a = toks("the cat sat down");
        assert!((self_bleu(&[&a[..], &a, &a], 4).unwrap() - 1.0).abs() < 1e-12);
        let b = toks("dogs run fast");
        assert_eq!(self_bleu(&[&a[..], &b], 4).unwrap(), 0.0);
        assert!(self_bleu(&[&a[..]], 4).is_err());
    }
}
