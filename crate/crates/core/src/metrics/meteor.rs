use serde::{Deserialize, Serialize};

use super::stem::stem;
use crate::corruption::SynonymLexicon;

/// `Fmean = PR / (αP + (1 − α)R)`, `Penalty = γ (chunks / m)^β`,
/// `score = Fmean (1 − Penalty)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub use_stems: bool,
    pub use_synonyms: bool,
}

impl Default for MeteorParams {
    fn default() -> Self {
        MeteorParams {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
            use_stems: true,
            use_synonyms: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStage {
    Exact,
    Stem,
    Synonym,
}

/// One-to-one unigram alignment, pairs sorted by candidate position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize, MatchStage)>,
    pub chunks: usize,
}

/// Staged alignment: each stage scans candidate tokens left to right and
/// links each still-unmatched one to the leftmost still-unmatched reference
/// token it matches under that stage.
pub fn align<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    lexicon: &SynonymLexicon,
    params: &MeteorParams,
) -> Alignment {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let cand_stems: Vec<String> = candidate.iter().map(|t| stem(t.as_ref())).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t.as_ref())).collect();

    let mut stages = vec![MatchStage::Exact];
    if params.use_stems {
        stages.push(MatchStage::Stem);
    }
    if params.use_synonyms {
        stages.push(MatchStage::Synonym);
    }
    for stage in stages {
        for i in 0..candidate.len() {
            if cand_used[i] {
                continue;
            }
            let c = candidate[i].as_ref();
            let hit = (0..reference.len()).find(|&j| {
                !ref_used[j]
                    && match stage {
                        MatchStage::Exact => c == reference[j].as_ref(),
                        MatchStage::Stem => cand_stems[i] == ref_stems[j],
                        MatchStage::Synonym => lexicon.are_synonyms(c, reference[j].as_ref()),
                    }
            });
            if let Some(j) = hit {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j, stage));
            }
        }
    }
    pairs.sort_unstable_by_key(|p| p.0);
    let chunks = if pairs.is_empty() {
        0
    } else {
        1 + pairs
            .windows(2)
            .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
            .count()
    };
    Alignment { pairs, chunks }
}

pub fn meteor<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    lexicon: &SynonymLexicon,
    params: &MeteorParams,
) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let a = align(candidate, reference, lexicon, params);
    let m = a.pairs.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
    let penalty = params.gamma * (a.chunks as f64 / m).powf(params.beta);
    fmean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> SynonymLexicon {
        SynonymLexicon::from_pairs([("cat", &["feline"][..])]).unwrap()
    }

    #[test]
    fn identity_is_not_one() {
        let s = ["a", "quick", "brown", "fox", "jumps"];
        let v = meteor(&s, &s, &lex(), &MeteorParams::default());
        assert!((v - 0.996).abs() < 1e-12);
        for m in 1..8 {
            let s: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
            let v = meteor(&s, &s, &lex(), &MeteorParams::default());
            assert!((v - (1.0 - 0.5 / (m as f64).powi(3))).abs() < 1e-12);
        }
    }

    #[test]
    fn synonym_stage() {
        let c = ["the", "cat"];
        let r = ["the", "feline"];
        let a = align(&c, &r, &lex(), &MeteorParams::default());
        assert_eq!(a.pairs, [(0, 0, MatchStage::Exact), (1, 1, MatchStage::Synonym)]);
        assert_eq!(a.chunks, 1);
        assert!((meteor(&c, &r, &lex(), &MeteorParams::default()) - 0.9375).abs() < 1e-12);
        let no_syn = MeteorParams { use_synonyms: false, ..MeteorParams::default() };
        assert!(meteor(&c, &r, &lex(), &no_syn) < 0.9375);
    }

    #[test]
    fn stem_stage_and_zero() {
        let a = align(&["running", "dogs"], &["dog", "runs"], &lex(), &MeteorParams::default());
        assert_eq!(a.pairs, [(0, 1, MatchStage::Stem), (1, 0, MatchStage::Stem)]);
        assert_eq!(a.chunks, 2);
        assert_eq!(meteor(&["x"], &["y"], &lex(), &MeteorParams::default()), 0.0);
    }

    #[test]
    fn leftmost_first_and_hand_computed_fragmented_score() {
        // candidate "a b a" vs reference "a a c b": exact stage links
        // 0→0, 1→3, 2→1; runs by candidate order: (0,0) | (1,3) | (2,1)
        let c = ["a", "b", "a"];
        let r = ["a", "a", "c", "b"];
        let al = align(&c, &r, &lex(), &MeteorParams::default());
        assert_eq!(al.pairs.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), [(0, 0), (1, 3), (2, 1)]);
        assert_eq!(al.chunks, 3);
        let (p, rc) = (1.0, 0.75);
        let fmean = 10.0 * p * rc / (rc + 9.0 * p);
        let expected = fmean * (1.0 - 0.5 * 1.0f64.powi(3));
        assert!((meteor(&c, &r, &lex(), &MeteorParams::default()) - expected).abs() < 1e-12);
    }
}
