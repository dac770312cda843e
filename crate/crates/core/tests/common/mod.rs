//! Fixtures shared by the integration test targets.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use paraphrase::augment::LabeledDoc;
use paraphrase::corpus::Sentence;
use paraphrase::seed;
use rand::seq::SliceRandom;
use rand::Rng;

pub const POSITIVE: [&str; 9] = [
    "good", "great", "wonderful", "amazing", "brilliant", "beautiful", "fantastic", "excellent", "nice",
];
pub const NEGATIVE: [&str; 9] = [
    "bad", "terrible", "awful", "boring", "dull", "ugly", "weak", "horrible", "poor",
];
pub const NOUNS: [&str; 5] = ["movie", "film", "story", "plot", "acting"];

const TEMPLATES: [&str; 6] = [
    "the {n} was {a} and the {m} was {b}",
    "i think this {n} is {a}",
    "what a {a} {n} with a {b} {m}",
    "honestly the {n} felt {a} to me",
    "my friends said the {n} was {a} but the {m} was {c}",
    "overall a {a} {n}",
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn toy_corpus() -> Vec<Sentence> {
    std::fs::read_to_string(fixture("toy50.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Sentence::new)
        .collect()
}

/// Short movie-review sentences whose sentiment words all have synonyms in
/// the shipped lexicon. About 10% of labels are flipped so the task is not
/// trivially separable.
pub fn sentiment_docs(n: usize, seed_value: u64) -> Vec<LabeledDoc> {
    let mut rng = seed::component_rng(seed_value, "sentiment-fixture", 0);
    (0..n)
        .map(|_| {
            let label: u8 = rng.gen_range(0..2);
            let (own, other) = if label == 1 { (&POSITIVE, &NEGATIVE) } else { (&NEGATIVE, &POSITIVE) };
            let text = TEMPLATES
                .choose(&mut rng)
                .unwrap()
                .replace("{n}", NOUNS.choose(&mut rng).unwrap())
                .replace("{m}", NOUNS.choose(&mut rng).unwrap())
                .replace("{a}", own.choose(&mut rng).unwrap())
                .replace("{b}", own.choose(&mut rng).unwrap())
                .replace("{c}", other.choose(&mut rng).unwrap());
            let noisy = if rng.gen_bool(0.1) { 1 - label } else { label };
            LabeledDoc::new(text, noisy)
        })
        .collect()
}

/// `question1<TAB>question2<TAB>is_duplicate` built from the toy corpus:
/// every sentence paired with a light rewording (duplicate) and every
/// fifth with an unrelated sentence (non-duplicate).
pub fn pair_corpus() -> String {
    let sents = toy_corpus();
    let mut out = String::from("question1\tquestion2\tis_duplicate\n");
    for (i, s) in sents.iter().enumerate() {
        let reworded = s
            .raw()
            .replacen("how do i", "what is the way to", 1)
            .replacen("how can i", "what should i do to", 1)
            .replacen("what is", "tell me", 1);
        out.push_str(&format!("{}\t{}\t1\n", s.raw(), reworded));
        if i % 5 == 0 {
            let other = &sents[(i + 7) % sents.len()];
            out.push_str(&format!("{}\t{}\t0\n", s.raw(), other.raw()));
        }
    }
    out
}

pub fn write_labeled(path: &Path, docs: &[LabeledDoc]) {
    paraphrase::augment::write_labeled_tsv(path, docs).unwrap();
}
