//! Unsupervised paraphrase generation by sentence reconstruction.
//!
//! A sentence is corrupted into a keyword skeleton (stop words removed, words
//! optionally shuffled and swapped for synonyms), a small decoder-only
//! language model learns to reconstruct the original from the skeleton, and at
//! inference time top-k sampling from the skeleton yields paraphrase
//! candidates. Candidates are filtered by near-duplicate detection and
//! embedding cosine similarity, scored with BLEU/ROUGE/METEOR/self-BLEU, and
//! used to augment training data for downstream text classifiers.
//!
//! Module map:
//!
//! - [`corpus`]: tokenization, vocabulary, dataset loading and encoding
//! - [`corruption`]: stop-word removal, shuffling, synonym replacement
//! - [`lm`]: the transformer, its training loop, sampling and checkpoints
//! - [`scoring`]: embedding, cosine filtering and candidate sets
//! - [`metrics`]: reference-based evaluation
//! - [`augment`]: NB-SVM and random-forest augmentation experiments
//! - [`cli`]: the `paraphrase` command-line front end

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod corruption;
mod error;
pub mod lm;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod seed;

pub use error::{Error, Result};
