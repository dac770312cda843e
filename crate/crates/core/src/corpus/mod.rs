//! Text ingestion: tokenization, vocabulary, datasets and example encoding.

mod dataset;
mod encode;
mod tokenize;
mod vocab;

pub use dataset::{
    load_pair_dataset, load_plain_corpus, normalize_whitespace, split_corpus, split_pairs,
    DatasetSplit, PairDataset, PairRecord, TestPair,
};
pub use encode::{decode, decode_example, encode, TrainingExample};
pub use tokenize::{detokenize, tokenize, Sentence};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, PAD, SEP, SPECIAL_TOKENS, UNK};
