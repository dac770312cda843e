use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Sentence;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub question1: String,
    pub question2: String,
    pub is_duplicate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PairDataset {
    pub records: Vec<PairRecord>,
    /// Rows skipped because of a wrong field count or a bad label.
    pub malformed: usize,
}

const PAIR_COLUMNS: [&str; 3] = ["question1", "question2", "is_duplicate"];

/// Reads a tab-separated pair file with a header row. Fields may be quoted
/// (`"..."`, with `""` as an escaped quote) and then contain tabs.
pub fn load_pair_dataset(path: &Path) -> Result<PairDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .has_headers(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .clone();
    let mut columns = [0usize; 3];
    for (slot, name) in columns.iter_mut().zip(PAIR_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut out = PairDataset::default();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}:{line}: unreadable row skipped: {e}", path.display());
                out.malformed += 1;
                continue;
            }
        };
        if record.len() != headers.len() {
            log::warn!(
                "{}:{line}: expected {} fields, found {}; row skipped",
                path.display(),
                headers.len(),
                record.len()
            );
            out.malformed += 1;
            continue;
        }
        let is_duplicate = match record[columns[2]].trim() {
            "0" => false,
            "1" => true,
            other => {
                log::warn!("{}:{line}: bad is_duplicate `{other}`; row skipped", path.display());
                out.malformed += 1;
                continue;
            }
        };
        out.records.push(PairRecord {
            question1: record[columns[0]].to_string(),
            question2: record[columns[1]].to_string(),
            is_duplicate,
        });
    }
    Ok(out)
}

/// One sentence per non-blank line.
pub fn load_plain_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(Sentence::new)
        .collect())
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPair {
    pub sentence: Sentence,
    pub reference: Sentence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<Sentence>,
    pub valid: Vec<Sentence>,
    pub test_pairs: Vec<TestPair>,
}

fn dedup(sentences: &[Sentence]) -> Vec<Sentence> {
    let mut seen = HashSet::new();
    sentences
        .iter()
        .filter(|s| seen.insert(normalize_whitespace(s.raw())))
        .cloned()
        .collect()
}

/// Deduplicates by whitespace-normalized raw text, shuffles under `seed` and
/// cuts into train and validation parts.
pub fn split_corpus(sentences: &[Sentence], train_frac: f64, seed: u64) -> Result<DatasetSplit> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut unique = dedup(sentences);
    if unique.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 unique sentences to split, got {}",
            unique.len()
        )));
    }
    unique.shuffle(&mut seed::component_rng(seed, "split", 0));
    let n = unique.len();
    let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);
    let valid = unique.split_off(n_train);
    Ok(DatasetSplit {
        train: unique,
        valid,
        test_pairs: Vec::new(),
    })
}

/// Holds out `n_test` random duplicate pairs as the paraphrase test set and
/// splits the unique `question1` sentences of the remaining records.
pub fn split_pairs(
    records: &[PairRecord],
    n_test: usize,
    train_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut dup_idx: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].is_duplicate && !records[i].question2.trim().is_empty())
        .collect();
    dup_idx.shuffle(&mut seed::component_rng(seed, "test-pairs", 0));
    dup_idx.truncate(n_test);
    let held: HashSet<usize> = dup_idx.iter().copied().collect();

    let sentences: Vec<Sentence> = records
        .iter()
        .enumerate()
        .filter(|(i, _)| !held.contains(i))
        .map(|(_, r)| Sentence::new(r.question1.as_str()))
        .filter(|s| !s.is_empty())
        .collect();
    let mut split = split_corpus(&sentences, train_frac, seed)?;
    split.test_pairs = dup_idx
        .iter()
        .map(|&i| TestPair {
            sentence: Sentence::new(records[i].question1.as_str()),
            reference: Sentence::new(records[i].question2.as_str()),
        })
        .collect();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_well_formed_file() {
        let f = write_tmp(
            "question1\tquestion2\tis_duplicate\n\
             how do i cook?\thow to cook?\t1\n\
             what is rust?\twhat is go?\t0\n\
             why?\twhy not?\t1\n",
        );
        let ds = load_pair_dataset(f.path()).unwrap();
        assert_eq!(ds.records.len(), 3);
        assert_eq!(ds.malformed, 0);
        assert!(ds.records[0].is_duplicate);
        assert_eq!(ds.records[1].question2, "what is go?");
    }

    #[test]
    fn quoted_field_keeps_embedded_tab() {
        let f = write_tmp("question1\tquestion2\tis_duplicate\n\"a\tb\"\t\"say \"\"hi\"\"\"\t1\n");
        let ds = load_pair_dataset(f.path()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].question1, "a\tb");
        assert_eq!(ds.records[0].question2, "say \"hi\"");
    }

    #[test]
    fn short_row_is_skipped_with_warning_count() {
        let f = write_tmp("question1\tquestion2\tis_duplicate\na\tb\n c\td\t0\n");
        let ds = load_pair_dataset(f.path()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.malformed, 1);
    }

    #[test]
    fn missing_column_and_file_are_fatal() {
        let f = write_tmp("question1\tquestion2\n");
        match load_pair_dataset(f.path()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "is_duplicate"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_pair_dataset(Path::new("/nonexistent/pairs.tsv")),
            Err(Error::Io { .. })
        ));
    }

    fn numbered(n: usize) -> Vec<Sentence> {
        (0..n).map(|i| Sentence::new(format!("sentence number {i}"))).collect()
    }

    #[test]
    fn split_is_deterministic_and_sized() {
        let s = numbered(10);
        let a = split_corpus(&s, 0.8, 1).unwrap();
        let b = split_corpus(&s, 0.8, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.valid.len()), (8, 2));
        let train: HashSet<_> = a.train.iter().map(|s| s.raw()).collect();
        assert!(a.valid.iter().all(|s| !train.contains(s.raw())));
    }

    #[test]
    fn split_removes_duplicates_first() {
        let mut s = numbered(7);
        s.push(s[0].clone());
        s.push(Sentence::new("sentence  number 1"));
        s.push(s[2].clone());
        let split = split_corpus(&s, 0.5, 3).unwrap();
        assert_eq!(split.train.len() + split.valid.len(), 7);
    }

    #[test]
    fn different_seeds_permute_differently() {
        let s = numbered(10);
        let a = split_corpus(&s, 0.5, 1).unwrap();
        let b = split_corpus(&s, 0.5, 2).unwrap();
        let order = |d: &DatasetSplit| -> Vec<String> {
            d.train.iter().chain(&d.valid).map(|s| s.raw().to_string()).collect()
        };
        assert_ne!(order(&a), order(&b));
    }

    #[test]
    fn split_errors() {
        assert!(split_corpus(&numbered(1), 0.5, 0).is_err());
        assert!(split_corpus(&numbered(5), 1.0, 0).is_err());
        assert!(split_corpus(&numbered(5), 0.0, 0).is_err());
    }

    #[test]
    fn pair_split_holds_out_duplicates() {
        let records: Vec<PairRecord> = (0..20)
            .map(|i| PairRecord {
                question1: format!("question {i}"),
                question2: format!("query {i}"),
                is_duplicate: i % 2 == 0,
            })
            .collect();
        let split = split_pairs(&records, 3, 0.75, 9).unwrap();
        assert_eq!(split.test_pairs.len(), 3);
        assert_eq!(split.train.len() + split.valid.len(), 17);
        let held: HashSet<_> = split.test_pairs.iter().map(|p| p.sentence.raw()).collect();
        assert!(split.train.iter().all(|s| !held.contains(s.raw())));
        assert!(split.test_pairs.iter().all(|p| !p.reference.is_empty()));
    }
}
