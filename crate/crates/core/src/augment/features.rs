//! Cumulative 1..=n-gram features.
//!
//! Columns are numbered by sorting the training n-grams (joined with a
//! space), so ids do not depend on hash order. TF-IDF weights are
//! `tf · (ln((1 + N) / (1 + df)) + 1)` with raw counts for `tf`, then each
//! row is scaled to unit L2 norm.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::LabeledDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Binarized,
    Tfidf,
}

/// Sparse row: `(column, value)` sorted by column.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<SparseRow>,
    pub n_cols: usize,
}

impl SparseMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    columns: HashMap<String, usize>,
    mode: FeatureMode,
    max_n: usize,
    idf: Option<Vec<f64>>,
}

fn ngram_counts(tokens: &[String], max_n: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in 1..=max_n {
        for w in tokens.windows(n) {
            *out.entry(w.join(" ")).or_insert(0) += 1;
        }
    }
    out
}

impl FeatureSpace {
    /// Builds the column map (and IDF table in TF-IDF mode) from `train`.
    pub fn build(train: &[LabeledDoc], mode: FeatureMode, max_n: usize) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in train {
            for gram in ngram_counts(&doc.tokens, max_n).into_keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let n = train.len() as f64;
        let idf = (mode == FeatureMode::Tfidf)
            .then(|| df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect());
        let columns = df.into_keys().enumerate().map(|(i, g)| (g, i)).collect();
        FeatureSpace {
            columns,
            mode,
            max_n,
            idf,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn column(&self, gram: &str) -> Option<usize> {
        self.columns.get(gram).copied()
    }

    pub fn idf(&self, column: usize) -> Option<f64> {
        self.idf.as_ref().map(|v| v[column])
    }

    pub fn row(&self, tokens: &[String]) -> SparseRow {
        let mut row: SparseRow = ngram_counts(tokens, self.max_n)
            .into_iter()
            .filter_map(|(g, c)| self.column(&g).map(|col| (col, c as f64)))
            .collect();
        row.sort_unstable_by_key(|e| e.0);
        match &self.idf {
            None => {
                for e in row.iter_mut() {
                    e.1 = 1.0;
                }
            }
            Some(idf) => {
                for e in row.iter_mut() {
                    e.1 *= idf[e.0];
                }
                let norm = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for e in row.iter_mut() {
                        e.1 /= norm;
                    }
                }
            }
        }
        row
    }
}

pub fn featurize(docs: &[LabeledDoc], space: &FeatureSpace) -> SparseMatrix {
    SparseMatrix {
        rows: docs.iter().map(|d| space.row(&d.tokens)).collect(),
        n_cols: space.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<LabeledDoc> {
        texts.iter().map(|t| LabeledDoc::new(*t, 0)).collect()
    }

    #[test]
    fn binarized_presence_and_unseen() {
        let train = docs(&["a b a", "b c"]);
        let space = FeatureSpace::build(&train, FeatureMode::Binarized, 3);
        // a, a b, a b a, b, b a, b c, c
        assert_eq!(space.len(), 7);
        let m = featurize(&train, &space);
        assert!(m.rows[0].iter().all(|e| e.1 == 1.0));
        assert_eq!(m.rows[0].len(), 5);
        assert_eq!(featurize(&docs(&["a b a"]), &space).rows[0], m.rows[0]);
        assert!(space.row(&["zzz".to_string()]).is_empty());
        // columns are sorted n-gram strings
        assert_eq!(space.column("a"), Some(0));
        assert_eq!(space.column("c"), Some(6));
    }

    #[test]
    fn idf_matches_hand_computation() {
        let train = docs(&["a b", "a c", "a"]);
        let space = FeatureSpace::build(&train, FeatureMode::Tfidf, 1);
        // N = 3: df(a)=3, df(b)=1, df(c)=1
        let idf_a = (4.0f64 / 4.0).ln() + 1.0;
        let idf_b = (4.0f64 / 2.0).ln() + 1.0;
        assert!((space.idf(space.column("a").unwrap()).unwrap() - idf_a).abs() < 1e-12);
        assert!((space.idf(space.column("b").unwrap()).unwrap() - idf_b).abs() < 1e-12);
        let row = space.row(&["a".into(), "a".into(), "b".into()]);
        let (wa, wb) = (2.0 * idf_a, idf_b);
        let norm = (wa * wa + wb * wb).sqrt();
        assert!((row[0].1 - wa / norm).abs() < 1e-12);
        assert!((row[1].1 - wb / norm).abs() < 1e-12);
    }
}
