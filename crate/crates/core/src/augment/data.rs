use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub text: String,
    pub tokens: Vec<String>,
    pub label: u8,
    pub origin: Origin,
}

impl LabeledDoc {
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        let text = text.into();
        LabeledDoc {
            tokens: tokenize(&text),
            text,
            label,
            origin: Origin::Original,
        }
    }

    /// A paraphrase of `self`, carrying its label.
    pub fn augmented(&self, text: impl Into<String>) -> Self {
        LabeledDoc {
            origin: Origin::Augmented,
            ..LabeledDoc::new(text, self.label)
        }
    }
}

/// Reads `label<TAB>text` lines with labels in {0, 1}. Blank lines and an
/// optional `label<TAB>text` header are skipped.
pub fn load_labeled_tsv(path: &Path) -> Result<Vec<LabeledDoc>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.trim() == "label\ttext") {
            continue;
        }
        let bad = |what: &str| Error::Input(format!("{}: line {}: {what}", path.display(), i + 1));
        let (label, body) = line.split_once('\t').ok_or_else(|| bad("expected label<TAB>text"))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(&format!("label must be 0 or 1, got `{other}`"))),
        };
        if body.trim().is_empty() {
            return Err(bad("empty text"));
        }
        docs.push(LabeledDoc::new(body.trim(), label));
    }
    if docs.is_empty() {
        return Err(Error::Input(format!("{}: no documents", path.display())));
    }
    Ok(docs)
}

pub fn write_labeled_tsv(path: &Path, docs: &[LabeledDoc]) -> Result<()> {
    let body: String = docs.iter().map(|d| format!("{}\t{}\n", d.label, d.text)).collect();
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tsv");
        std::fs::write(&p, "label\ttext\n1\tgreat movie\n\n0\tdull , slow\n").unwrap();
        let docs = load_labeled_tsv(&p).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].tokens, ["dull", ",", "slow"]);
        write_labeled_tsv(&p, &docs).unwrap();
        assert_eq!(load_labeled_tsv(&p).unwrap(), docs);

        std::fs::write(&p, "2\tbad label\n").unwrap();
        assert!(load_labeled_tsv(&p).unwrap_err().to_string().contains("line 1"));
        std::fs::write(&p, "1 no tab\n").unwrap();
        assert!(load_labeled_tsv(&p).is_err());
    }

    #[test]
    fn augmented_docs_inherit_label() {
        let d = LabeledDoc::new("fine film", 1);
        let a = d.augmented("good movie");
        assert_eq!((a.label, a.origin), (1, Origin::Augmented));
    }
}
