use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    featurize, nbsvm_train, rf_train, FeatureMode, FeatureSpace, Forest, LabeledDoc, NbSvm,
    NbSvmConfig, RfConfig,
};
use crate::{Error, Result};

/// Supplies up to `max` paraphrases of a training document. `index` is the
/// document's position in the training set and selects its random stream.
pub trait ParaphraseSource: Sync {
    fn paraphrases(&self, text: &str, index: usize, max: usize) -> Result<Vec<String>>;
}

impl<F> ParaphraseSource for F
where
    F: Fn(&str, usize, usize) -> Result<Vec<String>> + Sync,
{
    fn paraphrases(&self, text: &str, index: usize, max: usize) -> Result<Vec<String>> {
        self(text, index, max)
    }
}

/// The original documents in order, followed by up to `per_doc` paraphrases
/// of each (in document order), each labeled like its source.
pub fn augment_training_set(
    train: &[LabeledDoc],
    source: &dyn ParaphraseSource,
    per_doc: usize,
) -> Result<Vec<LabeledDoc>> {
    let mut out = train.to_vec();
    if per_doc == 0 {
        return Ok(out);
    }
    let extra: Vec<Vec<LabeledDoc>> = train
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            let texts = source.paraphrases(&doc.text, i, per_doc)?;
            Ok(texts
                .into_iter()
                .filter(|t| !t.trim().is_empty())
                .take(per_doc)
                .map(|t| doc.augmented(t))
                .collect())
        })
        .collect::<Result<_>>()?;
    out.extend(extra.into_iter().flatten());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Nbsvm,
    TfidfRf,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbsvm" => Ok(ClassifierKind::Nbsvm),
            "tfidf_rf" => Ok(ClassifierKind::TfidfRf),
            other => Err(Error::Config(format!(
                "unknown classifier `{other}` (expected nbsvm or tfidf_rf)"
            ))),
        }
    }
}

/// Everything that defines a classifier run apart from its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default)]
    pub nbsvm: NbSvmConfig,
    #[serde(default)]
    pub forest: RfConfig,
}

fn default_max_n() -> usize {
    3
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            max_n: default_max_n(),
            nbsvm: NbSvmConfig::default(),
            forest: RfConfig::default(),
        }
    }

    fn mode(&self) -> FeatureMode {
        match self.kind {
            ClassifierKind::Nbsvm => FeatureMode::Binarized,
            ClassifierKind::TfidfRf => FeatureMode::Tfidf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Nbsvm(NbSvm),
    Forest(Forest),
}

/// A fitted classifier together with the feature space it was fitted in.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub space: FeatureSpace,
    pub model: Model,
}

impl TrainedClassifier {
    pub fn predict(&self, docs: &[LabeledDoc]) -> Vec<u8> {
        featurize(docs, &self.space)
            .rows
            .iter()
            .map(|row| match &self.model {
                Model::Nbsvm(m) => m.predict(row),
                Model::Forest(f) => f.predict(row),
            })
            .collect()
    }
}

/// Builds the feature space from `train` alone and fits the classifier.
pub fn fit_classifier(train: &[LabeledDoc], spec: &ClassifierSpec) -> Result<TrainedClassifier> {
    let space = FeatureSpace::build(train, spec.mode(), spec.max_n);
    let x = featurize(train, &space);
    let y: Vec<u8> = train.iter().map(|d| d.label).collect();
    let model = match spec.kind {
        ClassifierKind::Nbsvm => Model::Nbsvm(nbsvm_train(&x, &y, &spec.nbsvm)?),
        ClassifierKind::TfidfRf => Model::Forest(rf_train(&x, &y, &spec.forest)?),
    };
    Ok(TrainedClassifier { space, model })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScores {
    pub acc: f64,
    pub f1: f64,
}

/// Accuracy and F1 of label 1. F1 is 0 when there are no true positives.
pub fn scores_from_predictions(predicted: &[u8], gold: &[u8]) -> ClassifierScores {
    assert_eq!(predicted.len(), gold.len(), "prediction count must match gold labels");
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &g) in predicted.iter().zip(gold) {
        correct += usize::from(p == g);
        match (p, g) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => {}
        }
    }
    let f1 = if tp == 0 {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        2.0 * precision * recall / (precision + recall)
    };
    ClassifierScores {
        acc: correct as f64 / gold.len() as f64,
        f1,
    }
}

pub fn evaluate_classifier(model: &TrainedClassifier, test: &[LabeledDoc]) -> Result<ClassifierScores> {
    if test.is_empty() {
        return Err(Error::Input("test set is empty".into()));
    }
    let gold: Vec<u8> = test.iter().map(|d| d.label).collect();
    Ok(scores_from_predictions(&model.predict(test), &gold))
}

/// `100 (enhanced − baseline) / baseline`; `None` for a zero baseline.
pub fn percent_increment(baseline: f64, enhanced: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (enhanced - baseline) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increments {
    pub acc: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub classifier: ClassifierKind,
    pub baseline: ClassifierScores,
    pub enhanced: ClassifierScores,
    pub increment_pct: Increments,
    pub seeds: serde_json::Value,
    pub config: serde_json::Value,
}

pub struct ExperimentOutcome {
    pub report: ClassifierReport,
    pub baseline_model: TrainedClassifier,
    pub enhanced_model: TrainedClassifier,
    pub augmented_train: Vec<LabeledDoc>,
}

/// Baseline on `train`, enhanced on the augmented `train`; everything else
/// (spec, seeds, evaluation) is shared between the two arms.
pub fn run_experiment(
    train: &[LabeledDoc],
    test: &[LabeledDoc],
    spec: &ClassifierSpec,
    source: &dyn ParaphraseSource,
    per_doc: usize,
    seeds: serde_json::Value,
) -> Result<ExperimentOutcome> {
    let augmented = augment_training_set(train, source, per_doc)?;
    let arm = |docs: &[LabeledDoc]| -> Result<(TrainedClassifier, ClassifierScores)> {
        let model = fit_classifier(docs, spec)?;
        let scores = evaluate_classifier(&model, test)?;
        Ok((model, scores))
    };
    let (baseline_model, baseline) = arm(train)?;
    let (enhanced_model, enhanced) = arm(&augmented)?;
    let report = ClassifierReport {
        classifier: spec.kind,
        baseline,
        enhanced,
        increment_pct: Increments {
            acc: percent_increment(baseline.acc, enhanced.acc),
            f1: percent_increment(baseline.f1, enhanced.f1),
        },
        seeds,
        config: serde_json::json!({
            "spec": spec,
            "per_doc": per_doc,
            "train_docs": train.len(),
            "augmented_docs": augmented.len() - train.len(),
            "test_docs": test.len(),
        }),
    };
    Ok(ExperimentOutcome {
        report,
        baseline_model,
        enhanced_model,
        augmented_train: augmented,
    })
}
