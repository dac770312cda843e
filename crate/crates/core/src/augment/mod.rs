//! Downstream classification harness: does adding paraphrases to a training
//! set move a classifier's test accuracy and F1?

mod data;
mod experiment;
mod features;
mod forest;
mod nbsvm;

pub use data::{load_labeled_tsv, write_labeled_tsv, LabeledDoc, Origin};
pub use experiment::{
    augment_training_set, evaluate_classifier, fit_classifier, percent_increment,
    run_experiment, scores_from_predictions, ClassifierKind, ClassifierReport, ClassifierScores,
    ClassifierSpec, ExperimentOutcome, Increments, ParaphraseSource, TrainedClassifier,
};
pub use features::{featurize, FeatureMode, FeatureSpace, SparseMatrix, SparseRow};
pub use forest::{rf_train, Forest, RfConfig};
pub use nbsvm::{log_count_ratio, nbsvm_train, NbSvm, NbSvmConfig};
