//! Line-level assessment: the historical line dataset, classifier views and
//! the ensemble decision on which suspicious lines are benign candidates.

pub mod adapter;
pub mod bleu;
pub mod classifier;
pub mod dataset;
pub mod diff;
pub mod ensemble;
pub mod features;

pub use adapter::{AdapterClient, AdapterError, StubServer};
pub use bleu::{bleu, BleuError, ReferenceSet};
pub use classifier::{
    classify_line, train_classifier, AdapterClassifier, Classification, ClassifyError, LineClassifier, LinearModel,
    ModelError, StubClassifier, TrainConfig, TrainError, TrainReport, MODEL_SCHEMA_VERSION,
};
pub use dataset::{
    build_dataset, filter_negatives, read_corpus, sample_candidate_negatives, DatasetError, DatasetParams,
    DatasetStore, FunctionRecord, IngestSummary, Label, LineSample, Origin, DATASET_SCHEMA_VERSION,
};
pub use diff::{extract_vulnerable_lines, DiffError};
pub use ensemble::{benign_candidates, ensemble_vote, BenignVerdict, Ensemble, EnsembleError};
pub use features::{FeatureVector, FeatureView, Vocabulary};
