//! Universal text classification through binary entailment.
//!
//! Any labeled classification dataset can be recast as premise/hypothesis
//! pairs with a binary `entailment` / `not_entailment` label. This crate
//! covers the full round trip:
//!
//! * [`harmonizer`] ingests raw CSV/JSONL into the canonical [`LabeledDataset`].
//! * [`cleaner`] flags probable label noise from out-of-fold probabilities and
//!   downsamples oversized datasets.
//! * [`verbalizer`] turns class names into hypotheses.
//! * [`nli`] builds training and test pair sets.
//! * [`zeroshot`] scores pairs through a pluggable [`ScoringBackend`] and
//!   aggregates entailment logits into class predictions.
//! * [`eval`] computes balanced accuracy over multiplied test sets and plans
//!   held-out experiments.
//! * [`report`] renders result tables and SVG bar charts.

pub mod cleaner;
pub mod error;
pub mod eval;
pub mod harmonizer;
pub mod model;
pub mod nli;
pub mod report;
pub mod rng;
pub mod verbalizer;
pub mod zeroshot;

pub use error::{Error, Result};
pub use model::{
    ClassInfo, HypothesisCatalog, LabeledDataset, LabeledExample, NliDataset, NliRecord, PairScore, Prediction, Split,
};
pub use zeroshot::{BackendError, ScoringBackend};
