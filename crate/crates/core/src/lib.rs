//! Trip-level detection of alcohol-influenced driving from 1 Hz smartphone
//! telematics.
//!
//! The pipeline runs ingest → aggregate → feature selection → SMOTE →
//! classifier → evaluation. Every stage is a pure function of its inputs and
//! an explicit seed, so two runs with the same configuration produce the same
//! bytes.

pub mod aggregate;
pub mod dot;
pub mod error;
pub mod eval;
pub mod featselect;
pub mod ingest;
pub mod learners;
pub mod model;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use model::{
    canonical_feature_names, LabeledDataset, RawRecord, TripFeatureVector, TripRecord, N_FEATURES,
};
