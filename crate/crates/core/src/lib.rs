//! Uplift modeling with multiple treatments: contextual treatment selection
//! forests, a separate-model baseline, unbiased offline policy evaluation,
//! and a synthetic benchmark with a known optimal policy.

pub mod benchmark;
pub mod config;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod sma;
pub mod split;
pub mod synthetic;
pub mod tree;
pub mod tune;

pub use dataset::{Dataset, Schema, TreatmentProbs};
pub use ensemble::{forest_predict, train_cts, Forest, ForestParams};
pub use error::{Result, UpliftError};
pub use evaluation::{expected_response, EvaluationReport, PolicyPrediction, UpliftCurve};
pub use model::{load_model, save_model, Algorithm, UpliftModel};
pub use sma::{sma_predict, train_sma, SmaModel, SmaParams};
pub use synthetic::{monte_carlo_value, sample_model, SyntheticModel};
pub use tree::{grow_tree, tree_predict, TreeParams, UpliftTree};
