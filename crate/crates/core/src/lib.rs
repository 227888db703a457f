//! Neural subgraph matching with a hierarchy-aware GRU encoder and a
//! containment-based similarity measure.
//!
//! The crate bundles everything needed to train and evaluate such a model at
//! desk scale: graph ingestion, an exact matcher that provides ground truth,
//! random-walk pair sampling, a small reverse-mode autodiff engine, the
//! encoder, the scoring measure, training and evaluation metrics.

pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod index;
pub mod measure;
pub mod metrics;
pub mod oracle;
pub mod pairs;
pub mod sampler;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
pub mod tudataset;

pub use encoder::{EncoderConfig, EncoderParams, GraphEmbedding, NodeEmbeddings};
pub use error::{Error, Result};
pub use graph::{GraphDataset, Label, LabeledGraph};
pub use measure::{ScoreBreakdown, ScoreMode, SdrReduction};
pub use oracle::{NodeMapping, OracleOutcome, PairLabel, Verdict};
