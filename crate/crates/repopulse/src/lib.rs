//! Repository popularity forecasting and user segmentation.
//!
//! The library covers the full pipeline: parsing user-repository event
//! streams, binning them into fixed-length windows, tracking connected
//! components of the evolving bipartite interaction graph, training a
//! from-scratch multi-layer LSTM that forecasts all tracked repositories
//! jointly, fitting per-series ARIMA benchmarks, RMSE-based model
//! comparison, and topic-based user segmentation with diversity scoring.

pub mod arima;
pub mod dataset;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod lstm;
pub mod pipeline;
pub mod segment;

pub use dataset::{Scaler, SequenceSample};
pub use eval::{ComparisonReport, EvaluationPanel};
pub use graph::{BipartiteGraph, ComponentAssignment};
pub use ingest::{CountPanel, EventRecord, EventType, TimeGrid};
pub use lstm::{LstmModel, TrainConfig, TrainingHistory};
pub use pipeline::{ArimaRun, LstmRun, SplitPlan};
pub use segment::{SegmentSet, UserProfile};
