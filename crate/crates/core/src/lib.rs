//! Short-term hourly electricity-demand forecasting.
//!
//! The crate covers the whole pipeline: raw CSV ingestion into an
//! [`ingest::HourlyTable`], cleaning ([`preprocess`]), model-ready windows
//! ([`features`]), a from-scratch multi-layer LSTM ([`nn`]) trained by
//! backpropagation through time ([`train`]), the forecast error metrics
//! ([`metrics`]), post-hoc error analyses ([`eval`]), a random-forest
//! interpretability baseline ([`baseline`]), exploratory diagnostics
//! ([`analysis`]) and the experiment grids ([`harness`]).

pub mod analysis;
pub mod baseline;
pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod stats;
pub mod svg;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
