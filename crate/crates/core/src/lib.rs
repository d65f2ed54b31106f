//! Bootstrap confidence bands for LSTM price forecasts.
//!
//! The pipeline turns a closing-price series into log-returns, picks a block
//! length with a penalised block-mean distance, draws block-bootstrap
//! replicates of the training returns, trains one LSTM per replicate and
//! reads per-timestep percentile bands off the replicate forecasts. The sum
//! of band widths (the comparing factor) ranks bootstrap schemes.

pub mod band;
pub mod blocklen;
pub mod bootstrap;
pub mod lstm;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod timeseries;

pub use band::{comparing_factor, percentile_band, BandPoint};
pub use blocklen::{select_block_length, CurvePoint, Selection, SelectorConfig, SelectorCurve};
pub use bootstrap::{batch_resample, BlockPlan, Method, PseudoSeries};
pub use lstm::{LstmModel, LstmParams, TrainConfig};
pub use pipeline::{
    compare_methods, run, Comparison, ComparisonReport, ConfidenceBand, PipelineConfig,
    PipelineError, RunOutput, RunReport,
};
pub use timeseries::{load_csv, LogReturnSeries, PriceSeries, ScaledSeries, SplitSpec};
