//! End-to-end confidence band construction.
//!
//! 1. Log-returns of the training prices.
//! 2. Block length chosen on those returns (unless fixed).
//! 3. `M` bootstrap replicates of the returns, each mapped back to a price
//!    path from the training anchor.
//! 4. One LSTM per replicate on its scaled pseudo prices.
//! 5. One-step-ahead forecasts over the test horizon from the actual scaled
//!    history, de-normalized with the actual series' scale records.
//! 6. Per-timestep percentile band and its comparing factor.
//!
//! Only the training segment is resampled, so every replicate is scored
//! against the same test history.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::{comparing_factor, percentile_band, BandError, BandPoint};
use crate::blocklen::{
    default_l_max, select_block_length_for, Selection, SelectorConfig, SelectorError,
};
use crate::bootstrap::{batch_resample, BlockPlan, BootstrapError, Method, DEFAULT_LOCALITY};
use crate::lstm::{fit, predict_series, LstmError, TrainConfig};
use crate::rng::derive_seed;
use crate::timeseries::{
    log_returns_of, price_path, window_minmax_scale, PriceSeries, SplitSpec, TimeSeriesError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("split: {0}")]
    Split(#[from] TimeSeriesError),
    #[error("block length selection: {0}")]
    Selection(#[from] SelectorError),
    #[error("resampling: {0}")]
    Resample(#[from] BootstrapError),
    #[error("training: {} of {total} replicates failed (allowed {allowed}); first: replicate {}: {}",
        failures.len(), failures[0].index, failures[0].error)]
    Training {
        failures: Vec<ReplicateFailure>,
        total: usize,
        allowed: usize,
    },
    #[error("prediction: {0}")]
    Prediction(LstmError),
    #[error("band: {0}")]
    Band(#[from] BandError),
}

impl PipelineError {
    /// Short stage tag for diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Split(_) => "split",
            PipelineError::Selection(_) => "select-block",
            PipelineError::Resample(_) => "resample",
            PipelineError::Training { .. } => "train",
            PipelineError::Prediction(_) => "predict",
            PipelineError::Band(_) => "band",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub index: usize,
    pub error: String,
}

/// Candidate range and replicate count for block length selection; the
/// method, locality and seed come from the enclosing [`PipelineConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorSettings {
    pub reps: usize,
    pub l_min: usize,
    /// `None` means `min(50, n/4)`.
    pub l_max: Option<usize>,
    pub t: f64,
}

impl Default for SelectorSettings {
    fn default() -> Self {
        Self {
            reps: 100,
            l_min: 1,
            l_max: None,
            t: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub split: SplitSpec,
    pub method: Method,
    /// Bootstrap replicates `M`.
    pub reps: usize,
    pub alpha: f64,
    pub selector: SelectorSettings,
    /// Skips selection when set.
    pub block_len: Option<usize>,
    pub locality: f64,
    /// Segment length for min-max scaling.
    pub smoothing_window: usize,
    /// Its `seed` is ignored; replicate seeds derive from `seed` below.
    pub train: TrainConfig,
    pub seed: u64,
    /// Replicates allowed to fail training before the run aborts.
    pub allow_failures: usize,
    /// Train every replicate from the same seed.
    pub shared_train_seed: bool,
}

impl PipelineConfig {
    pub fn new(split: SplitSpec, method: Method, seed: u64) -> Self {
        Self {
            split,
            method,
            reps: 1000,
            alpha: 0.05,
            selector: SelectorSettings::default(),
            block_len: None,
            locality: DEFAULT_LOCALITY,
            smoothing_window: 200,
            train: TrainConfig::default(),
            seed,
            allow_failures: 0,
            shared_train_seed: false,
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.reps < 2 {
            return bad(format!("need at least 2 replicates, got {}", self.reps));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.smoothing_window == 0 {
            return bad("smoothing window must be positive".into());
        }
        if self.split.train_len <= self.train.lookback + 1 {
            return bad(format!(
                "training length {} must exceed lookback + 1 = {}",
                self.split.train_len,
                self.train.lookback + 1
            ));
        }
        self.train
            .check()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Selector config for a return series of length `n`.
    pub fn selector_config(&self, n: usize) -> SelectorConfig {
        SelectorConfig {
            method: self.method,
            reps: self.selector.reps,
            l_min: self.selector.l_min,
            l_max: self.selector.l_max.unwrap_or_else(|| default_l_max(n)),
            t: self.selector.t,
            locality: self.locality,
            seed: derive_seed(self.seed, "select"),
        }
    }

    pub fn resample_plan(&self, block_len: usize) -> BlockPlan {
        BlockPlan::new(self.method, block_len, derive_seed(self.seed, "resample"))
            .with_locality(self.locality)
    }

    pub fn train_seed(&self, replicate: usize) -> u64 {
        if self.shared_train_seed {
            derive_seed(self.seed, "train")
        } else {
            derive_seed(self.seed, &format!("train/{replicate}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub date: NaiveDate,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub method: Method,
    pub l_opt: usize,
    /// Replicates that contributed.
    pub reps: usize,
    pub alpha: f64,
    pub rows: Vec<BandRow>,
    pub comparing_factor: f64,
}

impl ConfidenceBand {
    /// `date,lower,median,upper,actual` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,lower,median,upper,actual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.date, r.lower, r.median, r.upper, r.actual
            ));
        }
        out
    }

    /// Fraction of actual test prices inside `[lower, upper]`.
    pub fn coverage(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let inside = self
            .rows
            .iter()
            .filter(|r| r.lower <= r.actual && r.actual <= r.upper)
            .count();
        inside as f64 / self.rows.len() as f64
    }
}

/// Wall-clock time spent per stage. Not part of any deterministic artifact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub selection: Duration,
    pub resampling: Duration,
    pub training: Duration,
    pub band: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.selection + self.resampling + self.training + self.band
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub band: ConfidenceBand,
    pub selection: Option<Selection>,
    /// Forecast prices, one row per surviving replicate.
    pub predictions: Vec<Vec<f64>>,
    pub replicate_ids: Vec<usize>,
    pub failures: Vec<ReplicateFailure>,
    pub timings: StageTimings,
}

impl RunOutput {
    /// `replicate,<date>...` header then one row per replicate.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("replicate");
        for r in &self.band.rows {
            out.push(',');
            out.push_str(&r.date.to_string());
        }
        out.push('\n');
        for (id, row) in self.replicate_ids.iter().zip(&self.predictions) {
            out.push_str(&id.to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn report(&self, seed: u64) -> RunReport {
        RunReport {
            method: self.band.method,
            l_opt: self.band.l_opt,
            reps: self.band.reps,
            seed,
            alpha: self.band.alpha,
            comparing_factor: self.band.comparing_factor,
            coverage: self.band.coverage(),
            failed_replicates: self.failures.clone(),
            runtime_secs: None,
        }
    }
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub l_opt: usize,
    #[serde(rename = "M")]
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub comparing_factor: f64,
    pub coverage: f64,
    pub failed_replicates: Vec<ReplicateFailure>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_secs: Option<f64>,
}

/// Bootstrap price paths for the training prices: resample the log-returns
/// and rebuild each path from the first training price.
pub fn bootstrap_price_paths(
    train_prices: &[f64],
    plan: &BlockPlan,
    reps: usize,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let returns = log_returns_of(train_prices)?;
    let reps = batch_resample(&returns.values, plan, reps)?;
    Ok(reps
        .into_iter()
        .map(|r| {
            price_path(&crate::timeseries::LogReturnSeries {
                values: r.values,
                anchor_price: returns.anchor_price,
            })
        })
        .collect())
}

pub fn run(prices: &PriceSeries, cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    cfg.check()?;
    cfg.split.check(prices.len())?;
    let n_train = cfg.split.train_len;
    let all = prices.values();
    let train = &all[..n_train];
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let returns = log_returns_of(train)?;
    let (l_opt, selection) = match cfg.block_len {
        Some(l) => (l, None),
        None => {
            let sel =
                select_block_length_for(&returns.values, &cfg.selector_config(returns.len()))?;
            (sel.l_opt, Some(sel))
        }
    };
    timings.selection = clock.elapsed();

    let clock = Instant::now();
    let paths = bootstrap_price_paths(train, &cfg.resample_plan(l_opt), cfg.reps)?;
    timings.resampling = clock.elapsed();

    let clock = Instant::now();
    let context = window_minmax_scale(all, cfg.smoothing_window);
    let horizon = n_train..all.len();
    let outcomes: Vec<Result<Vec<f64>, LstmError>> = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let scaled = window_minmax_scale(path, cfg.smoothing_window);
            let train_cfg = TrainConfig {
                seed: cfg.train_seed(i),
                ..cfg.train
            };
            let model = fit(&scaled.values, &train_cfg)?.model;
            let preds = predict_series(&model, &context.values, horizon.clone())?;
            Ok(horizon
                .clone()
                .zip(preds)
                .map(|(p, y)| context.denormalize(p, y))
                .collect())
        })
        .collect();
    timings.training = clock.elapsed();

    let mut predictions = Vec::with_capacity(cfg.reps);
    let mut replicate_ids = Vec::with_capacity(cfg.reps);
    let mut failures = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) if row.iter().all(|v| v.is_finite()) => {
                predictions.push(row);
                replicate_ids.push(index);
            }
            Ok(_) => failures.push(ReplicateFailure {
                index,
                error: "non-finite forecast".into(),
            }),
            Err(LstmError::InsufficientContext { position, len }) => {
                return Err(PipelineError::Prediction(LstmError::InsufficientContext {
                    position,
                    len,
                }))
            }
            Err(e) => failures.push(ReplicateFailure {
                index,
                error: e.to_string(),
            }),
        }
    }
    if failures.len() > cfg.allow_failures {
        return Err(PipelineError::Training {
            failures,
            total: cfg.reps,
            allowed: cfg.allow_failures,
        });
    }

    let clock = Instant::now();
    let points = percentile_band(&predictions, cfg.alpha)?;
    let rows: Vec<BandRow> = points
        .iter()
        .zip(horizon.clone())
        .map(|(p, t): (&BandPoint, usize)| BandRow {
            date: prices.timestamps()[t],
            lower: p.lower,
            median: p.median,
            upper: p.upper,
            actual: all[t],
        })
        .collect();
    let band = ConfidenceBand {
        method: cfg.method,
        l_opt,
        reps: predictions.len(),
        alpha: cfg.alpha,
        comparing_factor: comparing_factor(&points),
        rows,
    };
    timings.band = clock.elapsed();

    Ok(RunOutput {
        band,
        selection,
        predictions,
        replicate_ids,
        failures,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub method: Method,
    pub l_opt: usize,
    pub comparing_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// One run per method, in [`Method::ALL`] order.
    pub runs: Vec<RunOutput>,
    /// Ascending comparing factor; ties by method name.
    pub ranking: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub reports: Vec<RunReport>,
    pub ranking: Vec<RankEntry>,
}

impl Comparison {
    pub fn report(&self, seed: u64) -> ComparisonReport {
        ComparisonReport {
            seed,
            reports: self.runs.iter().map(|r| r.report(seed)).collect(),
            ranking: self.ranking.clone(),
        }
    }
}

/// Runs every method with its own selected block length and ranks them.
/// `cfg.method` is ignored.
pub fn compare_methods(
    prices: &PriceSeries,
    cfg: &PipelineConfig,
) -> Result<Comparison, PipelineError> {
    let runs = Method::ALL
        .iter()
        .map(|&method| run(prices, &PipelineConfig { method, ..*cfg }))
        .collect::<Result<Vec<_>, _>>()?;
    let ranking = rank(&runs);
    Ok(Comparison { runs, ranking })
}

pub fn rank(runs: &[RunOutput]) -> Vec<RankEntry> {
    let mut order: Vec<&RunOutput> = runs.iter().collect();
    order.sort_by(|a, b| {
        a.band
            .comparing_factor
            .total_cmp(&b.band.comparing_factor)
            .then(a.band.method.cmp(&b.band.method))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(i, r)| RankEntry {
            rank: i + 1,
            method: r.band.method,
            l_opt: r.band.l_opt,
            comparing_factor: r.band.comparing_factor,
        })
        .collect()
}
