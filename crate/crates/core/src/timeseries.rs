//! Price ingestion, log-return transforms and segment-wise min-max scaling.
//!
//! A [`PriceSeries`] is the raw closing-price signal. Bootstrapping and block
//! length selection work on its [`LogReturnSeries`], which keeps the anchor
//! price so the transform can be reversed.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("cannot open {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: cannot parse `{value}`: {reason}")]
    Parse {
        row: usize,
        value: String,
        reason: String,
    },
    #[error("row {row}: non-positive price {value}")]
    NonPositivePrice { row: usize, value: f64 },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("timestamps must be strictly increasing (at index {0})")]
    Unordered(usize),
    #[error("series needs at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("timestamps ({timestamps}) and values ({values}) differ in length")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("split {train}+{test} does not cover series of length {len}")]
    BadSplit {
        train: usize,
        test: usize,
        len: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Ordered closing prices with a date index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    name: String,
    timestamps: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self, TimeSeriesError> {
        if timestamps.len() != values.len() {
            return Err(TimeSeriesError::LengthMismatch {
                timestamps: timestamps.len(),
                values: values.len(),
            });
        }
        if values.len() < 2 {
            return Err(TimeSeriesError::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some((row, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(TimeSeriesError::NonPositivePrice { row, value });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(TimeSeriesError::Unordered(i + 1));
        }
        Ok(Self {
            name: name.into(),
            timestamps,
            values,
        })
    }

    /// Builds a series on consecutive calendar days starting at `start`.
    /// Handy for synthetic data where dates carry no meaning.
    pub fn from_values(
        name: impl Into<String>,
        start: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self, TimeSeriesError> {
        let timestamps = start.iter_days().take(values.len()).collect();
        Self::new(name, timestamps, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Splits into (train, test) halves according to `split`.
    pub fn split(&self, split: SplitSpec) -> Result<(PriceSeries, PriceSeries), TimeSeriesError> {
        split.check(self.len())?;
        let at = split.train_len;
        let train = Self::new(
            format!("{}-train", self.name),
            self.timestamps[..at].to_vec(),
            self.values[..at].to_vec(),
        )?;
        let test = Self::new(
            format!("{}-test", self.name),
            self.timestamps[at..].to_vec(),
            self.values[at..].to_vec(),
        )?;
        Ok((train, test))
    }

    /// Writes `date,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TimeSeriesError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "value"])?;
        for (d, v) in self.timestamps.iter().zip(&self.values) {
            w.write_record([d.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// The values as a plain JSON array.
    pub fn to_json_array(&self) -> String {
        serde_json::to_string(&self.values).expect("f64 slice serializes")
    }
}

/// Log-returns `ln(p[t+1] / p[t])` together with the price preceding the
/// first return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReturnSeries {
    pub values: Vec<f64>,
    pub anchor_price: f64,
}

impl LogReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_json_array(&self) -> String {
        serde_json::to_string(&self.values).expect("f64 slice serializes")
    }
}

/// Train/test lengths. Both parts must be non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_len: usize,
    pub test_len: usize,
}

impl SplitSpec {
    pub fn new(train_len: usize, test_len: usize) -> Self {
        Self {
            train_len,
            test_len,
        }
    }

    /// 800 of 1259 observations go to training in the reference setup; other
    /// lengths keep the same proportion.
    pub fn proportional(len: usize) -> Self {
        let train_len = (len * 800 / 1259).clamp(1, len.saturating_sub(1).max(1));
        Self::new(train_len, len - train_len)
    }

    pub fn total(&self) -> usize {
        self.train_len + self.test_len
    }

    pub fn check(&self, len: usize) -> Result<(), TimeSeriesError> {
        if self.train_len == 0 || self.test_len == 0 || self.total() != len {
            return Err(TimeSeriesError::BadSplit {
                train: self.train_len,
                test: self.test_len,
                len,
            });
        }
        Ok(())
    }
}

/// Reads a CSV whose first column is an ISO-8601 date and picks `column` as
/// the price. Rows are returned sorted by date.
pub fn load_csv(path: impl AsRef<Path>, column: &str) -> Result<PriceSeries, TimeSeriesError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TimeSeriesError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_owned());
    read_csv(file, column, name)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: io::Read>(
    reader: R,
    column: &str,
    name: impl Into<String>,
) -> Result<PriceSeries, TimeSeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .filter(|&i| i > 0)
        .ok_or_else(|| TimeSeriesError::MissingColumn(column.to_owned()))?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row, header excluded
        let row = i + 1;
        let date_str = record.get(0).unwrap_or("");
        if date_str.is_empty() {
            return Err(TimeSeriesError::MissingValue {
                row,
                column: headers.get(0).unwrap_or("date").to_owned(),
            });
        }
        let date = parse_date(date_str).map_err(|reason| TimeSeriesError::Parse {
            row,
            value: date_str.to_owned(),
            reason,
        })?;
        let raw = record.get(col).unwrap_or("");
        if raw.is_empty() || raw.eq_ignore_ascii_case("null") || raw.eq_ignore_ascii_case("nan") {
            return Err(TimeSeriesError::MissingValue {
                row,
                column: column.to_owned(),
            });
        }
        let value: f64 =
            raw.parse()
                .map_err(|e: std::num::ParseFloatError| TimeSeriesError::Parse {
                    row,
                    value: raw.to_owned(),
                    reason: e.to_string(),
                })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(TimeSeriesError::NonPositivePrice { row, value });
        }
        rows.push((date, value));
    }

    rows.sort_by_key(|&(d, _)| d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(TimeSeriesError::DuplicateDate(w[0].0));
    }
    let (timestamps, values) = rows.into_iter().unzip();
    PriceSeries::new(name, timestamps, values)
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    // Accept plain dates and datetime stamps such as `2015-04-28T00:00:00`.
    let head = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").map_err(|e| e.to_string())
}

pub fn to_log_returns(p: &PriceSeries) -> Result<LogReturnSeries, TimeSeriesError> {
    log_returns_of(p.values())
}

/// Log-returns of a raw positive price slice.
pub fn log_returns_of(prices: &[f64]) -> Result<LogReturnSeries, TimeSeriesError> {
    if prices.len() < 2 {
        return Err(TimeSeriesError::TooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    Ok(LogReturnSeries {
        values: prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
        anchor_price: prices[0],
    })
}

/// Rebuilds prices: `p[0] = anchor`, `p[t] = p[t-1] * exp(r[t-1])`.
pub fn price_path(r: &LogReturnSeries) -> Vec<f64> {
    let mut out = Vec::with_capacity(r.len() + 1);
    let mut p = r.anchor_price;
    out.push(p);
    for &ret in &r.values {
        p *= ret.exp();
        out.push(p);
    }
    out
}

/// Reverse transform onto the given dates (one more date than returns).
pub fn from_log_returns(
    r: &LogReturnSeries,
    name: impl Into<String>,
    timestamps: Vec<NaiveDate>,
) -> Result<PriceSeries, TimeSeriesError> {
    PriceSeries::new(name, timestamps, price_path(r))
}

/// Min/max pair of one scaling segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentScale {
    pub start: usize,
    pub len: usize,
    pub min: f64,
    pub max: f64,
}

impl SegmentScale {
    pub fn scale(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (x - self.min) / span
        } else {
            0.0
        }
    }

    /// Degenerate segments give back the constant.
    pub fn unscale(&self, y: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            self.min + y * span
        } else {
            self.min
        }
    }
}

/// Output of [`window_minmax_scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSeries {
    pub values: Vec<f64>,
    pub window_len: usize,
    pub segments: Vec<SegmentScale>,
}

impl ScaledSeries {
    /// Scale record covering position `i`.
    pub fn segment_of(&self, i: usize) -> &SegmentScale {
        &self.segments[(i / self.window_len).min(self.segments.len() - 1)]
    }

    /// Maps a scaled value at position `i` back to original units.
    pub fn denormalize(&self, i: usize, y: f64) -> f64 {
        self.segment_of(i).unscale(y)
    }
}

/// Partitions `x` into consecutive segments of `window_len` (the last one may
/// be shorter) and min-max scales each one independently. A constant segment
/// maps to zeros.
///
/// # Panics
/// If `window_len == 0`.
pub fn window_minmax_scale(x: &[f64], window_len: usize) -> ScaledSeries {
    assert!(window_len >= 1, "window_len must be positive");
    let mut values = Vec::with_capacity(x.len());
    let mut segments = Vec::with_capacity(x.len().div_ceil(window_len));
    for (k, chunk) in x.chunks(window_len).enumerate() {
        let (min, max) = chunk
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let seg = SegmentScale {
            start: k * window_len,
            len: chunk.len(),
            min,
            max,
        };
        values.extend(chunk.iter().map(|&v| seg.scale(v)));
        segments.push(seg);
    }
    ScaledSeries {
        values,
        window_len,
        segments,
    }
}
