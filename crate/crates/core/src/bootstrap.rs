//! Block bootstraps for dependent data.
//!
//! Three schemes build a pseudo-series of the same length as the input by
//! laying sampled blocks end to end and cutting the tail:
//!
//! * **NBB**: blocks start on the non-overlapping grid `0, l, 2l, ...`.
//! * **MBB**: any of the `n - l + 1` overlapping blocks.
//! * **LBB**: the block for output offset `m·l` starts within `⌊nB⌋` of that
//!   offset, so resampled values stay local in time.
//!
//! Every draw is a function of `(x, plan)` alone; see [`crate::rng`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;

#[derive(Debug, Error, PartialEq)]
pub enum BootstrapError {
    #[error("cannot resample an empty series")]
    Empty,
    #[error("block length {block_len} outside [1, {n}]")]
    BlockLength { block_len: usize, n: usize },
    #[error("locality fraction {0} outside (0, 1]")]
    Locality(f64),
    #[error("locality fraction {locality} gives floor(n*B) = 0 for n = {n}")]
    LocalityTooSmall { locality: f64, n: usize },
    #[error("plan is for {plan}, called the {called} resampler")]
    WrongMethod { plan: Method, called: Method },
    #[error("replicate count must be at least 1")]
    NoReplicates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lbb,
    Mbb,
    Nbb,
}

impl Method {
    /// In name order, which is also the tie-break order for rankings.
    pub const ALL: [Method; 3] = [Method::Lbb, Method::Mbb, Method::Nbb];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lbb => "lbb",
            Method::Mbb => "mbb",
            Method::Nbb => "nbb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nbb" => Ok(Method::Nbb),
            "mbb" => Ok(Method::Mbb),
            "lbb" => Ok(Method::Lbb),
            other => Err(format!(
                "unknown bootstrap method `{other}` (nbb, mbb, lbb)"
            )),
        }
    }
}

/// Locality fraction used when none is given.
pub const DEFAULT_LOCALITY: f64 = 0.1;

/// Everything needed to reproduce a pseudo-series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub method: Method,
    pub block_len: usize,
    /// Fraction `B` of the series an LBB start may move; ignored otherwise.
    pub locality: f64,
    pub seed: u64,
}

impl BlockPlan {
    pub fn new(method: Method, block_len: usize, seed: u64) -> Self {
        Self {
            method,
            block_len,
            locality: DEFAULT_LOCALITY,
            seed,
        }
    }

    pub fn with_locality(mut self, locality: f64) -> Self {
        self.locality = locality;
        self
    }

    /// Validates the plan against a series of length `n`.
    pub fn check(&self, n: usize) -> Result<(), BootstrapError> {
        if n == 0 {
            return Err(BootstrapError::Empty);
        }
        if self.block_len == 0 || self.block_len > n {
            return Err(BootstrapError::BlockLength {
                block_len: self.block_len,
                n,
            });
        }
        if self.method == Method::Lbb {
            if !(self.locality > 0.0 && self.locality <= 1.0) {
                return Err(BootstrapError::Locality(self.locality));
            }
            if locality_radius(n, self.locality) == 0 {
                return Err(BootstrapError::LocalityTooSmall {
                    locality: self.locality,
                    n,
                });
            }
        }
        Ok(())
    }
}

/// `⌊n·B⌋`.
pub fn locality_radius(n: usize, locality: f64) -> usize {
    (n as f64 * locality).floor() as usize
}

/// 1-based inclusive range `[J1, J2]` of LBB block starts for block `m`.
///
/// The window is centred on the block's own position `p = ml + 1`:
/// `J1 = max(1, p − r)`, `J2 = min(n − l + 1, p + r)` with `r = ⌊nB⌋`.
/// Near the end of the series `p − r` can exceed `n − l + 1`; `J1` is then
/// clamped to `J2` so the block still fits.
pub fn lbb_bounds(n: usize, block_len: usize, radius: usize, m: usize) -> (usize, usize) {
    let pos = m * block_len + 1;
    let last = n - block_len + 1;
    let j2 = last.min(pos + radius);
    let j1 = pos.saturating_sub(radius).max(1).min(j2);
    (j1, j2)
}

/// A bootstrap replicate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSeries {
    pub values: Vec<f64>,
    pub plan: BlockPlan,
    pub source_len: usize,
    /// 0-based source index of every block laid down, in output order.
    pub starts: Vec<usize>,
}

pub fn nbb_resample(x: &[f64], plan: &BlockPlan) -> Result<PseudoSeries, BootstrapError> {
    expect_method(plan, Method::Nbb)?;
    resample(x, plan)
}

pub fn mbb_resample(x: &[f64], plan: &BlockPlan) -> Result<PseudoSeries, BootstrapError> {
    expect_method(plan, Method::Mbb)?;
    resample(x, plan)
}

pub fn lbb_resample(x: &[f64], plan: &BlockPlan) -> Result<PseudoSeries, BootstrapError> {
    expect_method(plan, Method::Lbb)?;
    resample(x, plan)
}

fn expect_method(plan: &BlockPlan, called: Method) -> Result<(), BootstrapError> {
    if plan.method != called {
        return Err(BootstrapError::WrongMethod {
            plan: plan.method,
            called,
        });
    }
    Ok(())
}

/// One replicate drawn from sub-stream 0 of the plan's seed.
pub fn resample(x: &[f64], plan: &BlockPlan) -> Result<PseudoSeries, BootstrapError> {
    plan.check(x.len())?;
    Ok(draw(x, plan, &mut substream(plan.seed, 0)))
}

/// `count` replicates; replicate `i` uses sub-stream `i`. Output order is
/// replicate order whatever the thread count.
pub fn batch_resample(
    x: &[f64],
    plan: &BlockPlan,
    count: usize,
) -> Result<Vec<PseudoSeries>, BootstrapError> {
    if count == 0 {
        return Err(BootstrapError::NoReplicates);
    }
    plan.check(x.len())?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| draw(x, plan, &mut substream(plan.seed, i)))
        .collect())
}

/// Draws with an explicit generator. The plan must already be valid for `x`.
pub fn draw(x: &[f64], plan: &BlockPlan, rng: &mut ChaCha8Rng) -> PseudoSeries {
    let n = x.len();
    let l = plan.block_len;
    let mut values = Vec::with_capacity(n + l);
    let mut starts = Vec::with_capacity(n.div_ceil(l) + 1);

    match plan.method {
        Method::Nbb => {
            let grid = n.div_ceil(l);
            // The last grid block may be short, so keep drawing until full.
            while values.len() < n {
                let s = rng.random_range(0..grid) * l;
                values.extend_from_slice(&x[s..(s + l).min(n)]);
                starts.push(s);
            }
        }
        Method::Mbb => {
            let blocks = n - l + 1;
            for _ in 0..n.div_ceil(l) {
                let s = rng.random_range(0..blocks);
                values.extend_from_slice(&x[s..s + l]);
                starts.push(s);
            }
        }
        Method::Lbb => {
            let radius = locality_radius(n, plan.locality);
            for m in 0..n.div_ceil(l) {
                let (j1, j2) = lbb_bounds(n, l, radius, m);
                let s = rng.random_range(j1..=j2) - 1;
                values.extend_from_slice(&x[s..s + l]);
                starts.push(s);
            }
        }
    }
    values.truncate(n);
    PseudoSeries {
        values,
        plan: *plan,
        source_len: n,
        starts,
    }
}
