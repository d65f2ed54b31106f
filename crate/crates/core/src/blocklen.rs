//! Block length selection by a penalised block-mean distance.
//!
//! For a candidate length `l` the objective is
//!
//! ```text
//! (1/M) Σ_i (l/n) Σ_{T=1}^{b} (mean*_{T,i} − mean_T)²  +  ln(n)/nᵗ · l
//! ```
//!
//! where `mean_T` are the means of consecutive length-`l` blocks of the
//! original series, `mean*_{T,i}` the same for replicate `i`, and
//! `b = ⌊n/l⌋`. The raw distance shrinks (noisily) as `l` grows; the linear
//! penalty turns the curve into a bowl whose bottom is the chosen length.
//! Every candidate uses the same base seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{batch_resample, BlockPlan, BootstrapError, Method, DEFAULT_LOCALITY};
use crate::timeseries::LogReturnSeries;

#[derive(Debug, Error, PartialEq)]
pub enum SelectorError {
    #[error("candidate range [{lo}, {hi}] not within [1, {n}]")]
    Range { lo: usize, hi: usize, n: usize },
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("penalty exponent must be positive, got {0}")]
    Exponent(f64),
    #[error("replicate {index} has length {got}, expected {expected}")]
    LengthMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub method: Method,
    /// Replicates per candidate length.
    pub reps: usize,
    pub l_min: usize,
    pub l_max: usize,
    /// Penalty exponent `t`.
    pub t: f64,
    pub locality: f64,
    pub seed: u64,
}

impl SelectorConfig {
    /// Defaults for a series of length `n`: 100 replicates, `t = 2`,
    /// candidates `1..=min(50, n/4)`.
    pub fn new(method: Method, n: usize, seed: u64) -> Self {
        Self {
            method,
            reps: 100,
            l_min: 1,
            l_max: default_l_max(n),
            t: 2.0,
            locality: DEFAULT_LOCALITY,
            seed,
        }
    }

    pub fn check(&self, n: usize) -> Result<(), SelectorError> {
        if self.l_min == 0 || self.l_min > self.l_max || self.l_max > n {
            return Err(SelectorError::Range {
                lo: self.l_min,
                hi: self.l_max,
                n,
            });
        }
        if self.reps == 0 {
            return Err(SelectorError::NoReplicates);
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(SelectorError::Exponent(self.t));
        }
        Ok(())
    }

    pub fn plan(&self, block_len: usize) -> BlockPlan {
        BlockPlan::new(self.method, block_len, self.seed).with_locality(self.locality)
    }
}

pub fn default_l_max(n: usize) -> usize {
    (n / 4).clamp(1, 50)
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l: usize,
    pub distance: f64,
    pub penalty: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorCurve {
    pub points: Vec<CurvePoint>,
}

impl SelectorCurve {
    /// Lowest objective; ties go to the smaller length.
    pub fn argmin(&self) -> Option<&CurvePoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&CurvePoint>, p| match best {
                Some(b) if b.objective <= p.objective => Some(b),
                _ => Some(p),
            })
    }

    /// `l,distance,penalty,objective` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,distance,penalty,objective\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.l, p.distance, p.penalty, p.objective
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub l_opt: usize,
    pub curve: SelectorCurve,
}

/// Means of consecutive length-`l` blocks; a trailing partial block is
/// dropped.
pub fn block_means(x: &[f64], l: usize) -> Vec<f64> {
    assert!(l >= 1, "block length must be positive");
    x.chunks_exact(l)
        .map(|c| c.iter().sum::<f64>() / l as f64)
        .collect()
}

/// Average over replicates of `(l/n)·Σ_T (mean*_T − mean_T)²`.
pub fn distance<S: AsRef<[f64]>>(
    x: &[f64],
    replicates: &[S],
    l: usize,
) -> Result<f64, SelectorError> {
    if replicates.is_empty() {
        return Err(SelectorError::NoReplicates);
    }
    let n = x.len();
    if l == 0 || l > n {
        return Err(SelectorError::Range { lo: l, hi: l, n });
    }
    let base = block_means(x, l);
    let weight = l as f64 / n as f64;
    let mut total = 0.0;
    for (index, rep) in replicates.iter().enumerate() {
        let rep = rep.as_ref();
        if rep.len() != n {
            return Err(SelectorError::LengthMismatch {
                index,
                got: rep.len(),
                expected: n,
            });
        }
        let sq: f64 = block_means(rep, l)
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += weight * sq;
    }
    Ok(total / replicates.len() as f64)
}

/// `ln(n)/nᵗ · l`.
pub fn penalty(n: usize, l: usize, t: f64) -> f64 {
    let n = n as f64;
    n.ln() / n.powf(t) * l as f64
}

/// Objective at block length `l`, with both terms reported.
pub fn objective(x: &[f64], l: usize, cfg: &SelectorConfig) -> Result<CurvePoint, SelectorError> {
    cfg.check(x.len())?;
    if l < cfg.l_min || l > cfg.l_max {
        return Err(SelectorError::Range {
            lo: l,
            hi: l,
            n: x.len(),
        });
    }
    let reps = batch_resample(x, &cfg.plan(l), cfg.reps)?;
    let values: Vec<&[f64]> = reps.iter().map(|r| r.values.as_slice()).collect();
    let distance = distance(x, &values, l)?;
    let penalty = penalty(x.len(), l, cfg.t);
    Ok(CurvePoint {
        l,
        distance,
        penalty,
        objective: distance + penalty,
    })
}

pub fn select_block_length(
    x: &LogReturnSeries,
    cfg: &SelectorConfig,
) -> Result<Selection, SelectorError> {
    select_block_length_for(&x.values, cfg)
}

/// Evaluates every candidate in `cfg.l_min..=cfg.l_max` and keeps the argmin.
pub fn select_block_length_for(
    x: &[f64],
    cfg: &SelectorConfig,
) -> Result<Selection, SelectorError> {
    cfg.check(x.len())?;
    let points = (cfg.l_min..=cfg.l_max)
        .into_par_iter()
        .map(|l| objective(x, l, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = SelectorCurve { points };
    let l_opt = curve
        .argmin()
        .map(|p| p.l)
        .expect("non-empty candidate range");
    Ok(Selection { l_opt, curve })
}
