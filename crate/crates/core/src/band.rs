//! Percentile bands across replicate forecasts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BandError {
    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("replicate {replicate} has {got} timesteps, expected {expected}")]
    Ragged {
        replicate: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite sample at replicate {replicate}, timestep {timestep}")]
    NonFinite { replicate: usize, timestep: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl BandPoint {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Empirical quantile of ascending `sorted` at level `q`, interpolating
/// linearly between order statistics at 1-based rank `h = (M − 1)q + 1`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Per-timestep `(α/2, 0.5, 1 − α/2)` quantiles of an `M × T` matrix given
/// as one row per replicate.
pub fn percentile_band<R: AsRef<[f64]>>(
    samples: &[R],
    alpha: f64,
) -> Result<Vec<BandPoint>, BandError> {
    if samples.len() < 2 {
        return Err(BandError::TooFewReplicates(samples.len()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BandError::Alpha(alpha));
    }
    let width = samples[0].as_ref().len();
    for (replicate, row) in samples.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != width {
            return Err(BandError::Ragged {
                replicate,
                got: row.len(),
                expected: width,
            });
        }
        if let Some(timestep) = row.iter().position(|v| !v.is_finite()) {
            return Err(BandError::NonFinite {
                replicate,
                timestep,
            });
        }
    }
    let mut column = vec![0.0; samples.len()];
    Ok((0..width)
        .map(|t| {
            for (slot, row) in column.iter_mut().zip(samples) {
                *slot = row.as_ref()[t];
            }
            column.sort_by(f64::total_cmp);
            BandPoint {
                lower: quantile_sorted(&column, alpha / 2.0),
                median: quantile_sorted(&column, 0.5),
                upper: quantile_sorted(&column, 1.0 - alpha / 2.0),
            }
        })
        .collect())
}

/// Sum of band widths over the horizon.
pub fn comparing_factor(band: &[BandPoint]) -> f64 {
    band.iter().map(BandPoint::width).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_column() {
        let rows = vec![vec![4.0, -1.0]; 7];
        let b = percentile_band(&rows, 0.05).unwrap();
        assert_eq!(
            b[0],
            BandPoint {
                lower: 4.0,
                median: 4.0,
                upper: 4.0
            }
        );
        assert_eq!(comparing_factor(&b), 0.0);
    }

    #[test]
    fn one_to_hundred() {
        let rows: Vec<Vec<f64>> = (1..=100).rev().map(|v| vec![v as f64]).collect();
        let b = percentile_band(&rows, 0.05).unwrap();
        assert!((b[0].lower - 3.475).abs() < 1e-12);
        assert!((b[0].upper - 97.525).abs() < 1e-12);
        assert_eq!(b[0].median, 50.5);
    }

    #[test]
    fn widths_sum() {
        let pts = [1.0, 2.0, 3.0].map(|w| BandPoint {
            lower: 0.0,
            median: 0.0,
            upper: w,
        });
        assert_eq!(comparing_factor(&pts), 6.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            percentile_band(&[vec![1.0]], 0.05),
            Err(BandError::TooFewReplicates(1))
        );
        assert_eq!(
            percentile_band(&[vec![1.0], vec![2.0]], 1.0),
            Err(BandError::Alpha(1.0))
        );
        assert!(matches!(
            percentile_band(&[vec![1.0], vec![f64::NAN]], 0.1),
            Err(BandError::NonFinite {
                replicate: 1,
                timestep: 0
            })
        ));
        assert!(matches!(
            percentile_band(&[vec![1.0], vec![]], 0.1),
            Err(BandError::Ragged { .. })
        ));
    }

    proptest! {
        #[test]
        fn ordered_sandwiched_and_monotone_in_alpha(
            rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 6), 2..40),
            a in 0.01f64..0.5,
        ) {
            let wide = percentile_band(&rows, a / 2.0).unwrap();
            let narrow = percentile_band(&rows, a).unwrap();
            for t in 0..6 {
                let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let p = narrow[t];
                prop_assert!(lo <= p.lower && p.lower <= p.median && p.median <= p.upper && p.upper <= hi);
                prop_assert!(wide[t].lower <= p.lower && wide[t].upper >= p.upper);
            }
        }
    }
}
