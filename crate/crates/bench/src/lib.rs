//! Shared inputs for the benchmarks.

use bootband::lstm::{Example, LstmParams};
use bootband::rng::substream;
use bootband::synthetic::ar1;

/// AR(1) log-returns, the same for every bench run.
pub fn returns(n: usize) -> Vec<f64> {
    ar1(n, 0.5, 0.01, 17)
}

/// Initialised parameters and a minibatch of scaled windows.
pub fn lstm_batch(hidden: usize, lookback: usize, batch: usize) -> (LstmParams, Vec<Example>) {
    let params = LstmParams::init(hidden, &mut substream(3, 0));
    let series: Vec<f64> = (0..lookback + batch)
        .map(|i| 0.5 + 0.4 * (i as f64 * 0.3).sin())
        .collect();
    (params, bootband::lstm::make_examples(&series, lookback))
}
