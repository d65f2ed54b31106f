//! Single-layer LSTM regressor with a scalar dense head.
//!
//! Gate equations for one step with input `x` and previous state `(h, c)`:
//!
//! ```text
//! f = σ(W_f x + U_f h + b_f)      i = σ(W_i x + U_i h + b_i)
//! o = σ(W_o x + U_o h + b_o)      g = tanh(W_c x + U_c h + b_c)
//! c' = i ⊙ g + f ⊙ c              h' = o ⊙ tanh(c')
//! ```
//!
//! A lookback window is unrolled from the zero state, inverted dropout is
//! applied to the last hidden state during training, and the prediction is
//! `dense_w · h_T + dense_b`. Training minimises batch MSE plus an L2 penalty
//! on the input kernels `W_·` and `dense_w` with Adam.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;

#[derive(Debug, Error, PartialEq)]
pub enum LstmError {
    #[error("window has {got} values, model expects {expected}")]
    WindowLength { got: usize, expected: usize },
    #[error("series of {len} values is too short for lookback {lookback}")]
    TooShort { len: usize, lookback: usize },
    #[error("position {position} lacks a full lookback window in a context of {len}")]
    InsufficientContext { position: usize, len: usize },
    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("model document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Output,
    Cell,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Output, Gate::Cell];

    fn index(self) -> usize {
        self as usize
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Cell => "c",
        }
    }
}

/// All weights in one flat buffer.
///
/// Per gate `[W (H), U (H×H, row-major), b (H)]`, then `dense_w (H)` and
/// `dense_b`. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden: usize,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize) -> Self {
        assert!(hidden >= 1, "hidden size must be positive");
        Self {
            hidden,
            data: vec![0.0; Self::len_for(hidden)],
        }
    }

    /// Uniform `±1/√H` weights, zero biases, forget bias 1.
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        for g in Gate::ALL {
            for v in p.w_mut(g).iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
            for v in p.u_mut(g).iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        for v in p.dense_w_mut().iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        p.b_mut(Gate::Forget).fill(1.0);
        p
    }

    fn len_for(hidden: usize) -> usize {
        4 * (hidden + hidden * hidden + hidden) + hidden + 1
    }

    fn gate_offset(&self, g: Gate) -> usize {
        let h = self.hidden;
        g.index() * (2 * h + h * h)
    }

    fn w_range(&self, g: Gate) -> Range<usize> {
        let s = self.gate_offset(g);
        s..s + self.hidden
    }

    fn u_range(&self, g: Gate) -> Range<usize> {
        let s = self.gate_offset(g) + self.hidden;
        s..s + self.hidden * self.hidden
    }

    fn b_range(&self, g: Gate) -> Range<usize> {
        let s = self.gate_offset(g) + self.hidden + self.hidden * self.hidden;
        s..s + self.hidden
    }

    fn dense_w_range(&self) -> Range<usize> {
        let s = 4 * (2 * self.hidden + self.hidden * self.hidden);
        s..s + self.hidden
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w(&self, g: Gate) -> &[f64] {
        &self.data[self.w_range(g)]
    }

    pub fn u(&self, g: Gate) -> &[f64] {
        &self.data[self.u_range(g)]
    }

    pub fn b(&self, g: Gate) -> &[f64] {
        &self.data[self.b_range(g)]
    }

    pub fn dense_w(&self) -> &[f64] {
        &self.data[self.dense_w_range()]
    }

    pub fn dense_b(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn w_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.w_range(g);
        &mut self.data[r]
    }

    pub fn u_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.u_range(g);
        &mut self.data[r]
    }

    pub fn b_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.b_range(g);
        &mut self.data[r]
    }

    pub fn dense_w_mut(&mut self) -> &mut [f64] {
        let r = self.dense_w_range();
        &mut self.data[r]
    }

    pub fn dense_b_mut(&mut self) -> &mut f64 {
        let last = self.data.len() - 1;
        &mut self.data[last]
    }

    /// Index ranges of the L2-regularised kernels.
    pub fn kernel_ranges(&self) -> Vec<Range<usize>> {
        let mut r: Vec<_> = Gate::ALL.iter().map(|&g| self.w_range(g)).collect();
        r.push(self.dense_w_range());
        r
    }

    /// Sum of squares over the kernels.
    pub fn kernel_norm_sq(&self) -> f64 {
        self.kernel_ranges()
            .into_iter()
            .flat_map(|r| self.data[r].iter())
            .map(|v| v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Named tensors with shapes: `(name, [rows, cols], values)`.
    pub fn tensors(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let h = self.hidden;
        let mut out = Vec::with_capacity(14);
        for g in Gate::ALL {
            out.push((format!("W_{}", g.suffix()), [h, 1], self.w(g)));
        }
        for g in Gate::ALL {
            out.push((format!("U_{}", g.suffix()), [h, h], self.u(g)));
        }
        for g in Gate::ALL {
            out.push((format!("b_{}", g.suffix()), [h, 1], self.b(g)));
        }
        out.push(("dense_W".to_owned(), [1, h], self.dense_w()));
        let last = self.data.len() - 1;
        out.push(("dense_b".to_owned(), [1, 1], &self.data[last..]));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: f64,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One cell update.
pub fn cell_step(params: &LstmParams, state: &LstmState, x: f64) -> (LstmState, StepCache) {
    let h = params.hidden;
    let mut pre = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for gate in Gate::ALL {
        let (w, u, b) = (params.w(gate), params.u(gate), params.b(gate));
        let z = &mut pre[gate.index()];
        for j in 0..h {
            let row = &u[j * h..(j + 1) * h];
            let rec: f64 = row.iter().zip(&state.h).map(|(a, b)| a * b).sum();
            z[j] = w[j] * x + rec + b[j];
        }
    }
    let [zf, zi, zo, zg] = pre;
    let f: Vec<f64> = zf.into_iter().map(sigmoid).collect();
    let i: Vec<f64> = zi.into_iter().map(sigmoid).collect();
    let o: Vec<f64> = zo.into_iter().map(sigmoid).collect();
    let g: Vec<f64> = zg.into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..h).map(|j| i[j] * g[j] + f[j] * state.c[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_new: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
    let cache = StepCache {
        x,
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        f,
        i,
        o,
        g,
        c: c.clone(),
        tanh_c,
    };
    (LstmState { h: h_new, c }, cache)
}

/// Everything a forward pass over one window produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub steps: Vec<StepCache>,
    pub h_last: Vec<f64>,
    /// Inverted-dropout multipliers on `h_last`, if training.
    pub mask: Option<Vec<f64>>,
    pub prediction: f64,
}

/// Unrolls `window` from the zero state. `mask` multiplies the final hidden
/// state elementwise.
pub fn forward(params: &LstmParams, window: &[f64], mask: Option<&[f64]>) -> ForwardCache {
    let mut state = LstmState::zeros(params.hidden);
    let mut steps = Vec::with_capacity(window.len());
    for &x in window {
        let (next, cache) = cell_step(params, &state, x);
        steps.push(cache);
        state = next;
    }
    let dense = params.dense_w();
    let prediction = match mask {
        Some(m) => state
            .h
            .iter()
            .zip(m)
            .zip(dense)
            .map(|((h, m), w)| h * m * w)
            .sum::<f64>(),
        None => state.h.iter().zip(dense).map(|(h, w)| h * w).sum::<f64>(),
    } + params.dense_b();
    ForwardCache {
        steps,
        h_last: state.h,
        mask: mask.map(<[f64]>::to_vec),
        prediction,
    }
}

/// Inference-mode prediction for one window.
pub fn predict_window(params: &LstmParams, window: &[f64]) -> f64 {
    forward(params, window, None).prediction
}

/// A supervised pair: lookback window and the value that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub window: Vec<f64>,
    pub target: f64,
}

/// Sliding `lookback` windows over `series`, each paired with the next value.
pub fn make_examples(series: &[f64], lookback: usize) -> Vec<Example> {
    if series.len() <= lookback {
        return Vec::new();
    }
    (0..series.len() - lookback)
        .map(|s| Example {
            window: series[s..s + lookback].to_vec(),
            target: series[s + lookback],
        })
        .collect()
}

/// Forward passes for a batch; `masks[k]` goes with `batch[k]`.
pub fn forward_batch(
    params: &LstmParams,
    batch: &[Example],
    masks: Option<&[Vec<f64>]>,
) -> Vec<ForwardCache> {
    batch
        .iter()
        .enumerate()
        .map(|(k, ex)| forward(params, &ex.window, masks.map(|m| m[k].as_slice())))
        .collect()
}

/// Batch MSE plus `l2_coeff · Σ‖W‖²` over the kernels.
pub fn loss(
    params: &LstmParams,
    batch: &[Example],
    masks: Option<&[Vec<f64>]>,
    l2_coeff: f64,
) -> f64 {
    let caches = forward_batch(params, batch, masks);
    loss_from_caches(params, batch, &caches, l2_coeff)
}

fn loss_from_caches(
    params: &LstmParams,
    batch: &[Example],
    caches: &[ForwardCache],
    l2_coeff: f64,
) -> f64 {
    let mse = caches
        .iter()
        .zip(batch)
        .map(|(c, ex)| (c.prediction - ex.target).powi(2))
        .sum::<f64>()
        / batch.len() as f64;
    mse + l2_coeff * params.kernel_norm_sq()
}

/// Gradient of [`loss`] with respect to every parameter, by backpropagation
/// through time over the cached forward passes.
pub fn backward(
    params: &LstmParams,
    batch: &[Example],
    caches: &[ForwardCache],
    l2_coeff: f64,
) -> LstmParams {
    let h = params.hidden;
    let mut grad = LstmParams::zeros(h);
    let scale = 2.0 / batch.len() as f64;

    let mut dz = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for (cache, ex) in caches.iter().zip(batch) {
        let dpred = scale * (cache.prediction - ex.target);
        *grad.dense_b_mut() += dpred;

        let mut dh: Vec<f64> = params.dense_w().iter().map(|w| dpred * w).collect();
        {
            let gw = grad.dense_w_mut();
            for j in 0..h {
                let m = cache.mask.as_ref().map_or(1.0, |m| m[j]);
                gw[j] += dpred * cache.h_last[j] * m;
                dh[j] *= m;
            }
        }

        let mut dc_next = vec![0.0; h];
        for step in cache.steps.iter().rev() {
            for j in 0..h {
                let dc = dc_next[j] + dh[j] * step.o[j] * (1.0 - step.tanh_c[j].powi(2));
                let d_o = dh[j] * step.tanh_c[j];
                let d_f = dc * step.c_prev[j];
                let d_i = dc * step.g[j];
                let d_g = dc * step.i[j];
                dz[Gate::Forget.index()][j] = d_f * step.f[j] * (1.0 - step.f[j]);
                dz[Gate::Input.index()][j] = d_i * step.i[j] * (1.0 - step.i[j]);
                dz[Gate::Output.index()][j] = d_o * step.o[j] * (1.0 - step.o[j]);
                dz[Gate::Cell.index()][j] = d_g * (1.0 - step.g[j] * step.g[j]);
                dc_next[j] = dc * step.f[j];
            }
            let mut dh_prev = vec![0.0; h];
            for gate in Gate::ALL {
                let dzg = &dz[gate.index()];
                for (w, d) in grad.w_mut(gate).iter_mut().zip(dzg) {
                    *w += d * step.x;
                }
                for (b, d) in grad.b_mut(gate).iter_mut().zip(dzg) {
                    *b += d;
                }
                let gu = grad.u_mut(gate);
                for j in 0..h {
                    for k in 0..h {
                        gu[j * h + k] += dzg[j] * step.h_prev[k];
                    }
                }
                let u = params.u(gate);
                for j in 0..h {
                    let d = dzg[j];
                    for k in 0..h {
                        dh_prev[k] += u[j * h + k] * d;
                    }
                }
            }
            dh = dh_prev;
        }
    }

    if l2_coeff != 0.0 {
        for r in params.kernel_ranges() {
            for idx in r {
                grad.data[idx] += 2.0 * l2_coeff * params.data[idx];
            }
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update; increments `state.step`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    debug_assert_eq!(params.len(), grads.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lookback: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub l2_coeff: f64,
    pub hidden_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 5,
            batch_size: 15,
            epochs: 19,
            dropout: 0.2,
            l2_coeff: 1e-4,
            hidden_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::Config(m.to_owned()));
        if self.lookback == 0 {
            return bad("lookback must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l2_coeff >= 0.0 && self.l2_coeff.is_finite()) {
            return bad("l2 coefficient must be non-negative");
        }
        if !self.adam.lr.is_finite() || self.adam.lr <= 0.0 {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

/// A trained network with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub params: LstmParams,
    pub lookback: usize,
    pub optimizer: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the minibatch training losses (dropout active).
    pub mean_batch_loss: f64,
    /// Inference-mode RMSE over all training pairs, in scaled units.
    pub train_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: LstmModel,
    pub log: Vec<EpochLog>,
}

pub fn fit(series: &[f64], cfg: &TrainConfig) -> Result<FitResult, LstmError> {
    fit_observed(series, cfg, |_, _| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_observed<F>(
    series: &[f64],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<FitResult, LstmError>
where
    F: FnMut(&EpochLog, &LstmParams),
{
    cfg.check()?;
    if series.len() <= cfg.lookback {
        return Err(LstmError::TooShort {
            len: series.len(),
            lookback: cfg.lookback,
        });
    }
    let examples = make_examples(series, cfg.lookback);
    let mut init_rng = substream(cfg.seed, 0);
    let mut rng = substream(cfg.seed, 1);
    let mut params = LstmParams::init(cfg.hidden_size, &mut init_rng);
    let mut opt = AdamState::new(params.len());
    let keep = 1.0 - cfg.dropout;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Example> = idx.iter().map(|&k| examples[k].clone()).collect();
            let masks: Option<Vec<Vec<f64>>> = (cfg.dropout > 0.0).then(|| {
                batch
                    .iter()
                    .map(|_| {
                        (0..cfg.hidden_size)
                            .map(|_| {
                                if rng.random::<f64>() < cfg.dropout {
                                    0.0
                                } else {
                                    1.0 / keep
                                }
                            })
                            .collect()
                    })
                    .collect()
            });
            let caches = forward_batch(&params, &batch, masks.as_deref());
            let l = loss_from_caches(&params, &batch, &caches, cfg.l2_coeff);
            if !l.is_finite() {
                return Err(LstmError::Diverged {
                    epoch,
                    batch: b,
                    loss: l,
                });
            }
            let grad = backward(&params, &batch, &caches, cfg.l2_coeff);
            adam_step(params.as_mut_slice(), grad.as_slice(), &mut opt, &cfg.adam);
            if !params.is_finite() {
                return Err(LstmError::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
            loss_sum += l;
            batches += 1;
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            mean_batch_loss: loss_sum / batches as f64,
            train_rmse: rmse(&params, &examples),
        };
        on_epoch(&entry, &params);
        log.push(entry);
    }

    Ok(FitResult {
        model: LstmModel {
            params,
            lookback: cfg.lookback,
            optimizer: opt,
        },
        log,
    })
}

/// Inference-mode RMSE over `examples`.
pub fn rmse(params: &LstmParams, examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let sq: f64 = examples
        .iter()
        .map(|ex| (predict_window(params, &ex.window) - ex.target).powi(2))
        .sum();
    (sq / examples.len() as f64).sqrt()
}

/// One-step-ahead predictions for each position in `positions`, each from
/// the `lookback` actual values of `context` just before it. A position may
/// equal `context.len()` (forecast past the end).
pub fn predict_series(
    model: &LstmModel,
    context: &[f64],
    positions: Range<usize>,
) -> Result<Vec<f64>, LstmError> {
    let lb = model.lookback;
    positions
        .map(|p| {
            if p < lb || p > context.len() {
                return Err(LstmError::InsufficientContext {
                    position: p,
                    len: context.len(),
                });
            }
            Ok(predict_window(&model.params, &context[p - lb..p]))
        })
        .collect()
}

pub const MODEL_FORMAT: &str = "bootband-lstm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorDoc {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    hidden_size: usize,
    input_size: usize,
    lookback: usize,
    tensors: Vec<TensorDoc>,
    optimizer: AdamState,
}

impl LstmModel {
    /// Versioned JSON document: shapes and row-major values per tensor.
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            hidden_size: self.params.hidden,
            input_size: 1,
            lookback: self.lookback,
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|(name, shape, values)| TensorDoc {
                    name,
                    shape,
                    values: values.to_vec(),
                })
                .collect(),
            optimizer: self.optimizer.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LstmError> {
        let doc: ModelDoc =
            serde_json::from_str(s).map_err(|e| LstmError::Document(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(LstmError::Document(format!(
                "unsupported format {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.input_size != 1 {
            return Err(LstmError::Document("only input_size 1 is supported".into()));
        }
        let mut params = LstmParams::zeros(doc.hidden_size);
        let expected = params.tensors();
        if expected.len() != doc.tensors.len() {
            return Err(LstmError::Document("wrong tensor count".into()));
        }
        let mut data = Vec::with_capacity(params.len());
        // Tensor order in the document matches the flat layout except for the
        // gate interleaving, so place by name.
        let mut by_name = std::collections::HashMap::new();
        for t in &doc.tensors {
            by_name.insert(t.name.as_str(), t);
        }
        let h = doc.hidden_size;
        let fetch = |name: &str, shape: [usize; 2]| -> Result<&[f64], LstmError> {
            let t = by_name
                .get(name)
                .ok_or_else(|| LstmError::Document(format!("missing tensor {name}")))?;
            if t.shape != shape || t.values.len() != shape[0] * shape[1] {
                return Err(LstmError::Document(format!("bad shape for {name}")));
            }
            Ok(&t.values)
        };
        for g in Gate::ALL {
            data.extend_from_slice(fetch(&format!("W_{}", g.suffix()), [h, 1])?);
            data.extend_from_slice(fetch(&format!("U_{}", g.suffix()), [h, h])?);
            data.extend_from_slice(fetch(&format!("b_{}", g.suffix()), [h, 1])?);
        }
        data.extend_from_slice(fetch("dense_W", [1, h])?);
        data.extend_from_slice(fetch("dense_b", [1, 1])?);
        params.data = data;
        if doc.optimizer.m.len() != params.len() || doc.optimizer.v.len() != params.len() {
            return Err(LstmError::Document("optimizer state size mismatch".into()));
        }
        Ok(Self {
            params,
            lookback: doc.lookback,
            optimizer: doc.optimizer,
        })
    }
}
