use bootband::lstm::{
    backward, cell_step, forward_batch, loss, Example, Gate, LstmParams, LstmState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng) -> (LstmParams, Vec<Example>, Vec<Vec<f64>>, f64) {
    let hidden = rng.random_range(1..=4);
    let lookback = rng.random_range(1..=3);
    let batch_len = rng.random_range(1..=4);
    let mut params = LstmParams::zeros(hidden);
    for v in params.as_mut_slice() {
        *v = rng.random_range(-1.0..1.0);
    }
    let batch = (0..batch_len)
        .map(|_| Example {
            window: (0..lookback).map(|_| rng.random_range(0.0..1.0)).collect(),
            target: rng.random_range(0.0..1.0),
        })
        .collect();
    let masks = (0..batch_len)
        .map(|_| {
            (0..hidden)
                .map(|_| if rng.random_bool(0.25) { 0.0 } else { 1.25 })
                .collect()
        })
        .collect();
    let l2 = if rng.random_bool(0.5) {
        rng.random_range(0.0..0.1)
    } else {
        0.0
    };
    (params, batch, masks, l2)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..150 {
        let (params, batch, masks, l2) = random_instance(&mut rng);
        let caches = forward_batch(&params, &batch, Some(&masks));
        let grad = backward(&params, &batch, &caches, l2);
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[k] += step;
            let mut minus = params.clone();
            minus.as_mut_slice()[k] -= step;
            let fd = (loss(&plus, &batch, Some(&masks), l2)
                - loss(&minus, &batch, Some(&masks), l2))
                / (2.0 * step);
            let e = rel_err(grad.as_slice()[k], fd);
            worst = worst.max(e);
            assert!(
                e < 1e-4,
                "trial {trial} param {k}: analytic {} vs fd {fd}",
                grad.as_slice()[k]
            );
        }
    }
    eprintln!("worst relative error {worst:e}");
}

/// Loss written out directly from the gate equations, no shared code paths.
fn naive_loss(
    w: [f64; 4],
    u: [f64; 4],
    b: [f64; 4],
    dense: (f64, f64),
    window: &[f64],
    y: f64,
    l2: f64,
) -> f64 {
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let (mut h, mut c) = (0.0, 0.0);
    for &x in window {
        let f = sig(w[0] * x + u[0] * h + b[0]);
        let i = sig(w[1] * x + u[1] * h + b[1]);
        let o = sig(w[2] * x + u[2] * h + b[2]);
        let g = (w[3] * x + u[3] * h + b[3]).tanh();
        c = i * g + f * c;
        h = o * c.tanh();
    }
    let pred = dense.0 * h + dense.1;
    let kernels: f64 = w.iter().map(|v| v * v).sum::<f64>() + dense.0 * dense.0;
    (pred - y).powi(2) + l2 * kernels
}

#[test]
fn scalar_loss_matches_naive_oracle() {
    let w = [0.3, -0.7, 0.5, 1.1];
    let u = [0.2, 0.4, -0.6, 0.9];
    let b = [1.0, 0.1, -0.2, 0.05];
    let dense = (1.7, -0.3);
    let mut p = LstmParams::zeros(1);
    for (k, g) in Gate::ALL.iter().enumerate() {
        p.w_mut(*g)[0] = w[k];
        p.u_mut(*g)[0] = u[k];
        p.b_mut(*g)[0] = b[k];
    }
    p.dense_w_mut()[0] = dense.0;
    *p.dense_b_mut() = dense.1;
    let window = [0.2, 0.9, 0.4];
    let ex = [Example {
        window: window.to_vec(),
        target: 0.8,
    }];
    let got = loss(&p, &ex, None, 0.01);
    let want = naive_loss(w, u, b, dense, &window, 0.8, 0.01);
    assert!((got - want).abs() < 1e-15, "{got} vs {want}");
}

#[test]
fn states_stay_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let hidden = rng.random_range(1..=6);
        let mut p = LstmParams::zeros(hidden);
        for v in p.as_mut_slice() {
            *v = rng.random_range(-5.0..5.0);
        }
        let mut st = LstmState::zeros(hidden);
        for _ in 0..10 {
            let (next, cache) = cell_step(&p, &st, rng.random_range(-3.0..3.0));
            assert!(next.h.iter().all(|h| h.abs() <= 1.0));
            for gate in [&cache.f, &cache.i, &cache.o] {
                assert!(gate.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            st = next;
        }
    }
}
