use std::hint::black_box;

use bootband::band::percentile_band;
use bootband::blocklen::{select_block_length_for, SelectorConfig};
use bootband::bootstrap::{batch_resample, BlockPlan, Method};
use bootband::lstm::{backward, forward_batch};
use bootband_bench::{lstm_batch, returns};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn resamplers(c: &mut Criterion) {
    let x = returns(800);
    let mut group = c.benchmark_group("resample_100");
    for method in Method::ALL {
        let plan = BlockPlan::new(method, 6, 1);
        group.bench_with_input(BenchmarkId::from_parameter(method), &plan, |b, plan| {
            b.iter(|| batch_resample(black_box(&x), plan, 100).unwrap())
        });
    }
    group.finish();
}

fn selector(c: &mut Criterion) {
    let x = returns(800);
    let mut cfg = SelectorConfig::new(Method::Lbb, x.len(), 1);
    cfg.l_max = 20;
    cfg.reps = 50;
    c.bench_function("select_lbb_l1_20_m50", |b| {
        b.iter(|| select_block_length_for(black_box(&x), &cfg).unwrap())
    });
}

fn lstm(c: &mut Criterion) {
    let mut group = c.benchmark_group("lstm_batch15");
    for hidden in [8usize, 32] {
        let (params, batch) = lstm_batch(hidden, 5, 15);
        group.bench_with_input(BenchmarkId::new("forward", hidden), &hidden, |b, _| {
            b.iter(|| forward_batch(black_box(&params), &batch, None))
        });
        let caches = forward_batch(&params, &batch, None);
        group.bench_with_input(BenchmarkId::new("backward", hidden), &hidden, |b, _| {
            b.iter(|| backward(black_box(&params), &batch, &caches, 1e-4))
        });
    }
    group.finish();
}

fn band(c: &mut Criterion) {
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|i| {
            (0..459)
                .map(|t| ((i * 7919 + t * 104_729) % 1000) as f64)
                .collect()
        })
        .collect();
    c.bench_function("percentile_band_1000x459", |b| {
        b.iter(|| percentile_band(black_box(&rows), 0.05).unwrap())
    });
}

criterion_group!(benches, resamplers, selector, lstm, band);
criterion_main!(benches);
