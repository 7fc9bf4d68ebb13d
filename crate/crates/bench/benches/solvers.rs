use std::hint::black_box;

use cocwave::meanfield::{
    compute_h, defp_integrate, left_regulated_fp, DefpOptions, RegulatedOptions,
};
use cocwave::sim::replica_rng;
use cocwave::{levy_distance, Frame, TailField};
use cocwave_bench::{exp_field, exp_pair, mixed, random_samples};
use criterion::{criterion_group, criterion_main, Criterion};

fn h(c: &mut Criterion) {
    let x = exp_field();
    let pair = exp_pair(Frame::FREE, 0.0);
    let mix = mixed(Frame::FREE, 0.0);
    c.bench_function("compute_h/exp_pair", |b| {
        b.iter(|| compute_h(black_box(&x), 0.7, &pair).unwrap())
    });
    c.bench_function("compute_h/mixed", |b| {
        b.iter(|| compute_h(black_box(&x), 0.7, &mix).unwrap())
    });
}

fn shooting(c: &mut Criterion) {
    let cfg = exp_pair(Frame::FREE, 0.0);
    let opts = DefpOptions::default();
    let mut g = c.benchmark_group("fixed_point");
    g.sample_size(10);
    g.bench_function("defp_hit_v0.8", |b| {
        b.iter(|| defp_integrate(&cfg, black_box(0.8), &opts).unwrap())
    });
    let left = exp_pair(Frame::left(0.0), 2.0);
    let reg = RegulatedOptions::default();
    g.bench_function("left_regulated_v2", |b| {
        b.iter(|| left_regulated_fp(&left, black_box(2.0), &reg).unwrap())
    });
    g.finish();
}

fn levy(c: &mut Criterion) {
    let mut rng = replica_rng(3, 0);
    let emp = TailField::from_samples(&random_samples(10_000, &mut rng)).unwrap();
    let exact = exp_field();
    c.bench_function("levy_distance/10k_vs_grid", |b| {
        b.iter(|| levy_distance(black_box(&emp), black_box(&exact)))
    });
}

criterion_group!(benches, h, shooting, levy);
criterion_main!(benches);
