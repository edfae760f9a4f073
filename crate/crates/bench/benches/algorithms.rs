use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dpnormci_core::ci::{ci_known_variance, ci_unknown_variance, KnownVarRequest, SplitMode, UnknownVarRequest};
use dpnormci_core::distributions::{sample_gaussian, std_normal_quantile, student_t_quantile};
use dpnormci_core::histogram::{empirical_counts, laplace_histogram, BinningScheme};
use dpnormci_core::{GatePolicy, ParameterBounds, PrivacyBudget, RngStream, Sample};

fn gaussian(n: usize, seed: u64) -> Sample {
    let mut rng = RngStream::new(seed, 0);
    Sample::new((0..n).map(|_| sample_gaussian(&mut rng, 0.5, 1.0).unwrap()).collect()).unwrap()
}

fn quantiles(c: &mut Criterion) {
    c.bench_function("std_normal_quantile", |b| b.iter(|| std_normal_quantile(black_box(0.975)).unwrap()));
    c.bench_function("student_t_quantile df=99", |b| b.iter(|| student_t_quantile(black_box(99), black_box(0.975)).unwrap()));
}

fn histogram(c: &mut Criterion) {
    let s = gaussian(10_000, 1);
    let scheme = BinningScheme::fixed_width_symmetric(1.0, 10).unwrap();
    let budget = PrivacyBudget::pure(1.0).unwrap();
    c.bench_function("laplace_histogram n=1e4 K=21", |b| {
        let mut rng = RngStream::new(2, 0);
        b.iter(|| {
            let counts = empirical_counts(&s, &scheme);
            laplace_histogram(&counts, &scheme, &budget, &mut rng).unwrap()
        })
    });
}

fn intervals(c: &mut Criterion) {
    let s = gaussian(10_000, 3);
    let known = KnownVarRequest {
        sample: s.clone(),
        sigma: 1.0,
        budget: PrivacyBudget::pure(1.0).unwrap(),
        alpha: 0.05,
        big_r: 10.0,
        split_mode: SplitMode::Basic,
        seed: 4,
        gate_policy: GatePolicy::Enforce,
    };
    c.bench_function("ci_known_variance n=1e4", |b| b.iter(|| ci_known_variance(black_box(&known)).unwrap()));
    let unknown = UnknownVarRequest {
        sample: s,
        budget: PrivacyBudget::pure(1.0).unwrap(),
        alpha: 0.05,
        bounds: ParameterBounds::new(10.0, 0.1, 10.0).unwrap(),
        split_mode: SplitMode::Basic,
        seed: 5,
        gate_policy: GatePolicy::Bypass,
    };
    c.bench_function("ci_unknown_variance n=1e4", |b| b.iter(|| ci_unknown_variance(black_box(&unknown)).unwrap()));
}

criterion_group!(benches, quantiles, histogram, intervals);
criterion_main!(benches);
