//! Criterion benches for the hot paths: phase unwrap + deformed probability,
//! split-step evolution, and the full fringe analysis pipeline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use fringe_core::born::deformed_probability;
use fringe_core::field::WaveField;
use fringe_core::pipeline::{analyze_pattern, noiseless_pattern, ScenarioSpec};
use fringe_core::solver::{evolve, SolverConfig};
use fringe_core::{AnalysisOptions, DeformationParams};

fn bench_deformed_probability(c: &mut Criterion) {
    let params = DeformationParams::new(1.0, 0.05).unwrap();
    let mut group = c.benchmark_group("deformed_probability");
    for &n in &[1 << 12, 1 << 14, 1 << 16] {
        let dx = 40.0 / n as f64;
        let field = WaveField::from_fn(n, -20.0, dx, |x| {
            Complex64::from_polar((-x * x / 50.0).exp() + 0.2, 0.9 * x + 0.1 * (3.0 * x).sin())
        })
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &field, |b, f| {
            b.iter(|| deformed_probability(f, &params, n / 2).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let params = DeformationParams::new(1.0, 0.02).unwrap();
    let n = 1 << 10;
    let dx = 24.0 / n as f64;
    let initial = WaveField::from_fn(n, -12.0, dx, |x| {
        Complex64::new(0.0, 1.5 * x).exp() * (-x * x / 4.0).exp()
    })
    .unwrap();
    c.bench_function("evolve_1024x256_steps", |b| {
        b.iter(|| {
            let cfg = SolverConfig::free(1.0, n, 1e-3, 256);
            evolve(&initial, &cfg, &params).unwrap()
        })
    });
}

fn bench_analysis(c: &mut Criterion) {
    let params = DeformationParams::new(1.0, 0.03).unwrap();
    let options = AnalysisOptions::default();
    let model = ScenarioSpec::five_fringes(0.2).build_model(&params).unwrap();
    let pattern = noiseless_pattern(&model, &params).unwrap();
    c.bench_function("analyze_five_fringes", |b| {
        b.iter(|| analyze_pattern(&pattern, Some(&model), &options).unwrap())
    });
}

criterion_group!(benches, bench_deformed_probability, bench_evolve, bench_analysis);
criterion_main!(benches);
