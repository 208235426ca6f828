use chaoslab_bench::{sampler, training_batch, FIT_LOSSES};
use chaoslab_core::erm::{fit_ridge_erm_with, FitOptions, Method};
use chaoslab_core::hermite::{q_k, ActivationSpec};
use chaoslab_core::models::{sample_weights, ModelKind};
use chaoslab_core::spectra::{higher_gram_structure, v2_spike_decomposition};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn hermite(c: &mut Criterion) {
    let w = sample_weights(40, 1, 1).unwrap();
    let row = w.w().row(0).to_owned();
    let mut g = c.benchmark_group("q_k");
    for k in [2usize, 3] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| q_k(black_box(row.view()), k).unwrap())
        });
    }
    g.finish();
    c.bench_function("relu_hermite_coeffs", |b| {
        b.iter(|| black_box(ActivationSpec::relu()).hermite_coeffs().unwrap())
    });
}

fn batches(c: &mut Criterion) {
    let mut g = c.benchmark_group("batch_d30_p450_n200");
    g.sample_size(10);
    for kind in ModelKind::ALL {
        let s = sampler(kind, 30, 450);
        g.bench_function(kind.tag(), |b| b.iter(|| s.batch(200, black_box(3)).unwrap()));
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let batch = training_batch(20, 200, 400);
    let mut g = c.benchmark_group("fit_d20_p200_n400");
    g.sample_size(10);
    for loss in FIT_LOSSES {
        for method in [Method::Agd, Method::Lbfgs] {
            let opts = FitOptions {
                tol: 1e-6,
                method,
                ..FitOptions::default()
            };
            g.bench_function(format!("{}/{method:?}", loss.name()), |b| {
                b.iter(|| fit_ridge_erm_with(&batch, loss, 1e-3, &opts).unwrap())
            });
        }
    }
    g.finish();
}

fn spectra(c: &mut Criterion) {
    let we = sample_weights(30, 450, 5).unwrap();
    let mut g = c.benchmark_group("spectra_d30_p450");
    g.sample_size(10);
    g.bench_function("v2_spike", |b| b.iter(|| v2_spike_decomposition(&we, 4096).unwrap()));
    g.bench_function("hadamard_k3", |b| b.iter(|| higher_gram_structure(&we, 3, 4096).unwrap()));
    g.finish();
}

criterion_group!(benches, hermite, batches, fitting, spectra);
criterion_main!(benches);
