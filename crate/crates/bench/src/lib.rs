//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use chaoslab_core::erm::LossSpec;
use chaoslab_core::hermite::ActivationSpec;
use chaoslab_core::models::{sample_weights, ModelKind, OutputMap, Sampler, TargetSpec};
use chaoslab_core::SampleBatch;

/// Sampler for `y = sign(1 + 2He₂(x₁) + He₃(x₁))` with relu features.
pub fn sampler(kind: ModelKind, d: usize, p: usize) -> Sampler {
    let we = Arc::new(sample_weights(d, p, 7).expect("valid sizes"));
    let target = TargetSpec::single_index(vec![1.0, 0.0, 2.0, 1.0], OutputMap::Sign);
    let target = if kind == ModelKind::Ge {
        target.chaos_expanded()
    } else {
        target
    };
    Sampler::new(kind, we, &target, ActivationSpec::relu()).expect("valid target")
}

/// Training batch for the fitting benchmarks.
pub fn training_batch(d: usize, p: usize, n: usize) -> SampleBatch {
    sampler(ModelKind::Rf, d, p).batch(n, 11).expect("batch")
}

/// Losses exercised by the fitting benchmarks.
pub const FIT_LOSSES: [LossSpec; 3] = [
    LossSpec::Squared,
    LossSpec::Logistic,
    LossSpec::SmoothedHinge { delta: 0.1 },
];
