use ndarray::Array1;

use super::loss::LossSpec;
use crate::error::{Error, Result};
use crate::models::{SampleBatch, Sampler};
use crate::seed::child_seed;
use crate::stats::{mean_se, Estimate};

/// Smallest test size accepted by [`test_error`].
pub const MIN_TEST: usize = 100;
/// Fresh samples are drawn in chunks of this size.
pub const TEST_CHUNK: usize = 2000;

/// Predictions `⟨θ, z_i⟩`.
pub fn predictions(theta: &Array1<f64>, batch: &SampleBatch) -> Array1<f64> {
    batch.z.t().dot(theta)
}

/// Per-sample losses `ℓ(y_i, ⟨θ, z_i⟩)`.
pub fn sample_losses(theta: &Array1<f64>, batch: &SampleBatch, loss: LossSpec) -> Vec<f64> {
    predictions(theta, batch)
        .iter()
        .zip(&batch.y)
        .map(|(&yhat, &y)| loss.value(y, yhat))
        .collect()
}

/// Average loss on a batch, with its standard error.
pub fn empirical_loss(theta: &Array1<f64>, batch: &SampleBatch, loss: LossSpec) -> Estimate {
    mean_se(&sample_losses(theta, batch, loss))
}

/// Predictions and labels on `n_test` fresh draws of `sampler`, generated
/// in chunks of [`TEST_CHUNK`] seeded by `(seed, "test", chunk)`.
pub fn test_predictions(
    theta: &Array1<f64>,
    sampler: &Sampler,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_test < MIN_TEST {
        return Err(Error::Capacity(format!(
            "n_test = {n_test} is below the minimum {MIN_TEST}"
        )));
    }
    if theta.len() != sampler.weights.p() {
        return Err(Error::LengthMismatch {
            expected: sampler.weights.p(),
            got: theta.len(),
        });
    }
    let mut preds = Vec::with_capacity(n_test);
    let mut labels = Vec::with_capacity(n_test);
    let mut chunk = 0u64;
    while preds.len() < n_test {
        let len = TEST_CHUNK.min(n_test - preds.len());
        let b = sampler.batch(len, child_seed(seed, "test", chunk))?;
        preds.extend(predictions(theta, &b));
        labels.extend(b.y.iter().copied());
        chunk += 1;
    }
    Ok((preds, labels))
}

/// `E[ℓ_test(y, ⟨θ, z⟩) | W]` by Monte Carlo over fresh draws of `sampler`.
pub fn test_error(
    theta: &Array1<f64>,
    sampler: &Sampler,
    test_loss: LossSpec,
    n_test: usize,
    seed: u64,
) -> Result<Estimate> {
    let (preds, labels) = test_predictions(theta, sampler, n_test, seed)?;
    let losses: Vec<f64> = preds
        .iter()
        .zip(&labels)
        .map(|(&yhat, &y)| test_loss.value(y, yhat))
        .collect();
    Ok(mean_se(&losses))
}
