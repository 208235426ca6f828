//! Random-feature models, their Gaussian-equivalent surrogates and
//! ridge-regularized empirical risk minimization in the quadratic scaling
//! regime `n ≍ p ≍ d²`.
//!
//! * [`hermite`]: Hermite polynomials, chaos bases, symmetric tensors.
//! * [`models`]: RF / GE / PGE / CGE samplers.
//! * [`genericity`]: fourth-moment (contraction) diagnostics.
//! * [`erm`]: losses, prox utilities, ridge ERM, test error.
//! * [`spectra`]: random-matrix structure checks on weight ensembles.
//! * [`experiments`]: experiment runners and the self-test.

pub mod erm;
pub mod experiments;
pub mod error;
pub mod genericity;
pub mod hermite;
pub mod models;
pub mod seed;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
pub use hermite::{ActivationSpec, HermiteCoeffs, MultiIndex, SymTensor};
pub use models::{
    ChaosCoordinate, LinkSpec, ModelKind, NoiseSpec, SampleBatch, Sampler, TargetSpec,
    WeightEnsemble,
};
