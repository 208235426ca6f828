//! Weight ensembles, targets and the RF / GE / PGE / CGE samplers.

pub mod io;
pub mod sampler;
pub mod target;
pub mod weights;

pub use sampler::{
    cge_batch, ge_batch_quadratic, pge_batch, rf_batch, ModelKind, SampleBatch, Sampler,
};
pub use target::{
    sign, ChaosCoordinate, Coefficients, IndexMap, LinkSpec, NoiseSpec, OutputMap,
    PreparedTarget, ResolvedCoordinate, TargetSpec,
};
pub use weights::{canonical_frame, sample_weights, DirectionCache, WeightEnsemble};
