//! Hermite polynomials, chaos bases, symmetric tensors and activation
//! coefficients.

pub mod basis;
pub mod poly;
pub mod quadrature;
pub mod tensor;
pub mod wick;

pub use basis::{basis_dim, BasisIndexer, MultiIndex};
pub use poly::{he, he_all, hermite_series};
pub use quadrature::{ActivationKind, ActivationSpec, GaussHermite, HermiteCoeffs};
pub use tensor::{
    contract_r, hermite_basis_vector, iota, iota_inverse, iota_with, monic_chaos_eval, q_k,
    SymTensor, Tensor,
};
pub use wick::wick_product_mean;

/// `μ_k = E[σ(G) He_k(G)]`.
pub fn hermite_coeff(sigma: &ActivationSpec, k: usize) -> crate::Result<f64> {
    sigma.hermite_coeff(k)
}
