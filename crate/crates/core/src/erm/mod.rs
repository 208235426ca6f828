//! Losses, ridge-regularized ERM, proximal utilities and test error.

pub mod eval;
pub mod loss;
pub mod prox;
pub mod solver;

pub use eval::{empirical_loss, predictions, test_error, test_predictions};
pub use loss::LossSpec;
pub use prox::{moreau, prox};
pub use solver::{
    fit_ridge_erm, fit_ridge_erm_with, interpolation_check, FitOptions, FitResult, Method,
};
