//! Fourth-moment diagnostics for chaos coefficients.

use ndarray::{Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::basis_dim;
use crate::models::target::{sphere_vector, ChaosCoordinate, ResolvedCoordinate};
use crate::seed::{child_seed, rng_from_seed};
use crate::stats::{jackknife, Estimate};

/// Smallest Monte Carlo size accepted.
pub const MIN_MC: usize = 1000;
const MC_CHUNK: usize = 50_000;

/// Default genericity tolerance `d^{-1/4}`.
pub fn default_tolerance(d: usize) -> f64 {
    (d as f64).powf(-0.25)
}

/// `‖ι(β) ⊗_r ι(β)‖_F` for `r = 1..k−1`.
pub fn contraction_norms(beta: &ChaosCoordinate, d: usize) -> Result<Vec<f64>> {
    resolved_contraction_norms(&beta.resolve(d)?)
}

pub fn resolved_contraction_norms(c: &ResolvedCoordinate) -> Result<Vec<f64>> {
    match c {
        ResolvedCoordinate::RankOne { order, u } => {
            if !(2..=3).contains(order) {
                return Err(unsupported(*order));
            }
            let n2 = u.dot(u);
            Ok(vec![n2.powi(*order as i32); order - 1])
        }
        ResolvedCoordinate::Dense2 { matrix, .. } => {
            Ok(vec![frobenius(&matrix.dot(matrix))])
        }
        ResolvedCoordinate::Dense3 { tensor, .. } => {
            let t = tensor.as_tensor();
            let m1 = t.matricize(1);
            let m2 = t.matricize(2);
            Ok(vec![frobenius(&m1.dot(&m1.t())), frobenius(&m2.t().dot(&m2))])
        }
    }
}

fn unsupported(k: usize) -> Error {
    Error::UnsupportedOrder {
        k,
        reason: "contraction norms need k ∈ {2, 3}",
    }
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Monte Carlo draws of `ξ = ⟨β, h_k(x)⟩`.
fn chaos_draws(c: &ResolvedCoordinate, d: usize, n_mc: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_mc);
    let mut start = 0;
    let mut chunk_ix = 0;
    while start < n_mc {
        let len = MC_CHUNK.min(n_mc - start);
        let mut rng = rng_from_seed(child_seed(seed, "mc", chunk_ix));
        let mut x = Array2::<f64>::zeros((d, len));
        for mut col in x.axis_iter_mut(Axis(1)) {
            col.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        }
        out.extend(c.eval_exact(x.view()));
        start += len;
        chunk_ix += 1;
    }
    out
}

/// `E[ξ⁴] − 3` by Monte Carlo, with a grouped jackknife standard error.
pub fn excess_kurtosis_mc(
    beta: &ChaosCoordinate,
    d: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_mc < MIN_MC {
        return Err(Error::Capacity(format!(
            "n_mc = {n_mc} is below the minimum {MIN_MC}"
        )));
    }
    let c = beta.resolve(d)?;
    if c.order() > 3 {
        return Err(Error::UnsupportedOrder {
            k: c.order(),
            reason: "kurtosis estimation supports k ≤ 3",
        });
    }
    let fourth: Vec<f64> = chaos_draws(&c, d, n_mc, seed)
        .into_iter()
        .map(|v| v.powi(4))
        .collect();
    Ok(jackknife(&fourth, 100, |x| {
        x.iter().sum::<f64>() / x.len() as f64 - 3.0
    }))
}

/// `12‖B²‖_F²`, the exact excess kurtosis of an order-2 coordinate.
pub fn exact_kurtosis_order2(beta: &ChaosCoordinate, d: usize) -> Result<f64> {
    let c = beta.resolve(d)?;
    if c.order() != 2 {
        return Err(Error::UnsupportedOrder {
            k: c.order(),
            reason: "the exact kurtosis identity needs k = 2",
        });
    }
    let norms = resolved_contraction_norms(&c)?;
    Ok(12.0 * norms[0] * norms[0])
}

/// Both sides of the contraction bound on the excess kurtosis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `max_r ‖T ⊗_r T‖_F²`.
    pub contraction_sq: f64,
    /// `12‖T ⊗_1 T‖_F²`.
    pub exact: f64,
    pub kurtosis: f64,
    pub se: f64,
    /// Bound constant `C`.
    pub constant: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub exact_ok: bool,
    pub pass: bool,
}

/// Bound constant used by [`kurtosis_contraction_consistency`].
pub const BOUND_CONSTANT: f64 = 12.0;

/// Check `C⁻¹·c² ≤ κ ≤ C·c²` and `κ = 12c²` at 4 SE, for `k = 2`.
pub fn kurtosis_contraction_consistency(
    beta: &ChaosCoordinate,
    d: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if beta.order != 2 {
        return Err(Error::UnsupportedOrder {
            k: beta.order,
            reason: "the consistency check needs k = 2",
        });
    }
    let norms = contraction_norms(beta, d)?;
    let c2 = norms.iter().fold(0.0f64, |a, b| a.max(b * b));
    let exact = 12.0 * c2;
    let est = excess_kurtosis_mc(beta, d, n_mc, seed)?;
    let slack = 4.0 * est.se;
    let lower_ok = est.value + slack >= c2 / BOUND_CONSTANT;
    let upper_ok = est.value - slack <= BOUND_CONSTANT * c2;
    let exact_ok = (est.value - exact).abs() <= slack;
    Ok(ConsistencyReport {
        contraction_sq: c2,
        exact,
        kurtosis: est.value,
        se: est.se,
        constant: BOUND_CONSTANT,
        lower_ok,
        upper_ok,
        exact_ok,
        pass: lower_ok && upper_ok && exact_ok,
    })
}

/// A uniform-sphere coefficient vector and its contraction norms.
#[derive(Debug, Clone)]
pub struct GenericBeta {
    pub coord: ChaosCoordinate,
    pub contraction_norms: Vec<f64>,
}

impl GenericBeta {
    pub fn max_contraction(&self) -> f64 {
        self.contraction_norms.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// `β` uniform on the unit sphere of `ℝ^{B_{d,k}}`.
pub fn sample_generic_beta(d: usize, k: usize, seed: u64) -> Result<GenericBeta> {
    if !(2..=3).contains(&k) {
        return Err(unsupported(k));
    }
    let coord = ChaosCoordinate::explicit(k, sphere_vector(basis_dim(d, k), seed));
    let contraction_norms = contraction_norms(&coord, d)?;
    Ok(GenericBeta {
        coord,
        contraction_norms,
    })
}

/// Serializable summary of a coefficient's genericity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericityReport {
    pub order: usize,
    pub contraction_norms: Vec<f64>,
    pub kurtosis: f64,
    pub se: f64,
    pub generic_at_default_tol: bool,
}

pub fn genericity_report(
    beta: &ChaosCoordinate,
    d: usize,
    n_mc: usize,
    seed: u64,
) -> Result<GenericityReport> {
    let norms = contraction_norms(beta, d)?;
    let est = excess_kurtosis_mc(beta, d, n_mc, seed)?;
    let max = norms.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(GenericityReport {
        order: beta.order,
        contraction_norms: norms,
        kurtosis: est.value,
        se: est.se,
        generic_at_default_tol: max <= default_tolerance(d),
    })
}

/// Explicit coefficient vector of the symmetric matrix `B` (`ι⁻¹(B)`),
/// normalized to unit Frobenius norm.
pub fn coordinate_from_matrix(b: &Array2<f64>) -> Result<ChaosCoordinate> {
    let t = crate::hermite::SymTensor::from_matrix(b.view(), 1e-12)?;
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Coefficient("zero matrix".into()));
    }
    let beta: Vec<f64> = crate::hermite::iota_inverse(&t)?
        .into_iter()
        .map(|v| v / norm)
        .collect();
    Ok(ChaosCoordinate::explicit(2, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_and_identity_contractions() {
        let d = 5;
        assert_eq!(contraction_norms(&ChaosCoordinate::axis(2, 1), d).unwrap(), vec![1.0]);
        assert_eq!(
            contraction_norms(&ChaosCoordinate::axis(3, 0), d).unwrap(),
            vec![1.0, 1.0]
        );
        let id = Array2::<f64>::eye(d);
        let c = coordinate_from_matrix(&id).unwrap();
        let n = contraction_norms(&c, d).unwrap();
        assert!((n[0] - 1.0 / (d as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn min_mc_is_enforced() {
        let r = excess_kurtosis_mc(&ChaosCoordinate::axis(2, 0), 3, 999, 1);
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn order3_contractions_match_generic_routine() {
        let d = 4;
        let g = sample_generic_beta(d, 3, 7).unwrap();
        let t = crate::hermite::iota(
            match &g.coord.coeff {
                crate::models::Coefficients::Explicit { beta } => beta,
                _ => unreachable!(),
            },
            3,
            d,
        )
        .unwrap();
        for r in 1..3 {
            let c = crate::hermite::contract_r(&t, &t, r).unwrap();
            assert!((c.frobenius_norm() - g.contraction_norms[r - 1]).abs() < 1e-12);
        }
    }
}
