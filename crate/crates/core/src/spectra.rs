//! Structure checks on `V_k` and Hadamard powers of `WWᵀ`.

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::tensor::q_k_unchecked;
use crate::hermite::BasisIndexer;
use crate::models::WeightEnsemble;
use crate::seed::{child_seed, rng_from_seed};

/// Largest `d` for which `V_k` is materialized in [`gram_hadamard_check`].
pub const MAX_MATERIALIZED_DIM: usize = 16;
/// Default cap on `p` for operator-norm computations.
pub const DEFAULT_P_CAP: usize = 4096;
/// Default cap on materialized `V₂` entries.
pub const MAX_V2_ENTRIES: usize = 1 << 25;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 5000;

/// `V_k ∈ ℝ^{p×B_{d,k}}` with rows `q_k(w_j)`.
pub fn materialize_vk(w: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
    let (p, d) = w.dim();
    let ix = BasisIndexer::shared(d, k)?;
    let b = ix.len();
    let mut v = Array2::zeros((p, b));
    for (j, row) in w.rows().into_iter().enumerate() {
        let q = q_k_unchecked(row, &ix);
        v.row_mut(j).assign(&Array1::from(q));
    }
    Ok(v)
}

/// `‖V_kV_kᵀ − (WWᵀ)^{⊙k}‖_max`.
pub fn gram_hadamard_check(we: &WeightEnsemble, k: usize) -> Result<f64> {
    if k == 0 || k > 4 {
        return Err(Error::OrderOutOfRange { k, max: 4 });
    }
    if we.d() > MAX_MATERIALIZED_DIM {
        return Err(Error::Capacity(format!(
            "V_k is only materialized for d ≤ {MAX_MATERIALIZED_DIM} (got {})",
            we.d()
        )));
    }
    let g = we.gram();
    let v = if k == 1 {
        we.w().to_owned()
    } else {
        materialize_vk(we.w(), k)?
    };
    let vv = v.dot(&v.t());
    Ok(vv
        .iter()
        .zip(g.iter())
        .map(|(a, b)| (a - b.powi(k as i32)).abs())
        .fold(0.0, f64::max))
}

/// Largest singular value of a linear map by power iteration on `AᵀA`,
/// best of two random starts.
pub fn power_op_norm(
    apply: impl Fn(&Array1<f64>) -> Array1<f64>,
    apply_t: impl Fn(&Array1<f64>) -> Array1<f64>,
    dim: usize,
    seed: u64,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for start in 0..2 {
        let mut rng = rng_from_seed(child_seed(seed, "power", start));
        let mut v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut est: f64 = 0.0;
        for _ in 0..POWER_MAX_ITER {
            let nv = v.dot(&v).sqrt();
            if nv == 0.0 {
                break;
            }
            v /= nv;
            let av = apply(&v);
            let new = av.dot(&av).sqrt();
            v = apply_t(&av);
            if (new - est).abs() <= POWER_TOL * new.max(f64::MIN_POSITIVE) {
                est = new;
                break;
            }
            est = new;
        }
        best = best.max(est);
    }
    best
}

fn matrix_op_norm(a: &Array2<f64>, seed: u64) -> f64 {
    power_op_norm(|v| a.dot(v), |u| a.t().dot(u), a.ncols(), seed)
}

/// Operator norms from `V₂ = (1/d)1_p e_cᵀ + V_{2c}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeReport {
    pub d: usize,
    pub p: usize,
    /// `‖V_{2c}‖_op`.
    pub centered_op_norm: f64,
    /// `‖(1/d)1_p e_cᵀ‖_op = √(p/d)`.
    pub spike_op_norm: f64,
    /// `‖V₂‖_op`.
    pub full_op_norm: f64,
}

pub fn v2_spike_decomposition(we: &WeightEnsemble, p_cap: usize) -> Result<SpikeReport> {
    let (p, d) = (we.p(), we.d());
    if p > p_cap {
        return Err(Error::Capacity(format!("p = {p} exceeds the cap {p_cap}")));
    }
    let ix = BasisIndexer::shared(d, 2)?;
    if p.saturating_mul(ix.len()) > MAX_V2_ENTRIES {
        return Err(Error::Capacity(format!(
            "V₂ would have {} entries",
            p.saturating_mul(ix.len())
        )));
    }
    let v2 = materialize_vk(we.w(), 2)?;
    let full = matrix_op_norm(&v2, we.seed());
    let mut centered = v2;
    let shift = 1.0 / d as f64;
    for pos in 0..ix.len() {
        if ix.multi_index(pos).exponents().contains(&2) {
            centered.column_mut(pos).mapv_inplace(|v| v - shift);
        }
    }
    Ok(SpikeReport {
        d,
        p,
        centered_op_norm: matrix_op_norm(&centered, we.seed() ^ 1),
        spike_op_norm: (p as f64 / d as f64).sqrt(),
        full_op_norm: full,
    })
}

/// Residual operator norm of `(WWᵀ)^{⊙k}` after removing its leading
/// structure: `I + (3/d)WWᵀ` for `k = 3`, `I + (3/d²)11ᵀ` for `k = 4`, `I`
/// for `k = 5`.
pub fn higher_gram_structure(we: &WeightEnsemble, k: usize, p_cap: usize) -> Result<f64> {
    if !(3..=5).contains(&k) {
        return Err(Error::OrderOutOfRange { k, max: 5 });
    }
    let p = we.p();
    if p > p_cap {
        return Err(Error::Capacity(format!("p = {p} exceeds the cap {p_cap}")));
    }
    let d = we.d() as f64;
    let g = we.gram();
    let mut m = g.mapv(|v| v.powi(k as i32));
    for i in 0..p {
        m[[i, i]] -= 1.0;
    }
    match k {
        3 => m.scaled_add(-3.0 / d, &g),
        4 => m.mapv_inplace(|v| v - 3.0 / (d * d)),
        _ => {}
    }
    if m.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(matrix_op_norm(&m, we.seed() ^ (k as u64)))
}

/// Spectral diagnostics for one weight ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectraReport {
    pub d: usize,
    pub p: usize,
    /// `(k, residual)` pairs; present only when `d ≤ 16`.
    pub gram_hadamard: Vec<(usize, f64)>,
    pub spike: Option<SpikeReport>,
    /// `(k, residual op-norm)` for `k = 3, 4, 5`.
    pub higher_gram: Vec<(usize, f64)>,
}

pub fn spectra_report(we: &WeightEnsemble, p_cap: usize) -> Result<SpectraReport> {
    let gram_hadamard = if we.d() <= MAX_MATERIALIZED_DIM {
        (1..=4)
            .map(|k| gram_hadamard_check(we, k).map(|r| (k, r)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let spike = v2_spike_decomposition(we, p_cap).ok();
    let higher_gram = (3..=5)
        .map(|k| higher_gram_structure(we, k, p_cap).map(|r| (k, r)))
        .collect::<Result<_>>()?;
    Ok(SpectraReport {
        d: we.d(),
        p: we.p(),
        gram_hadamard,
        spike,
        higher_gram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_weights;

    #[test]
    fn power_iteration_matches_known_norm() {
        let a = ndarray::array![[3.0, 0.0], [0.0, -5.0], [0.0, 0.0]];
        assert!((matrix_op_norm(&a, 1) - 5.0).abs() < 1e-5);
    }

    #[test]
    fn linear_gram_is_exact() {
        let we = sample_weights(6, 9, 3).unwrap();
        assert_eq!(gram_hadamard_check(&we, 1).unwrap(), 0.0);
        assert!(gram_hadamard_check(&sample_weights(17, 2, 1).unwrap(), 2).is_err());
        assert!(gram_hadamard_check(&we, 5).is_err());
    }

    #[test]
    fn single_row_cases() {
        let we = sample_weights(7, 1, 2).unwrap();
        assert!(higher_gram_structure(&we, 5, 10).unwrap() <= 1e-12);
        let s = v2_spike_decomposition(&we, 10).unwrap();
        assert!(s.centered_op_norm <= 1.0);
    }
}
