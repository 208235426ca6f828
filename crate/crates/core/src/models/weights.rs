use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::stream;

/// Projections of the weight rows onto one signal direction.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    pub u: Array1<f64>,
    /// `r1_j = ⟨w_j, u⟩`.
    pub r1: Array1<f64>,
    /// `r2_j = ⟨w_j, u⟩²`.
    pub r2: Array1<f64>,
}

/// Weight matrix `W ∈ ℝ^{p×d}` with rows uniform on the unit sphere.
#[derive(Debug, Clone)]
pub struct WeightEnsemble {
    w: Array2<f64>,
    seed: u64,
    directions: Vec<DirectionCache>,
}

/// Shared handle used by samplers and trial workers.
pub type SharedWeights = Arc<WeightEnsemble>;

impl WeightEnsemble {
    /// Wrap an explicit weight matrix; every row must be a unit vector.
    pub fn from_matrix(w: Array2<f64>, seed: u64) -> Result<Self> {
        for row in w.rows() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::NotUnitVector { norm });
            }
        }
        Ok(WeightEnsemble {
            w,
            seed,
            directions: Vec::new(),
        })
    }

    pub fn w(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    /// Cache `r1`, `r2` for a unit direction `u`.
    pub fn with_direction(mut self, u: ArrayView1<f64>) -> Result<Self> {
        if u.len() != self.d() {
            return Err(Error::LengthMismatch {
                expected: self.d(),
                got: u.len(),
            });
        }
        let norm = u.dot(&u).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector { norm });
        }
        let r1 = self.w.dot(&u);
        let r2 = r1.mapv(|v| v * v);
        self.directions.push(DirectionCache {
            u: u.to_owned(),
            r1,
            r2,
        });
        Ok(self)
    }

    /// Cache the canonical directions `e_1..e_s`.
    pub fn with_canonical_directions(mut self, s: usize) -> Result<Self> {
        for i in 0..s.min(self.d()) {
            let mut u = Array1::zeros(self.d());
            u[i] = 1.0;
            self = self.with_direction(u.view())?;
        }
        Ok(self)
    }

    pub fn directions(&self) -> &[DirectionCache] {
        &self.directions
    }

    /// `W W^T`.
    pub fn gram(&self) -> Array2<f64> {
        self.w.dot(&self.w.t())
    }
}

/// Draw `p` rows independently and uniformly from `S^{d-1}`.
pub fn sample_weights(d: usize, p: usize, seed: u64) -> Result<WeightEnsemble> {
    if d == 0 || p == 0 {
        return Err(Error::InvalidArgument("d and p must be at least 1".into()));
    }
    let mut rng = stream(seed, "weights");
    let mut w = Array2::<f64>::zeros((p, d));
    for mut row in w.axis_iter_mut(Axis(0)) {
        loop {
            row.iter_mut()
                .for_each(|v| *v = StandardNormal.sample(&mut rng));
            let norm = row.dot(&row).sqrt();
            if norm > 1e-300 {
                row.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }
    Ok(WeightEnsemble {
        w,
        seed,
        directions: Vec::new(),
    })
}

/// Householder reflection `H` with `H u = e_1`, used to move a signal
/// direction into the canonical frame (rows transform as `w ↦ H w`).
pub fn canonical_frame(u: ArrayView1<f64>) -> Result<Array2<f64>> {
    let d = u.len();
    let norm = u.dot(&u).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitVector { norm });
    }
    let mut v = u.to_owned();
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let mut h = Array2::<f64>::eye(d);
    if vv > 1e-30 {
        for i in 0..d {
            for j in 0..d {
                h[[i, j]] -= 2.0 * v[i] * v[j] / vv;
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_rows() {
        let a = sample_weights(3, 5, 1).unwrap();
        let b = sample_weights(3, 5, 1).unwrap();
        assert_eq!(a.w(), b.w());
        for row in a.w().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-10);
        }
        assert!(sample_weights(0, 5, 1).is_err());
    }

    #[test]
    fn direction_cache_matches_recomputation() {
        let we = sample_weights(4, 7, 2)
            .unwrap()
            .with_canonical_directions(2)
            .unwrap();
        let c = &we.directions()[1];
        for j in 0..7 {
            assert_eq!(c.r1[j], we.w()[[j, 1]]);
            assert_eq!(c.r2[j], we.w()[[j, 1]] * we.w()[[j, 1]]);
        }
    }

    #[test]
    fn householder_maps_to_e1() {
        let u = ndarray::array![0.6, 0.0, 0.8];
        let h = canonical_frame(u.view()).unwrap();
        let e = h.dot(&u);
        assert!((e[0] - 1.0).abs() < 1e-14 && e[1].abs() < 1e-14 && e[2].abs() < 1e-14);
    }
}
