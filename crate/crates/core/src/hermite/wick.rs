//! Product moments of Hermite polynomials in Gaussian projections, by
//! enumeration of multigraphs with a prescribed degree sequence.

use super::basis::factorial;
use crate::error::{Error, Result};

/// Maximum number of factors.
pub const MAX_FACTORS: usize = 4;
/// Maximum total degree.
pub const MAX_TOTAL_DEGREE: usize = 24;

/// `E[Π_i He_{k_i}(⟨w_i, x⟩)]` for `x ~ N(0, I)` and unit `w_i`.
pub fn wick_product_mean(pairs: &[(usize, &[f64])]) -> Result<f64> {
    let m = pairs.len();
    let total: usize = pairs.iter().map(|(k, _)| k).sum();
    if m > MAX_FACTORS || total > MAX_TOTAL_DEGREE {
        return Err(Error::Capacity(format!(
            "wick enumeration supports at most {MAX_FACTORS} factors and total degree {MAX_TOTAL_DEGREE}"
        )));
    }
    if m == 0 {
        return Ok(1.0);
    }
    let d = pairs[0].1.len();
    for (_, w) in pairs {
        if w.len() != d {
            return Err(Error::DimMismatch("wick factors of unequal dimension".into()));
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector { norm });
        }
    }
    if total % 2 == 1 {
        return Ok(0.0);
    }
    let edges: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let gram: Vec<f64> = edges
        .iter()
        .map(|&(i, j)| pairs[i].1.iter().zip(pairs[j].1).map(|(a, b)| a * b).sum())
        .collect();
    let mut remaining: Vec<usize> = pairs.iter().map(|(k, _)| *k).collect();
    let sum = enumerate(&edges, &gram, 0, &mut remaining);
    let scale: f64 = pairs.iter().map(|(k, _)| factorial(*k).sqrt()).product();
    Ok(scale * sum)
}

fn enumerate(edges: &[(usize, usize)], gram: &[f64], e: usize, remaining: &mut [usize]) -> f64 {
    if e == edges.len() {
        return if remaining.iter().all(|&r| r == 0) {
            1.0
        } else {
            0.0
        };
    }
    let (i, j) = edges[e];
    let max_mult = remaining[i].min(remaining[j]);
    let mut total = 0.0;
    for nu in 0..=max_mult {
        remaining[i] -= nu;
        remaining[j] -= nu;
        let rest = enumerate(edges, gram, e + 1, remaining);
        if rest != 0.0 {
            total += gram[e].powi(nu as i32) / factorial(nu) * rest;
        }
        remaining[i] += nu;
        remaining[j] += nu;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormality_cases() {
        let w = [0.6, 0.8];
        assert!((wick_product_mean(&[(2, &w), (2, &w)]).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(wick_product_mean(&[(1, &w), (1, &w), (1, &w)]).unwrap(), 0.0);
        assert!((wick_product_mean(&[(3, &w), (2, &w)]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn pairwise_moment_is_power_of_overlap() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.6, 0.8, 0.0];
        for k in 1..6 {
            let got = wick_product_mean(&[(k, &a), (k, &b)]).unwrap();
            assert!((got - 0.6f64.powi(k as i32)).abs() < 1e-13);
        }
    }

    #[test]
    fn fourth_moment_of_he2() {
        // E[He_2(G)^4] = 15
        let w = [1.0];
        let got = wick_product_mean(&[(2, &w), (2, &w), (2, &w), (2, &w)]).unwrap();
        assert!((got - 15.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_limits() {
        let w = [1.0];
        let five = vec![(1usize, &w[..]); 5];
        assert!(matches!(wick_product_mean(&five), Err(Error::Capacity(_))));
        assert!(wick_product_mean(&[(13, &w), (13, &w)]).is_err());
    }
}
