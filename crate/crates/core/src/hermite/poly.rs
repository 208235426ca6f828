//! Orthonormal (probabilists') Hermite polynomials.

/// Orthonormal Hermite polynomial `He_k(x)`, with `E[He_j(G) He_k(G)] = δ_jk`.
///
/// Evaluated by the recurrence `√(k+1) He_{k+1} = x He_k − √k He_{k−1}`.
pub fn he(k: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[He_0(x), …, He_kmax(x)]`.
pub fn he_all(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(x);
    for j in 1..kmax {
        let next = (x * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Evaluates `Σ_k c_k He_k(x)`.
pub fn hermite_series(coeffs: &[f64], x: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    he_all(coeffs.len() - 1, x)
        .iter()
        .zip(coeffs)
        .map(|(h, c)| h * c)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::basis::factorial;

    // Explicit sum formula, used as an independent oracle.
    fn he_explicit(k: usize, x: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..=k / 2 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / (2f64.powi(i as i32) * factorial(i) * factorial(k - 2 * i))
                * x.powi((k - 2 * i) as i32);
        }
        factorial(k).sqrt() * s
    }

    #[test]
    fn spot_values() {
        assert_eq!(he(0, 3.7), 1.0);
        assert!((he(2, 0.0) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((he(3, 1.0) + 2.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_explicit_formula() {
        for k in 0..12 {
            for i in -30..=30 {
                let x = i as f64 * 0.2;
                let a = he(k, x);
                let b = he_explicit(k, x);
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn he_all_agrees_with_he() {
        let v = he_all(7, 1.3);
        for (k, val) in v.iter().enumerate() {
            assert!((val - he(k, 1.3)).abs() < 1e-14);
        }
    }
}
