use super::loss::LossSpec;
use crate::error::{Error, Result};

/// Residual target for the first-order condition.
pub const PROX_TOL: f64 = 1e-10;

fn check(gamma: f64, loss: &LossSpec) -> Result<()> {
    if !loss.is_trainable() {
        return Err(Error::UnfittableLoss(format!(
            "{} is not convex and differentiable",
            loss.name()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// `argmin_x ℓ(y, x) + (x − z)²/(2γ)`, solved from the first-order
/// condition `ℓ'(y, x) + (x − z)/γ = 0` by safeguarded Newton.
pub fn prox(y: f64, z: f64, gamma: f64, loss: LossSpec) -> Result<f64> {
    check(gamma, &loss)?;
    let foc = |x: f64| loss.deriv(y, x) + (x - z) / gamma;
    // The FOC is strictly increasing; expand a bracket around z.
    let mut width = gamma * (loss.deriv(y, z).abs() + 1.0);
    let (mut lo, mut hi) = (z - width, z + width);
    while foc(lo) > 0.0 {
        width *= 2.0;
        lo = z - width;
    }
    while foc(hi) < 0.0 {
        width *= 2.0;
        hi = z + width;
    }
    let mut x = z.clamp(lo, hi);
    for _ in 0..200 {
        let r = foc(x);
        if r.abs() <= PROX_TOL {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = loss.second(y, x) + 1.0 / gamma;
        let newton = x - r / slope;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Moreau envelope `min_x ℓ(y, x) + (x − z)²/(2γ) − ℓ(0, 0)`.
pub fn moreau(y: f64, z: f64, gamma: f64, loss: LossSpec) -> Result<f64> {
    let x = prox(y, z, gamma, loss)?;
    Ok(loss.value(y, x) + (x - z) * (x - z) / (2.0 * gamma) - loss.value(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_prox_closed_form() {
        for &(y, z, g) in &[(1.0, 0.0, 1.0), (-2.0, 3.0, 0.3), (0.5, -1.0, 7.0)] {
            let p = prox(y, z, g, LossSpec::Squared).unwrap();
            assert!((p - (z + g * y) / (1.0 + g)).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_prox_reference_value() {
        let p = prox(1.0, 0.0, 1.0, LossSpec::Logistic).unwrap();
        assert!((p * (1.0 + p.exp()) - 1.0).abs() < 1e-10);
        assert!((p - 0.4011).abs() < 1e-3);
    }

    #[test]
    fn small_gamma_keeps_prox_near_z() {
        for gamma in [1e-2, 1e-4, 1e-6] {
            let p = prox(1.0, 0.7, gamma, LossSpec::Logistic).unwrap();
            assert!((p - 0.7).abs() <= gamma * 1.0 + 1e-15);
        }
    }

    #[test]
    fn errors() {
        assert!(prox(1.0, 0.0, 1.0, LossSpec::ZeroOne).is_err());
        assert!(moreau(1.0, 0.0, 0.0, LossSpec::Squared).is_err());
    }

    #[test]
    fn moreau_centering() {
        let m = moreau(0.0, 0.0, 1.0, LossSpec::Logistic).unwrap();
        assert!(m.abs() < 1e-12);
    }
}
