use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::sign;

/// Default smoothing of the Huberized hinge.
pub const DEFAULT_HINGE_DELTA: f64 = 0.1;

/// Loss `ℓ(y, ŷ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `½(y − ŷ)²`.
    Squared,
    /// `log(1 + e^{−yŷ})`.
    Logistic,
    /// Huberized hinge on the margin `m = yŷ`: `0` for `m ≥ 1+δ`,
    /// `(1+δ−m)²/(4δ)` for `|m−1| ≤ δ`, `1−m` otherwise.
    #[serde(alias = "hinge")]
    SmoothedHinge {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// `1{sign(ŷ) ≠ y}` with `sign(0) = +1`; evaluation only.
    ZeroOne,
}

fn default_delta() -> f64 {
    DEFAULT_HINGE_DELTA
}

impl LossSpec {
    pub fn hinge() -> Self {
        LossSpec::SmoothedHinge {
            delta: DEFAULT_HINGE_DELTA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Squared => "squared",
            LossSpec::Logistic => "logistic",
            LossSpec::SmoothedHinge { .. } => "hinge",
            LossSpec::ZeroOne => "zero_one",
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, LossSpec::ZeroOne)
    }

    pub fn ensure_trainable(&self) -> Result<()> {
        match self {
            LossSpec::ZeroOne => Err(Error::UnfittableLoss(self.name().into())),
            LossSpec::SmoothedHinge { delta } if !(*delta > 0.0) => Err(Error::InvalidArgument(
                format!("hinge smoothing must be positive, got {delta}"),
            )),
            _ => Ok(()),
        }
    }

    /// Bound on `∂²ℓ/∂ŷ²` for labels in `[−1, 1]`.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            LossSpec::Squared => 1.0,
            LossSpec::Logistic => 0.25,
            LossSpec::SmoothedHinge { delta } => 1.0 / (2.0 * delta),
            LossSpec::ZeroOne => 0.0,
        }
    }

    pub fn value(&self, y: f64, yhat: f64) -> f64 {
        match *self {
            LossSpec::Squared => 0.5 * (y - yhat) * (y - yhat),
            LossSpec::Logistic => log1p_exp(-y * yhat),
            LossSpec::SmoothedHinge { delta } => {
                let m = y * yhat;
                if m >= 1.0 + delta {
                    0.0
                } else if m >= 1.0 - delta {
                    (1.0 + delta - m).powi(2) / (4.0 * delta)
                } else {
                    1.0 - m
                }
            }
            LossSpec::ZeroOne => {
                if sign(yhat) != y {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `∂ℓ/∂ŷ`.
    pub fn deriv(&self, y: f64, yhat: f64) -> f64 {
        match *self {
            LossSpec::Squared => yhat - y,
            LossSpec::Logistic => -y * sigmoid(-y * yhat),
            LossSpec::SmoothedHinge { delta } => {
                let m = y * yhat;
                if m >= 1.0 + delta {
                    0.0
                } else if m >= 1.0 - delta {
                    -y * (1.0 + delta - m) / (2.0 * delta)
                } else {
                    -y
                }
            }
            LossSpec::ZeroOne => 0.0,
        }
    }

    /// `∂²ℓ/∂ŷ²`.
    pub fn second(&self, y: f64, yhat: f64) -> f64 {
        match *self {
            LossSpec::Squared => 1.0,
            LossSpec::Logistic => {
                let s = sigmoid(y * yhat);
                y * y * s * (1.0 - s)
            }
            LossSpec::SmoothedHinge { delta } => {
                let m = y * yhat;
                if (m - 1.0).abs() <= delta {
                    y * y / (2.0 * delta)
                } else {
                    0.0
                }
            }
            LossSpec::ZeroOne => 0.0,
        }
    }
}

/// `log(1 + e^t)` without overflow.
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_reference_points() {
        assert_eq!(LossSpec::Squared.value(1.0, 3.0), 2.0);
        assert!((LossSpec::Logistic.value(1.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((LossSpec::Logistic.value(1.0, -800.0) - 800.0).abs() < 1e-12);
        let h = LossSpec::hinge();
        assert_eq!(h.value(1.0, 2.0), 0.0);
        assert!((h.value(1.0, 0.9) - 0.1).abs() < 1e-15);
        assert!((h.value(1.0, 1.0) - 0.025).abs() < 1e-15);
        assert_eq!(h.value(-1.0, 1.0), 2.0);
        assert_eq!(LossSpec::ZeroOne.value(1.0, 0.0), 0.0);
        assert_eq!(LossSpec::ZeroOne.value(-1.0, 0.0), 1.0);
    }

    #[test]
    fn zero_one_is_not_trainable() {
        assert!(matches!(
            LossSpec::ZeroOne.ensure_trainable(),
            Err(Error::UnfittableLoss(_))
        ));
    }

    #[test]
    fn serde_names() {
        let l: LossSpec = serde_json::from_str(r#"{"kind":"hinge"}"#).unwrap();
        assert_eq!(l, LossSpec::hinge());
        let l: LossSpec = serde_json::from_str(r#"{"kind":"zero_one"}"#).unwrap();
        assert_eq!(l, LossSpec::ZeroOne);
    }
}
