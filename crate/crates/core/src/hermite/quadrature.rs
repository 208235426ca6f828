//! Gauss–Hermite quadrature, activations and their Hermite coefficients.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::poly::{he, he_all, hermite_series};
use crate::error::{Error, Result};

/// Nodes used for non-polynomial activations.
pub const NONPOLY_NODES: usize = 200;
/// Default truncation degree for non-polynomial activations.
pub const DEFAULT_DEGREE_CAP: usize = 8;

/// Gauss–Hermite rule for the standard normal weight: `E f(G) ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-point rule, exact for polynomials of degree ≤ `2n − 1`.
    ///
    /// Nodes are the eigenvalues of the Jacobi matrix of the probabilists'
    /// recurrence; weights are squared first eigenvector components.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let j = n - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1) / total;
        }
        GaussHermite { nodes, weights }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn nonpoly_rule() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(NONPOLY_NODES))
}

/// Activation shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    /// `σ(x) = Σ_i c_i x^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `σ(x) = Σ_k c_k He_k(x)`.
    Hermite { coeffs: Vec<f64> },
    Relu,
    Square,
}

/// Activation `σ` together with its coefficient truncation degree `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    #[serde(flatten)]
    pub kind: ActivationKind,
    #[serde(default = "default_cap")]
    pub degree_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DEGREE_CAP
}

impl ActivationSpec {
    pub fn relu() -> Self {
        ActivationSpec {
            kind: ActivationKind::Relu,
            degree_cap: DEFAULT_DEGREE_CAP,
        }
    }

    pub fn square() -> Self {
        ActivationSpec {
            kind: ActivationKind::Square,
            degree_cap: 2,
        }
    }

    /// Monomial-coefficient polynomial; `D` defaults to its degree.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let degree_cap = coeffs.len().saturating_sub(1);
        ActivationSpec {
            kind: ActivationKind::Polynomial { coeffs },
            degree_cap,
        }
    }

    /// Polynomial given in the Hermite basis.
    pub fn hermite(coeffs: Vec<f64>) -> Self {
        let degree_cap = coeffs.len().saturating_sub(1);
        ActivationSpec {
            kind: ActivationKind::Hermite { coeffs },
            degree_cap,
        }
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    /// Polynomial degree, `None` for non-polynomial activations.
    pub fn degree(&self) -> Option<usize> {
        fn deg(c: &[f64]) -> usize {
            c.iter().rposition(|v| *v != 0.0).unwrap_or(0)
        }
        match &self.kind {
            ActivationKind::Polynomial { coeffs } | ActivationKind::Hermite { coeffs } => {
                Some(deg(coeffs))
            }
            ActivationKind::Square => Some(2),
            ActivationKind::Relu => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(deg) = self.degree() {
            if deg > self.degree_cap {
                return Err(Error::InvalidArgument(format!(
                    "activation degree {deg} exceeds degree cap {}",
                    self.degree_cap
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            ActivationKind::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            ActivationKind::Hermite { coeffs } => hermite_series(coeffs, x),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Square => x * x,
        }
    }

    fn node_count(&self, k: usize) -> usize {
        match self.kind {
            ActivationKind::Relu => NONPOLY_NODES,
            _ => (self.degree_cap + k).div_ceil(2) + 1,
        }
    }

    /// `μ_k = E[σ(G) He_k(G)]` by Gauss–Hermite quadrature.
    pub fn hermite_coeff(&self, k: usize) -> Result<f64> {
        self.validate()?;
        if k > self.degree_cap {
            return Err(Error::OrderOutOfRange {
                k,
                max: self.degree_cap,
            });
        }
        let n = self.node_count(k);
        let val = if n == NONPOLY_NODES {
            nonpoly_rule().expect(|x| self.eval(x) * he(k, x))
        } else {
            GaussHermite::new(n).expect(|x| self.eval(x) * he(k, x))
        };
        Ok(val)
    }

    /// `μ_0, …, μ_D`.
    pub fn hermite_coeffs(&self) -> Result<HermiteCoeffs> {
        self.validate()?;
        let d = self.degree_cap;
        let n = self.node_count(d);
        let rule = if n == NONPOLY_NODES {
            nonpoly_rule().clone()
        } else {
            GaussHermite::new(n)
        };
        let mut mu = vec![0.0; d + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = self.eval(x) * w;
            for (m, h) in mu.iter_mut().zip(he_all(d, x)) {
                *m += s * h;
            }
        }
        Ok(HermiteCoeffs::from_mu(mu))
    }
}

/// Hermite coefficients `μ_0..μ_D` of an activation and `μ_{>2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteCoeffs {
    pub mu: Vec<f64>,
    pub mu_gt2: f64,
}

impl HermiteCoeffs {
    pub fn from_mu(mu: Vec<f64>) -> Self {
        let mu_gt2 = mu.iter().skip(3).map(|m| m * m).sum::<f64>().sqrt();
        HermiteCoeffs { mu, mu_gt2 }
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu.get(k).copied().unwrap_or(0.0)
    }

    /// Copy with `μ_k` replaced; `μ_{>2}` is recomputed.
    pub fn with_mu(&self, k: usize, value: f64) -> Self {
        let mut mu = self.mu.clone();
        if mu.len() <= k {
            mu.resize(k + 1, 0.0);
        }
        mu[k] = value;
        HermiteCoeffs::from_mu(mu)
    }

    /// Copy with `μ_{>2}` overridden (the individual μ_k, k ≥ 3, are kept).
    pub fn with_mu_gt2(&self, value: f64) -> Self {
        HermiteCoeffs {
            mu: self.mu.clone(),
            mu_gt2: value,
        }
    }

    /// `Σ_k μ_k²`.
    pub fn energy(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum()
    }
}
