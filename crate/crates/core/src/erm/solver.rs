use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::loss::LossSpec;
use crate::error::{Error, Result};
use crate::models::SampleBatch;

/// Smallest ridge penalty used by the fitter.
pub const LAMBDA_FLOOR: f64 = 1e-6;
/// Default gradient-norm tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Margins are recomputed from scratch this often.
const REFRESH: usize = 50;

/// First-order method used by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Accelerated gradient with backtracking and monotone restarts.
    #[default]
    Agd,
    /// Limited-memory BFGS with backtracking Armijo search.
    Lbfgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    /// Record the objective after every accepted step.
    #[serde(default)]
    pub trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method: Method::Agd,
            trace: false,
        }
    }
}

/// Minimizer of the ridge-regularized empirical risk.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Array1<f64>,
    /// Objective value `(1/n)Σℓ + (λ/2)‖θ‖²` at `theta`.
    pub risk: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub method: Method,
    /// Objective values, when requested.
    pub trace: Vec<f64>,
}

#[derive(Serialize)]
struct FitResultJson<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<&'a [f64]>,
    risk: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    lambda: f64,
    method: Method,
}

impl FitResult {
    /// JSON with `theta` omitted when it has more than `theta_limit` entries.
    pub fn to_json(&self, theta_limit: usize) -> serde_json::Value {
        let theta = (self.theta.len() <= theta_limit).then(|| self.theta.as_slice().unwrap());
        serde_json::to_value(FitResultJson {
            theta,
            risk: self.risk,
            grad_norm: self.grad_norm,
            iterations: self.iterations,
            converged: self.converged,
            lambda: self.lambda,
            method: self.method,
        })
        .expect("fit result serializes")
    }
}

/// Smooth ridge objective over a fixed design.
pub(crate) struct Objective<'a> {
    /// Features, `p×n`.
    pub z: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub loss: LossSpec,
    pub lambda: f64,
}

impl<'a> Objective<'a> {
    fn n(&self) -> f64 {
        self.y.len().max(1) as f64
    }

    pub fn margins(&self, theta: &Array1<f64>) -> Array1<f64> {
        self.z.t().dot(theta)
    }

    pub fn data_loss(&self, m: &Array1<f64>) -> f64 {
        self.y
            .iter()
            .zip(m)
            .map(|(&y, &v)| self.loss.value(y, v))
            .sum::<f64>()
            / self.n()
    }

    pub fn value(&self, theta: &Array1<f64>, m: &Array1<f64>) -> f64 {
        self.data_loss(m) + 0.5 * self.lambda * theta.dot(theta)
    }

    pub fn grad(&self, theta: &Array1<f64>, m: &Array1<f64>) -> Array1<f64> {
        let n = self.n();
        let coeffs: Array1<f64> = self
            .y
            .iter()
            .zip(m)
            .map(|(&y, &v)| self.loss.deriv(y, v) / n)
            .collect();
        let mut g = self.z.dot(&coeffs);
        g.scaled_add(self.lambda, theta);
        g
    }

    /// Change of the data term, summed termwise for accuracy near optimum.
    fn data_delta(&self, from: &Array1<f64>, to: &Array1<f64>) -> f64 {
        self.y
            .iter()
            .zip(from.iter().zip(to))
            .map(|(&y, (&a, &b))| self.loss.value(y, b) - self.loss.value(y, a))
            .sum::<f64>()
            / self.n()
    }

    fn delta(&self, th_from: &Array1<f64>, m_from: &Array1<f64>, th_to: &Array1<f64>, m_to: &Array1<f64>) -> f64 {
        let pen = 0.5 * self.lambda * (th_to - th_from).dot(&(th_to + th_from));
        self.data_delta(m_from, m_to) + pen
    }

    /// `‖Z‖²_op / n` by power iteration on `ZZᵀ`.
    fn op_norm_sq_over_n(&self) -> f64 {
        let p = self.z.nrows();
        if p == 0 || self.y.is_empty() {
            return 0.0;
        }
        let mut v = Array1::from_shape_fn(p, |i| 1.0 + 0.01 * ((i * 7919) % 13) as f64);
        let mut est = 0.0;
        for _ in 0..100 {
            let nv = v.dot(&v).sqrt();
            if nv == 0.0 {
                return 0.0;
            }
            v /= nv;
            let w = self.z.dot(&self.z.t().dot(&v));
            let new = v.dot(&w);
            v = w;
            if (new - est).abs() <= 1e-6 * new {
                est = new;
                break;
            }
            est = new;
        }
        est / self.n()
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn check_inputs(batch: &SampleBatch, loss: &LossSpec, lambda: f64) -> Result<()> {
    loss.ensure_trainable()?;
    batch.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Minimize `(1/n)Σ ℓ(y_i, ⟨θ, z_i⟩) + (λ/2)‖θ‖²` from `θ = 0` with
/// accelerated gradient descent.
pub fn fit_ridge_erm(
    batch: &SampleBatch,
    loss: LossSpec,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FitResult> {
    fit_ridge_erm_with(
        batch,
        loss,
        lambda,
        &FitOptions {
            tol,
            max_iter,
            ..FitOptions::default()
        },
    )
}

pub fn fit_ridge_erm_with(
    batch: &SampleBatch,
    loss: LossSpec,
    lambda: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(batch, &loss, lambda)?;
    let obj = Objective {
        z: batch.z.view(),
        y: batch.y.view(),
        loss,
        lambda: lambda.max(LAMBDA_FLOOR),
    };
    let theta0 = Array1::zeros(batch.p());
    Ok(match opts.method {
        Method::Agd => agd(&obj, theta0, opts),
        Method::Lbfgs => lbfgs(&obj, theta0, opts, |_, _| false).0,
    })
}

pub(crate) fn agd(obj: &Objective, theta0: Array1<f64>, opts: &FitOptions) -> FitResult {
    let lam = obj.lambda;
    let mut lip = lam + obj.loss.curvature_bound() * obj.op_norm_sq_over_n();
    let mut theta = theta0;
    let mut m = obj.margins(&theta);
    let mut f = obj.value(&theta, &m);
    let mut prev_theta = theta.clone();
    let mut prev_m = m.clone();
    let mut trace = Vec::new();
    if opts.trace {
        trace.push(f);
    }
    let mut g = obj.grad(&theta, &m);
    let mut gnorm = norm(&g);
    let mut iterations = 0;
    let mut momentum_on = false;
    while gnorm > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let beta = if momentum_on {
            let kappa = (lip / lam).max(1.0);
            (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0)
        } else {
            0.0
        };
        let yv = &theta + &((&theta - &prev_theta) * beta);
        let ym = &m + &((&m - &prev_m) * beta);
        let gy = if beta == 0.0 { g.clone() } else { obj.grad(&yv, &ym) };
        let zg = obj.z.t().dot(&gy);
        let gy2 = gy.dot(&gy);
        // Backtracking on the quadratic upper model around y.
        let (next, next_m) = loop {
            let step = 1.0 / lip;
            let cand = &yv - &(&gy * step);
            let cand_m = &ym - &(&zg * step);
            let diff = obj.delta(&yv, &ym, &cand, &cand_m);
            let model = -step * gy2 + 0.5 * lip * step * step * gy2;
            let slack = 1e-14 * (f.abs() + 1.0);
            if diff <= model + slack || lip > 1e300 {
                break (cand, cand_m);
            }
            lip *= 2.0;
        };
        let change = obj.delta(&theta, &m, &next, &next_m);
        if change > 1e-14 * (f.abs() + 1.0) && momentum_on {
            // Objective went up: drop momentum and retake a gradient step.
            momentum_on = false;
            prev_theta = theta.clone();
            prev_m = m.clone();
            continue;
        }
        prev_theta = std::mem::replace(&mut theta, next);
        prev_m = std::mem::replace(&mut m, next_m);
        if iterations % REFRESH == 0 {
            // Both ends of the momentum difference must be refreshed together.
            m = obj.margins(&theta);
            prev_m = obj.margins(&prev_theta);
        }
        f = obj.value(&theta, &m);
        if opts.trace {
            trace.push(f);
        }
        g = obj.grad(&theta, &m);
        gnorm = norm(&g);
        momentum_on = true;
        lip = (lip * 0.95).max(lam);
    }
    let m = obj.margins(&theta);
    let g = obj.grad(&theta, &m);
    let grad_norm = norm(&g);
    FitResult {
        risk: obj.value(&theta, &m),
        theta,
        grad_norm,
        iterations,
        converged: grad_norm <= opts.tol,
        lambda: lam,
        method: Method::Agd,
        trace,
    }
}

/// L-BFGS from `theta0`. `stop(theta, margins)` may end the run early; the
/// second return value reports whether it did.
pub(crate) fn lbfgs(
    obj: &Objective,
    theta0: Array1<f64>,
    opts: &FitOptions,
    mut stop: impl FnMut(&Array1<f64>, &Array1<f64>) -> bool,
) -> (FitResult, bool) {
    const MEMORY: usize = 10;
    let mut theta = theta0;
    let mut m = obj.margins(&theta);
    let mut f = obj.value(&theta, &m);
    let mut g = obj.grad(&theta, &m);
    let mut gnorm = norm(&g);
    let mut hist: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    if opts.trace {
        trace.push(f);
    }
    let mut iterations = 0;
    let mut stopped = stop(&theta, &m);
    let lip0 = obj.lambda + obj.loss.curvature_bound() * obj.op_norm_sq_over_n();
    while !stopped && gnorm > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * s.dot(&q);
            q.scaled_add(-a, yv);
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, yv, _)) => s.dot(yv) / yv.dot(yv),
            None => 1.0 / lip0,
        };
        q *= gamma;
        for ((s, yv, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * yv.dot(&q);
            q.scaled_add(a - b, s);
        }
        let mut dir = -q;
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = -&g / lip0;
            slope = g.dot(&dir);
        }
        let zd = obj.z.t().dot(&dir);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &theta + &(&dir * alpha);
            let cand_m = &m + &(&zd * alpha);
            let diff = obj.delta(&theta, &m, &cand, &cand_m);
            if diff <= 1e-4 * alpha * slope {
                accepted = Some((cand, cand_m, None));
                break;
            }
            if diff <= 1e-14 * (f.abs() + 1.0) {
                // Below objective resolution: accept if the gradient shrinks.
                let cg = obj.grad(&cand, &cand_m);
                if norm(&cg) < gnorm {
                    accepted = Some((cand, cand_m, Some(cg)));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, mut cand_m, cand_g)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        if iterations % REFRESH == 0 {
            cand_m = obj.margins(&cand);
        }
        let new_g = match cand_g {
            Some(cg) if iterations % REFRESH != 0 => cg,
            _ => obj.grad(&cand, &cand_m),
        };
        let s = &cand - &theta;
        let yv = &new_g - &g;
        let sy = s.dot(&yv);
        if sy > 1e-300 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, yv, 1.0 / sy));
        }
        theta = cand;
        m = cand_m;
        g = new_g;
        gnorm = norm(&g);
        f = obj.value(&theta, &m);
        if opts.trace {
            trace.push(f);
        }
        stopped = stop(&theta, &m);
    }
    let m = obj.margins(&theta);
    let g = obj.grad(&theta, &m);
    let grad_norm = norm(&g);
    (
        FitResult {
            risk: obj.value(&theta, &m),
            theta,
            grad_norm,
            iterations,
            converged: grad_norm <= opts.tol,
            lambda: obj.lambda,
            method: Method::Lbfgs,
            trace,
        },
        stopped,
    )
}

/// Whether unregularized logistic regression drives every training margin
/// `y_i⟨θ, z_i⟩` strictly positive.
///
/// The ridge penalty is decreased geometrically from 1 to 1e−12 with warm
/// starts, so the norm of the iterate grows along the regularization path;
/// the check succeeds as soon as an iterate separates the data and fails
/// once the path is exhausted or `max_iter` total iterations are spent.
pub fn interpolation_check(batch: &SampleBatch, max_iter: usize) -> Result<bool> {
    batch.validate()?;
    if let Some(bad) = batch.y.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::NonBinaryLabels(format!("found label {bad}")));
    }
    let n = batch.n();
    if n == 0 {
        return Ok(true);
    }
    let separated = |m: &Array1<f64>| batch.y.iter().zip(m).all(|(&y, &v)| y * v > 0.0);
    let mut theta = Array1::zeros(batch.p());
    let mut used = 0;
    let mut lambda = 1.0;
    while lambda >= 1e-12 && used < max_iter {
        let obj = Objective {
            z: batch.z.view(),
            y: batch.y.view(),
            loss: LossSpec::Logistic,
            lambda,
        };
        let opts = FitOptions {
            tol: 1e-10 * lambda.max(1e-6),
            max_iter: max_iter - used,
            method: Method::Lbfgs,
            trace: false,
        };
        let (res, hit) = lbfgs(&obj, theta, &opts, |_, m| separated(m));
        used += res.iterations.max(1);
        if hit {
            return Ok(true);
        }
        theta = res.theta;
        lambda *= 0.1;
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use ndarray::{array, Array2};

    fn batch(z: Array2<f64>, y: Array1<f64>) -> SampleBatch {
        let n = y.len();
        SampleBatch {
            z,
            f: Array2::zeros((0, n)),
            y,
            model: ModelKind::Rf,
            seed: 0,
        }
    }

    #[test]
    fn logistic_on_separable_toy_data() {
        let b = batch(
            array![[1.0, 2.0, -1.0, -2.0], [0.5, -0.3, 0.2, -0.1]],
            array![1.0, 1.0, -1.0, -1.0],
        );
        for method in [Method::Agd, Method::Lbfgs] {
            let opts = FitOptions {
                method,
                ..FitOptions::default()
            };
            let r = fit_ridge_erm_with(&b, LossSpec::Logistic, 0.1, &opts).unwrap();
            assert!(r.converged && r.grad_norm <= 1e-8, "{method:?}");
            assert!(r.risk < 2f64.ln());
        }
    }

    #[test]
    fn rejects_zero_one_and_nonpositive_lambda() {
        let b = batch(array![[1.0]], array![1.0]);
        assert!(matches!(
            fit_ridge_erm(&b, LossSpec::ZeroOne, 1.0, 1e-8, 10),
            Err(Error::UnfittableLoss(_))
        ));
        assert!(fit_ridge_erm(&b, LossSpec::Squared, 0.0, 1e-8, 10).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let b = batch(array![[1.0, 2.0, 3.0], [0.1, 0.0, 5.0]], array![1.0, -1.0, 2.0]);
        let r = fit_ridge_erm(&b, LossSpec::Squared, 1e-3, 1e-14, 2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn interpolation_trivial_cases() {
        let one = batch(array![[0.3], [1.0]], array![-1.0]);
        assert!(interpolation_check(&one, 50_000).unwrap());
        let dup = batch(array![[1.0, 1.0], [2.0, 2.0]], array![1.0, -1.0]);
        assert!(!interpolation_check(&dup, 50_000).unwrap());
        let bad = batch(array![[1.0]], array![0.5]);
        assert!(matches!(
            interpolation_check(&bad, 10),
            Err(Error::NonBinaryLabels(_))
        ));
    }

    #[test]
    fn json_omits_large_theta() {
        let b = batch(array![[1.0, 2.0], [0.0, 1.0]], array![1.0, -1.0]);
        let r = fit_ridge_erm(&b, LossSpec::Squared, 0.5, 1e-10, 1000).unwrap();
        let small = r.to_json(10);
        assert!(small.get("theta").is_some());
        let big = r.to_json(1);
        assert!(big.get("theta").is_none());
        for k in ["risk", "grad_norm", "iterations", "converged"] {
            assert!(big.get(k).is_some());
        }
    }
}
