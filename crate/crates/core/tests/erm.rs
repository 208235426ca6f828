use std::sync::Arc;

use chaoslab_core::erm::{
    fit_ridge_erm, fit_ridge_erm_with, interpolation_check, moreau, prox, test_error, FitOptions,
    LossSpec, Method,
};
use chaoslab_core::hermite::ActivationSpec;
use chaoslab_core::models::{sample_weights, LinkSpec, ModelKind, NoiseSpec, OutputMap, Sampler, TargetSpec};
use chaoslab_core::SampleBatch;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_batch(rng: &mut ChaCha8Rng, p: usize, n: usize, binary: bool) -> SampleBatch {
    let z = Array2::from_shape_fn((p, n), |_| rng.sample::<f64, _>(StandardNormal) + 0.3);
    let y = Array1::from_shape_fn(n, |_| {
        let v: f64 = rng.sample(StandardNormal);
        if binary {
            if v >= 0.0 { 1.0 } else { -1.0 }
        } else {
            v
        }
    });
    SampleBatch {
        z,
        f: Array2::zeros((0, n)),
        y,
        model: ModelKind::Rf,
        seed: 0,
    }
}

fn ridge_oracle(b: &SampleBatch, lambda: f64) -> DVector<f64> {
    let (p, n) = b.z.dim();
    let z = DMatrix::from_fn(p, n, |i, j| b.z[[i, j]]);
    let y = DVector::from_iterator(n, b.y.iter().copied());
    let a = &z * z.transpose() / n as f64 + DMatrix::identity(p, p) * lambda;
    let rhs = &z * y / n as f64;
    a.cholesky().unwrap().solve(&rhs)
}

#[test]
fn squared_loss_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..20 {
        let p = rng.random_range(5..=400);
        let n = rng.random_range(5..=400);
        let lambda = 10f64.powf(rng.random_range(-2.0..0.0));
        let b = random_batch(&mut rng, p, n, false);
        let oracle = ridge_oracle(&b, lambda);
        for method in [Method::Agd, Method::Lbfgs] {
            let opts = FitOptions {
                method,
                ..FitOptions::default()
            };
            let r = fit_ridge_erm_with(&b, LossSpec::Squared, lambda, &opts).unwrap();
            let diff: f64 = r
                .theta
                .iter()
                .zip(oracle.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let rel = diff / oracle.norm();
            assert!(r.converged, "trial {trial} {method:?}: grad {}", r.grad_norm);
            assert!(rel <= 1e-6, "trial {trial} {method:?}: rel {rel}");
        }
    }
}

#[test]
fn huge_penalty_drives_theta_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = random_batch(&mut rng, 30, 50, false);
    let r = fit_ridge_erm(&b, LossSpec::Squared, 1e6, 1e-12, 10_000).unwrap();
    let zy = b.z.dot(&b.y) / 50.0;
    assert!(r.theta.dot(&r.theta).sqrt() <= 1e-3 * zy.dot(&zy).sqrt());
}

#[test]
fn objective_is_monotone_along_iterates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for loss in [LossSpec::Squared, LossSpec::Logistic, LossSpec::hinge()] {
        let b = random_batch(&mut rng, 60, 80, loss != LossSpec::Squared);
        for method in [Method::Agd, Method::Lbfgs] {
            let opts = FitOptions {
                method,
                trace: true,
                ..FitOptions::default()
            };
            let r = fit_ridge_erm_with(&b, loss, 1e-2, &opts).unwrap();
            assert!(r.converged, "{loss:?} {method:?} grad {} iters {}", r.grad_norm, r.iterations);
            for w in r.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{loss:?} {method:?} {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for loss in [LossSpec::Squared, LossSpec::Logistic, LossSpec::hinge()] {
        for _ in 0..100 {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut x: f64 = 3.0 * rng.sample::<f64, _>(StandardNormal);
            if let LossSpec::SmoothedHinge { delta } = loss {
                // Keep away from the kinks of the second derivative.
                while ((y * x - 1.0).abs() - delta).abs() < 1e-3 {
                    x += 0.01;
                }
            }
            let h = 1e-6;
            let fd = (loss.value(y, x + h) - loss.value(y, x - h)) / (2.0 * h);
            let an = loss.deriv(y, x);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{loss:?} at ({y},{x})");
            let fd2 = (loss.deriv(y, x + h) - loss.deriv(y, x - h)) / (2.0 * h);
            let an2 = loss.second(y, x);
            assert!((fd2 - an2).abs() <= 1e-5 * an2.abs().max(1.0), "{loss:?} second at ({y},{x})");
        }
    }
}

#[test]
fn prox_satisfies_first_order_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for loss in [LossSpec::Squared, LossSpec::Logistic, LossSpec::hinge()] {
        for _ in 0..200 {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let z: f64 = 4.0 * rng.sample::<f64, _>(StandardNormal);
            let gamma = 10f64.powf(rng.random_range(-3.0..2.0));
            let x = prox(y, z, gamma, loss).unwrap();
            let foc = loss.deriv(y, x) + (x - z) / gamma;
            assert!(foc.abs() <= 1e-10, "{loss:?}: {foc}");
        }
    }
}

#[test]
fn logistic_prox_matches_bisection_oracle() {
    // x(1 + eˣ) = 1 by plain bisection.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (1.0 + mid.exp()) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = prox(1.0, 0.0, 1.0, LossSpec::Logistic).unwrap();
    assert!((p - lo).abs() < 1e-9);
    assert!((p - 0.401).abs() < 1e-3);
}

#[test]
fn moreau_is_lipschitz_on_a_grid() {
    for loss in [LossSpec::Logistic, LossSpec::hinge()] {
        let h = 1e-5;
        let mut max_slope: f64 = 0.0;
        for &y in &[-1.0, 1.0] {
            for zi in -20..=20 {
                let z = zi as f64 * 0.25;
                for &gamma in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                    let m = |y: f64, z: f64, g: f64| moreau(y, z, g, loss).unwrap();
                    let dz = (m(y, z + h, gamma) - m(y, z - h, gamma)) / (2.0 * h);
                    let dy = (m(y + h, z, gamma) - m(y - h, z, gamma)) / (2.0 * h);
                    let dg = (m(y, z, gamma + h) - m(y, z, gamma - h)) / (2.0 * h);
                    max_slope = max_slope.max(dz.abs()).max(dy.abs()).max(dg.abs());
                }
            }
        }
        assert!(max_slope <= 10.0, "{loss:?}: {max_slope}");
    }
}

fn linear_target(d: usize, output: OutputMap) -> TargetSpec {
    assert!(d >= 1);
    TargetSpec {
        s: 1,
        higher: vec![],
        link: LinkSpec::identity_sum(0.0, vec![1.0]).with_output(output),
        noise: NoiseSpec::None,
    }
}

#[test]
fn test_error_reference_values() {
    let d = 6;
    let we = Arc::new(sample_weights(d, 5, 1).unwrap());
    let theta = Array1::zeros(5);
    let coin = Sampler::new(
        ModelKind::Rf,
        we.clone(),
        &linear_target(d, OutputMap::Logistic { scale: 0.0 }),
        ActivationSpec::relu(),
    )
    .unwrap();
    let e = test_error(&theta, &coin, LossSpec::ZeroOne, 20_000, 1).unwrap();
    assert!(e.within(0.5, 4.0), "{e:?}");
    // ½ E[y²] with y = x₁.
    let reg = Sampler::new(ModelKind::Rf, we, &linear_target(d, OutputMap::Identity), ActivationSpec::relu()).unwrap();
    let e = test_error(&theta, &reg, LossSpec::Squared, 20_000, 2).unwrap();
    assert!(e.within(0.5, 4.0), "{e:?}");
    assert!(test_error(&theta, &reg, LossSpec::Squared, 99, 2).is_err());
}

#[test]
fn fitted_test_error_is_nonnegative() {
    let d = 6;
    let we = Arc::new(sample_weights(d, 12, 1).unwrap());
    let s = Sampler::new(ModelKind::Rf, we, &linear_target(d, OutputMap::Identity), ActivationSpec::relu()).unwrap();
    let train = s.batch(100, 3).unwrap();
    let r = fit_ridge_erm(&train, LossSpec::Squared, 1e-2, 1e-8, 100_000).unwrap();
    let e = test_error(&r.theta, &s, LossSpec::Squared, 2000, 4).unwrap();
    assert!(e.value >= 0.0);
    assert!(e.value < 0.5);
}

#[test]
fn random_labels_interpolate_above_half() {
    let d = 16;
    let n = (0.45 * (d * d) as f64) as usize;
    let target = linear_target(d, OutputMap::Logistic { scale: 0.0 });
    let mut below = 0;
    let mut above = 0;
    for trial in 0..8u64 {
        for (ratio, count) in [(0.35, &mut below), (0.65, &mut above)] {
            let p = (ratio * n as f64).round() as usize;
            let we = Arc::new(sample_weights(d, p, 100 + trial).unwrap());
            let s = Sampler::new(ModelKind::Rf, we, &target, ActivationSpec::relu()).unwrap();
            let b = s.batch(n, 200 + trial).unwrap();
            if interpolation_check(&b, 50_000).unwrap() {
                *count += 1;
            }
        }
    }
    assert!(below <= 2, "{below}/8 interpolated at p/n = 0.35");
    assert!(above >= 6, "{above}/8 interpolated at p/n = 0.65");
}
