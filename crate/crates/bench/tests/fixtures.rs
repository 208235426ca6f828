use chaoslab_bench::{sampler, training_batch, FIT_LOSSES};
use chaoslab_core::erm::{fit_ridge_erm_with, FitOptions, Method};
use chaoslab_core::models::ModelKind;

#[test]
fn fixtures_have_expected_shapes() {
    for kind in ModelKind::ALL {
        let b = sampler(kind, 6, 10).batch(20, 1).unwrap();
        assert_eq!((b.p(), b.n()), (10, 20));
        assert!(b.y.iter().all(|&y| y == 1.0 || y == -1.0));
    }
}

#[test]
fn benchmarked_fits_converge() {
    let batch = training_batch(8, 40, 60);
    for loss in FIT_LOSSES {
        let opts = FitOptions {
            tol: 1e-6,
            method: Method::Lbfgs,
            ..FitOptions::default()
        };
        let r = fit_ridge_erm_with(&batch, loss, 1e-3, &opts).unwrap();
        assert!(r.converged, "{}", loss.name());
    }
}
