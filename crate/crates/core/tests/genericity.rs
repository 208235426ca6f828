use chaoslab_core::genericity::{
    contraction_norms, coordinate_from_matrix, default_tolerance, excess_kurtosis_mc,
    exact_kurtosis_order2, genericity_report, kurtosis_contraction_consistency,
    sample_generic_beta,
};
use chaoslab_core::models::ChaosCoordinate;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn rank_one_kurtosis_is_twelve() {
    let e = excess_kurtosis_mc(&ChaosCoordinate::axis(2, 0), 3, 1_000_000, 1).unwrap();
    assert!(e.within(12.0, 4.0), "{e:?}");
}

#[test]
fn linear_coordinate_is_gaussian() {
    let e = excess_kurtosis_mc(&ChaosCoordinate::axis(1, 0), 3, 200_000, 2).unwrap();
    assert!(e.within(0.0, 4.0), "{e:?}");
}

#[test]
fn uniform_sphere_beta_is_generic_at_d40() {
    let d = 40;
    let norms: Vec<f64> = (0..20)
        .map(|s| sample_generic_beta(d, 2, s).unwrap().max_contraction())
        .collect();
    assert!(median(norms.clone()) <= 0.5);
    let passing = norms.iter().filter(|&&c| c <= default_tolerance(d)).count();
    assert!(passing >= 18, "{passing}/20");
    let rank_one = contraction_norms(&ChaosCoordinate::axis(2, 0), d).unwrap();
    assert!(rank_one[0] > default_tolerance(d));
}

#[test]
fn contractions_shrink_with_dimension() {
    let med = |d| median((0..20).map(|s| sample_generic_beta(d, 2, s).unwrap().max_contraction()).collect());
    assert!(med(24) < med(6));
}

#[test]
fn sphere_coefficients_are_unit() {
    for k in 2..=3 {
        let g = sample_generic_beta(7, k, 3).unwrap();
        if let chaoslab_core::models::Coefficients::Explicit { beta } = &g.coord.coeff {
            let n: f64 = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-10);
        } else {
            panic!("explicit coefficients expected");
        }
    }
}

/// Eigen-decomposition oracle: `E ξ⁴ − 3 = 12 Σ λ⁴` for `ξ = ⟨B, H₂(x)⟩`.
#[test]
fn kurtosis_matches_eigenvalue_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..10 {
        let d = 3 + trial % 10;
        let mut b = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let v: f64 = rng.sample(StandardNormal);
                b[[i, j]] = v;
                b[[j, i]] = v;
            }
        }
        let coord = coordinate_from_matrix(&b).unwrap();
        let bn = &b / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| bn[[i, j]]));
        let oracle = 12.0 * eig.eigenvalues.iter().map(|l| l.powi(4)).sum::<f64>();
        let exact = exact_kurtosis_order2(&coord, d).unwrap();
        assert!((exact - oracle).abs() < 1e-10);
        let mc = excess_kurtosis_mc(&coord, d, 400_000, trial as u64).unwrap();
        assert!(mc.within(oracle, 4.0), "trial {trial}: {mc:?} vs {oracle}");
    }
}

#[test]
fn consistency_reports() {
    let r = kurtosis_contraction_consistency(&ChaosCoordinate::axis(2, 0), 4, 400_000, 5).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.exact, 12.0);
    let d = 10;
    let id = coordinate_from_matrix(&Array2::eye(d)).unwrap();
    let r = kurtosis_contraction_consistency(&id, d, 400_000, 6).unwrap();
    assert!((r.exact - 12.0 / d as f64).abs() < 1e-12);
    assert!(r.pass, "{r:?}");
    let g = sample_generic_beta(40, 2, 1).unwrap();
    let r = kurtosis_contraction_consistency(&g.coord, 40, 100_000, 7).unwrap();
    assert!(r.pass && r.exact < 1.0, "{r:?}");
    assert!(kurtosis_contraction_consistency(&ChaosCoordinate::axis(3, 0), 4, 2000, 1).is_err());
}

#[test]
fn report_serializes_with_expected_fields() {
    let rep = genericity_report(&ChaosCoordinate::axis(2, 0), 5, 5000, 1).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    for key in ["order", "contraction_norms", "kurtosis", "se", "generic_at_default_tol"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["generic_at_default_tol"], false);
}
