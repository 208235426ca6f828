use chaoslab_core::models::sample_weights;
use chaoslab_core::spectra::{
    gram_hadamard_check, higher_gram_structure, spectra_report, v2_spike_decomposition,
    DEFAULT_P_CAP,
};

#[test]
fn gram_identity_holds_for_small_ensembles() {
    for (d, p) in [(10, 20), (8, 30), (16, 64), (3, 5)] {
        let we = sample_weights(d, p, d as u64).unwrap();
        for k in 1..=4 {
            let r = gram_hadamard_check(&we, k).unwrap();
            assert!(r <= 1e-10, "d={d} p={p} k={k}: {r:e}");
        }
    }
}

#[test]
fn centered_v2_stays_bounded_while_spike_grows() {
    let mut spikes = Vec::new();
    let mut centered = Vec::new();
    for d in [10, 20, 40] {
        let we = sample_weights(d, d * d / 2, 7).unwrap();
        let s = v2_spike_decomposition(&we, DEFAULT_P_CAP).unwrap();
        assert!((s.spike_op_norm - ((d * d / 2) as f64 / d as f64).sqrt()).abs() < 1e-12);
        assert!(s.full_op_norm > s.centered_op_norm);
        spikes.push(s.full_op_norm);
        centered.push(s.centered_op_norm);
    }
    assert!(spikes.windows(2).all(|w| w[1] > w[0]), "{spikes:?}");
    assert!(centered.iter().all(|&c| c <= 5.0), "{centered:?}");
    let dominance: Vec<f64> = spikes.iter().zip(&centered).map(|(s, c)| s / c).collect();
    assert!(dominance.windows(2).all(|w| w[1] > w[0]), "{dominance:?}");
}

#[test]
fn spike_decomposition_at_half_quadratic_scaling() {
    let we = sample_weights(30, 450, 3).unwrap();
    let s = v2_spike_decomposition(&we, DEFAULT_P_CAP).unwrap();
    assert!(s.centered_op_norm <= 5.0, "{s:?}");
}

#[test]
fn higher_hadamard_powers_are_near_identity() {
    let we = sample_weights(40, 800, 5).unwrap();
    let r3 = higher_gram_structure(&we, 3, DEFAULT_P_CAP).unwrap();
    let r5 = higher_gram_structure(&we, 5, DEFAULT_P_CAP).unwrap();
    assert!(r3 <= 2.0, "{r3}");
    assert!(r5 <= 1.0, "{r5}");
    let r4 = higher_gram_structure(&we, 4, DEFAULT_P_CAP).unwrap();
    assert!(r4.is_finite());
    assert!(higher_gram_structure(&we, 3, 100).is_err());
}

#[test]
fn report_serializes() {
    let we = sample_weights(8, 12, 1).unwrap();
    let rep = spectra_report(&we, DEFAULT_P_CAP).unwrap();
    assert_eq!(rep.gram_hadamard.len(), 4);
    let v = serde_json::to_value(&rep).unwrap();
    assert!(v["spike"]["centered_op_norm"].is_number());
}
