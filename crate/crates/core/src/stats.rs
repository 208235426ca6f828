//! Summary statistics with standard errors.

use serde::{Deserialize, Serialize};

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    /// `|value − target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n − 1` denominator.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean and `sd/√n`.
pub fn mean_se(x: &[f64]) -> Estimate {
    let n = x.len();
    let se = if n >= 2 {
        (variance(x) / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Estimate::new(mean(x), se)
}

fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let c = v - m;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    (m2 / n, m3 / n, m4 / n)
}

pub fn skewness(x: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(x);
    m3 / m2.powf(1.5)
}

pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(x);
    m4 / (m2 * m2) - 3.0
}

/// Delete-a-group jackknife for a statistic of the sample.
pub fn jackknife(x: &[f64], groups: usize, stat: impl Fn(&[f64]) -> f64) -> Estimate {
    let full = stat(x);
    let n = x.len();
    let g = groups.clamp(2, n.max(2));
    if n < 2 {
        return Estimate::new(full, f64::NAN);
    }
    let mut leave_out = Vec::with_capacity(g);
    let mut buf = Vec::with_capacity(n);
    for k in 0..g {
        let (lo, hi) = (k * n / g, (k + 1) * n / g);
        buf.clear();
        buf.extend_from_slice(&x[..lo]);
        buf.extend_from_slice(&x[hi..]);
        leave_out.push(stat(&buf));
    }
    let lm = mean(&leave_out);
    let var = leave_out.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>() * (g - 1) as f64 / g as f64;
    Estimate::new(full, var.sqrt())
}

/// Skewness with a 50-group jackknife standard error.
pub fn skewness_se(x: &[f64]) -> Estimate {
    jackknife(x, 50, skewness)
}

/// Excess kurtosis with a 50-group jackknife standard error.
pub fn excess_kurtosis_se(x: &[f64]) -> Estimate {
    jackknife(x, 50, excess_kurtosis)
}

/// Two-sample Kolmogorov–Smirnov distance `sup_t |F_a(t) − F_b(t)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Equal-width histogram with counts and densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

/// `bins` bins over `[lo, hi)`; values outside are dropped from counts but
/// included in the density normalization.
pub fn histogram(x: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in x {
        if v >= lo && v < hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let total = x.len().max(1) as f64;
    Histogram {
        edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn gaussian_moments() {
        let mut rng = crate::seed::rng_from_seed(5);
        let x: Vec<f64> = (0..200_000).map(|_| rng.sample(StandardNormal)).collect();
        let m = mean_se(&x);
        assert!(m.within(0.0, 4.0));
        let k = excess_kurtosis_se(&x);
        assert!(k.within(0.0, 4.0), "{k:?}");
        assert!((k.se - (24.0f64 / 200_000.0).sqrt()).abs() < 0.004);
        let s = skewness_se(&x);
        assert!(s.within(0.0, 4.0));
    }

    #[test]
    fn ks_of_identical_and_shifted_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_distance(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 1000.0).collect();
        assert_eq!(ks_distance(&a, &b), 1.0);
        let c: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        assert!((ks_distance(&a, &c) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[-1.0, 0.0, 0.5, 0.99, 5.0], -1.0, 1.0, 2);
        assert_eq!(h.counts, vec![1, 3]);
        assert_eq!(h.edges, vec![-1.0, 0.0, 1.0]);
    }
}
