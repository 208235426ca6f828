use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::target::{PreparedTarget, TargetSpec};
use super::weights::WeightEnsemble;
use crate::error::{Error, Result};
use crate::hermite::{he, ActivationKind, ActivationSpec, HermiteCoeffs};
use crate::seed::{stream, Rng};

/// Data model used to generate a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    /// Random features `z = σ(Wx)`.
    Rf,
    /// Gaussian equivalent in the quadratic scaling.
    Ge,
    /// Partial Gaussian equivalent: orders ≤ 2 exact.
    Pge,
    /// Conditional Gaussian equivalent on the signal support.
    Cge,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Rf, ModelKind::Ge, ModelKind::Pge, ModelKind::Cge];

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Rf => "RF",
            ModelKind::Ge => "GE",
            ModelKind::Pge => "PGE",
            ModelKind::Cge => "CGE",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            ModelKind::Rf => 0,
            ModelKind::Ge => 1,
            ModelKind::Pge => 2,
            ModelKind::Cge => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        ModelKind::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RF" => Ok(ModelKind::Rf),
            "GE" => Ok(ModelKind::Ge),
            "PGE" => Ok(ModelKind::Pge),
            "CGE" => Ok(ModelKind::Cge),
            other => Err(Error::InvalidArgument(format!("unknown model tag `{other}`"))),
        }
    }
}

/// Generated dataset: features `Z` (`p×n`), latent `F` (`m×n`), labels `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub z: Array2<f64>,
    pub f: Array2<f64>,
    pub y: Array1<f64>,
    pub model: ModelKind,
    pub seed: u64,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.z.ncols() != n || self.f.ncols() != n {
            return Err(Error::DimMismatch(format!(
                "batch columns disagree: Z {}, F {}, y {n}",
                self.z.ncols(),
                self.f.ncols()
            )));
        }
        Ok(())
    }

    /// Columns `range` as a new batch.
    pub fn select(&self, cols: std::ops::Range<usize>) -> SampleBatch {
        SampleBatch {
            z: self.z.slice(s![.., cols.clone()]).to_owned(),
            f: self.f.slice(s![.., cols.clone()]).to_owned(),
            y: self.y.slice(s![cols]).to_owned(),
            model: self.model,
            seed: self.seed,
        }
    }
}

/// Batch generator bound to one weight ensemble, target and activation.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub kind: ModelKind,
    pub weights: Arc<WeightEnsemble>,
    pub target: Arc<PreparedTarget>,
    pub sigma: ActivationSpec,
    pub mu: HermiteCoeffs,
}

impl Sampler {
    /// Coefficients default to the Hermite expansion of `sigma`.
    pub fn new(
        kind: ModelKind,
        weights: Arc<WeightEnsemble>,
        target: &TargetSpec,
        sigma: ActivationSpec,
    ) -> Result<Self> {
        let prepared = Arc::new(target.prepare(weights.d())?);
        Sampler::with_prepared(kind, weights, prepared, sigma)
    }

    pub fn with_prepared(
        kind: ModelKind,
        weights: Arc<WeightEnsemble>,
        target: Arc<PreparedTarget>,
        sigma: ActivationSpec,
    ) -> Result<Self> {
        if target.d != weights.d() {
            return Err(Error::DimMismatch(format!(
                "target prepared for d = {}, weights have d = {}",
                target.d,
                weights.d()
            )));
        }
        let mu = sigma.hermite_coeffs()?;
        Ok(Sampler {
            kind,
            weights,
            target,
            sigma,
            mu,
        })
    }

    /// Override the Hermite coefficients used by the surrogate models.
    pub fn with_coeffs(mut self, mu: HermiteCoeffs) -> Self {
        self.mu = mu;
        self
    }

    pub fn batch(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        let we = &self.weights;
        let t = &self.target;
        match self.kind {
            ModelKind::Rf => rf_prepared(we, t, &self.sigma, n, seed),
            ModelKind::Ge => ge_prepared(we, t, &self.mu, n, seed),
            ModelKind::Pge => pge_prepared(we, t, &self.mu, n, seed),
            ModelKind::Cge => cge_prepared(we, t, &self.mu, n, seed),
        }
    }
}

/// Random-feature batch: `z = σ(Wx)`, latent evaluated exactly.
pub fn rf_batch(
    we: &WeightEnsemble,
    target: &TargetSpec,
    sigma: &ActivationSpec,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    rf_prepared(we, &target.prepare(we.d())?, sigma, n, seed)
}

/// Quadratic-scaling Gaussian equivalent batch.
pub fn ge_batch_quadratic(
    we: &WeightEnsemble,
    target: &TargetSpec,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    ge_prepared(we, &target.prepare(we.d())?, mu, n, seed)
}

/// Partial Gaussian equivalent batch.
pub fn pge_batch(
    we: &WeightEnsemble,
    target: &TargetSpec,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    pge_prepared(we, &target.prepare(we.d())?, mu, n, seed)
}

/// Conditional Gaussian equivalent batch.
pub fn cge_batch(
    we: &WeightEnsemble,
    target: &TargetSpec,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    cge_prepared(we, &target.prepare(we.d())?, mu, n, seed)
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    // Filled column by column so a longer batch extends a shorter one.
    let mut m = Array2::<f64>::zeros((rows, cols));
    for mut col in m.axis_iter_mut(Axis(1)) {
        col.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
    }
    m
}

/// `n` symmetric `d×d` matrices with `G_ii ~ N(0,1)`, `G_ij ~ N(0,1/2)`.
fn sym_gaussians(d: usize, n: usize, rng: &mut Rng) -> Array3<f64> {
    let mut g = Array3::<f64>::zeros((n, d, d));
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for mut gi in g.axis_iter_mut(Axis(0)) {
        for a in 0..d {
            gi[[a, a]] = StandardNormal.sample(rng);
            for b in a + 1..d {
                let v: f64 = StandardNormal.sample(rng);
                gi[[a, b]] = v * half;
                gi[[b, a]] = v * half;
            }
        }
    }
    g
}

/// `(w_jᵀ G_i w_j)_{j,i}` as a `p×n` matrix.
fn quadratic_forms(w: ArrayView2<f64>, g: &Array3<f64>) -> Array2<f64> {
    let (p, d) = w.dim();
    let n = g.len_of(Axis(0));
    let mut out = Array2::<f64>::zeros((p, n));
    if n == 0 || d == 0 {
        return out;
    }
    let wt = w.t();
    let chunk = ((1usize << 22) / (d * p).max(1)).clamp(1, n);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let c = end - start;
        let stacked = g
            .slice(s![start..end, .., ..])
            .to_shape((c * d, d))
            .expect("contiguous slice")
            .into_owned();
        let m = stacked.dot(&wt);
        for i in 0..c {
            let mi = m.slice(s![i * d..(i + 1) * d, ..]);
            let col = (&mi * &wt).sum_axis(Axis(0));
            out.column_mut(start + i).assign(&col);
        }
        start = end;
    }
    out
}

struct Latent {
    f: Array2<f64>,
}

impl Latent {
    fn new(t: &PreparedTarget, n: usize) -> Self {
        Latent {
            f: Array2::zeros((t.m(), n)),
        }
    }

    fn set_linear(&mut self, src: ArrayView2<f64>, s: usize) {
        self.f.slice_mut(s![..s, ..]).assign(&src.slice(s![..s, ..]));
    }
}

/// Exact evaluation of order-2 coordinates, and of order ≥ 3 when `exact_high`.
fn fill_exact(lat: &mut Latent, t: &PreparedTarget, x: ArrayView2<f64>, exact_high: bool) {
    for (i, c) in t.coords.iter().enumerate() {
        if c.order() <= 2 || exact_high {
            let row = c.eval_exact(x);
            lat.f.row_mut(t.row_of(i)).assign(&row);
        }
    }
}

fn fill_sym_gaussian(lat: &mut Latent, t: &PreparedTarget, g2: &Array3<f64>) {
    for (i, c) in t.coords.iter().enumerate() {
        if c.order() == 2 {
            let row = t.row_of(i);
            for (col, gi) in g2.axis_iter(Axis(0)).enumerate() {
                lat.f[[row, col]] = c.eval_sym_gaussian(gi);
            }
        }
    }
}

fn fill_surrogates(lat: &mut Latent, t: &PreparedTarget, n: usize, seed: u64) {
    let mut rng = stream(seed, "ghigh");
    for grp in &t.groups {
        let z = normal_matrix(grp.members.len(), n, &mut rng);
        let vals = grp.chol.dot(&z);
        for (a, &member) in grp.members.iter().enumerate() {
            lat.f.row_mut(t.row_of(member)).assign(&vals.row(a));
        }
    }
}

fn labels(t: &PreparedTarget, f: &Array2<f64>, seed: u64) -> Array1<f64> {
    let mut noise_rng = stream(seed, "noise");
    let mut label_rng = stream(seed, "label");
    f.axis_iter(Axis(1))
        .map(|col| {
            let idx = t.link.index_value(col) + t.noise.draw(&mut noise_rng);
            let u: f64 = label_rng.random();
            t.link.output_value(idx, u)
        })
        .collect()
}

fn finish(
    t: &PreparedTarget,
    z: Array2<f64>,
    lat: Latent,
    model: ModelKind,
    seed: u64,
) -> SampleBatch {
    let y = labels(t, &lat.f, seed);
    SampleBatch {
        z,
        f: lat.f,
        y,
        model,
        seed,
    }
}

fn check_dims(we: &WeightEnsemble, t: &PreparedTarget) -> Result<()> {
    if we.d() != t.d {
        return Err(Error::DimMismatch(format!(
            "weights have d = {}, target prepared for d = {}",
            we.d(),
            t.d
        )));
    }
    Ok(())
}

fn apply_activation(sigma: &ActivationSpec, pre: &mut Array2<f64>) {
    match sigma.kind {
        ActivationKind::Relu => pre.mapv_inplace(|v| v.max(0.0)),
        ActivationKind::Square => pre.mapv_inplace(|v| v * v),
        _ => pre.mapv_inplace(|v| sigma.eval(v)),
    }
}

pub(crate) fn rf_prepared(
    we: &WeightEnsemble,
    t: &PreparedTarget,
    sigma: &ActivationSpec,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_dims(we, t)?;
    sigma.validate()?;
    let x = normal_matrix(we.d(), n, &mut stream(seed, "x"));
    let mut z = we.w().dot(&x);
    apply_activation(sigma, &mut z);
    let mut lat = Latent::new(t, n);
    lat.set_linear(x.view(), t.s);
    fill_exact(&mut lat, t, x.view(), true);
    Ok(finish(t, z, lat, ModelKind::Rf, seed))
}

fn add_constant_and_noise(z: &mut Array2<f64>, mu: &HermiteCoeffs, seed: u64) {
    let (p, n) = z.dim();
    let mu0 = mu.mu(0);
    z.mapv_inplace(|v| v + mu0);
    if mu.mu_gt2 != 0.0 {
        let gstar = normal_matrix(p, n, &mut stream(seed, "gstar"));
        z.scaled_add(mu.mu_gt2, &gstar);
    }
}

pub(crate) fn ge_prepared(
    we: &WeightEnsemble,
    t: &PreparedTarget,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    conditional_gaussian(we, t, mu, n, seed, 0, ModelKind::Ge)
}

pub(crate) fn cge_prepared(
    we: &WeightEnsemble,
    t: &PreparedTarget,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    conditional_gaussian(we, t, mu, n, seed, t.s, ModelKind::Cge)
}

/// Shared construction of GE (`support = 0`) and CGE (`support = s`).
fn conditional_gaussian(
    we: &WeightEnsemble,
    t: &PreparedTarget,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
    support: usize,
    model: ModelKind,
) -> Result<SampleBatch> {
    check_dims(we, t)?;
    let d = we.d();
    let w = we.w();
    let mut g1 = normal_matrix(d, n, &mut stream(seed, "g1"));
    let mut g2 = sym_gaussians(d, n, &mut stream(seed, "g2"));

    let mut lat = Latent::new(t, n);
    if support > 0 {
        let x = normal_matrix(d, n, &mut stream(seed, "x"));
        let xs = x.slice(s![..support, ..]);
        lat.set_linear(x.view(), t.s);
        fill_sym_gaussian(&mut lat, t, &g2);
        fill_surrogates(&mut lat, t, n, seed);

        // Parts depending on the support.
        let ws = w.slice(s![.., ..support]);
        let proj = ws.dot(&xs);
        let wnorm2: Array1<f64> = ws.rows().into_iter().map(|r| r.dot(&r)).collect();
        let mut z = proj.clone() * mu.mu(1);
        let mu2 = mu.mu(2) / 2f64.sqrt();
        for ((j, i), v) in z.indexed_iter_mut() {
            *v += mu2 * (proj[[j, i]] * proj[[j, i]] - wnorm2[j]);
        }
        // Independent Gaussian part, orthogonal to the support.
        g1.slice_mut(s![..support, ..]).fill(0.0);
        g2.slice_mut(s![.., ..support, ..support]).fill(0.0);
        z += &(w.dot(&g1) * mu.mu(1));
        z.scaled_add(mu.mu(2), &quadratic_forms(w, &g2));
        add_constant_and_noise(&mut z, mu, seed);
        Ok(finish(t, z, lat, model, seed))
    } else {
        lat.set_linear(g1.view(), t.s);
        fill_sym_gaussian(&mut lat, t, &g2);
        fill_surrogates(&mut lat, t, n, seed);
        let mut z = w.dot(&g1) * mu.mu(1);
        z.scaled_add(mu.mu(2), &quadratic_forms(w, &g2));
        add_constant_and_noise(&mut z, mu, seed);
        Ok(finish(t, z, lat, model, seed))
    }
}

pub(crate) fn pge_prepared(
    we: &WeightEnsemble,
    t: &PreparedTarget,
    mu: &HermiteCoeffs,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_dims(we, t)?;
    let x = normal_matrix(we.d(), n, &mut stream(seed, "x"));
    let proj = we.w().dot(&x);
    let (mu1, mu2) = (mu.mu(1), mu.mu(2));
    let mut z = proj.mapv(|v| mu1 * v + mu2 * he(2, v));
    add_constant_and_noise(&mut z, mu, seed);
    let mut lat = Latent::new(t, n);
    lat.set_linear(x.view(), t.s);
    fill_exact(&mut lat, t, x.view(), false);
    fill_surrogates(&mut lat, t, n, seed);
    Ok(finish(t, z, lat, ModelKind::Pge, seed))
}

/// Coordinates of order ≥ 3 that are replaced by Gaussian surrogates.
pub fn surrogate_rows(t: &PreparedTarget) -> Vec<usize> {
    t.coords
        .iter()
        .enumerate()
        .filter(|(_, c)| c.order() >= 3)
        .map(|(i, _)| t.row_of(i))
        .collect()
}
