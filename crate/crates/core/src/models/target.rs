use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{basis_dim, he, iota, BasisIndexer, SymTensor};
use crate::seed::stream;

/// Highest order accepted for dense coefficient vectors.
pub const MAX_DENSE_ORDER: usize = 3;
/// Highest order accepted for rank-one coefficient vectors.
pub const MAX_RANK_ONE_ORDER: usize = 4;
const UNIT_TOL: f64 = 1e-8;

/// How the coefficient vector `β ∈ ℝ^{B_{d,k}}` of a chaos coordinate is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficients {
    /// Explicit unit vector in the shared basis ordering.
    Explicit { beta: Vec<f64> },
    /// `β = q_k(u)` for a unit direction `u`.
    RankOne { u: Vec<f64> },
    /// `β = q_k(e_axis)`.
    Axis { axis: usize },
    /// `β` uniform on the unit sphere of `ℝ^{B_{d,k}}`.
    Sphere { seed: u64 },
}

/// A chaos coordinate `ξ = ⟨β, h_k(x)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosCoordinate {
    pub order: usize,
    pub coeff: Coefficients,
}

impl ChaosCoordinate {
    pub fn explicit(order: usize, beta: Vec<f64>) -> Self {
        ChaosCoordinate {
            order,
            coeff: Coefficients::Explicit { beta },
        }
    }

    pub fn rank_one(order: usize, u: Vec<f64>) -> Self {
        ChaosCoordinate {
            order,
            coeff: Coefficients::RankOne { u },
        }
    }

    pub fn axis(order: usize, axis: usize) -> Self {
        ChaosCoordinate {
            order,
            coeff: Coefficients::Axis { axis },
        }
    }

    pub fn sphere(order: usize, seed: u64) -> Self {
        ChaosCoordinate {
            order,
            coeff: Coefficients::Sphere { seed },
        }
    }

    /// Resolve into an evaluable form in dimension `d`.
    pub fn resolve(&self, d: usize) -> Result<ResolvedCoordinate> {
        let k = self.order;
        if k == 0 {
            return Err(Error::UnsupportedOrder {
                k,
                reason: "chaos coordinates need order ≥ 1",
            });
        }
        match &self.coeff {
            Coefficients::RankOne { u } => {
                if u.len() != d {
                    return Err(Error::LengthMismatch {
                        expected: d,
                        got: u.len(),
                    });
                }
                let u = Array1::from(u.clone());
                let norm = u.dot(&u).sqrt();
                if (norm - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Coefficient(format!(
                        "rank-one direction has norm {norm}"
                    )));
                }
                rank_one_resolved(k, u)
            }
            Coefficients::Axis { axis } => {
                if *axis >= d {
                    return Err(Error::InvalidArgument(format!(
                        "axis {axis} out of range for d = {d}"
                    )));
                }
                let mut u = Array1::zeros(d);
                u[*axis] = 1.0;
                rank_one_resolved(k, u)
            }
            Coefficients::Explicit { beta } => dense_resolved(k, d, beta.clone()),
            Coefficients::Sphere { seed } => {
                if k > MAX_DENSE_ORDER {
                    return Err(unsupported_dense(k));
                }
                dense_resolved(k, d, sphere_vector(basis_dim(d, k), *seed))
            }
        }
    }
}

fn unsupported_dense(k: usize) -> Error {
    Error::UnsupportedOrder {
        k,
        reason: "dense coefficients support k ≤ 3",
    }
}

fn rank_one_resolved(k: usize, u: Array1<f64>) -> Result<ResolvedCoordinate> {
    if k > MAX_RANK_ONE_ORDER {
        return Err(Error::UnsupportedOrder {
            k,
            reason: "rank-one coefficients support k ≤ 4",
        });
    }
    Ok(ResolvedCoordinate::RankOne { order: k, u })
}

fn dense_resolved(k: usize, d: usize, beta: Vec<f64>) -> Result<ResolvedCoordinate> {
    if k > MAX_DENSE_ORDER {
        return Err(unsupported_dense(k));
    }
    let norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::Coefficient(format!(
            "coefficient vector has norm {norm}"
        )));
    }
    let tensor = iota(&beta, k, d)?;
    Ok(match k {
        1 => ResolvedCoordinate::RankOne {
            order: 1,
            u: Array1::from(beta),
        },
        2 => ResolvedCoordinate::Dense2 {
            matrix: tensor.to_matrix()?,
            beta,
        },
        _ => {
            let data = tensor.as_tensor().data();
            let trace = Array1::from_shape_fn(d, |j| (0..d).map(|i| data[(i * d + i) * d + j]).sum());
            ResolvedCoordinate::Dense3 {
                tensor,
                trace,
                beta,
            }
        }
    })
}

/// Unit vector uniform on `S^{len-1}`, from stream `(seed, "beta")`.
pub fn sphere_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, "beta");
    loop {
        let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Evaluable chaos coordinate.
#[derive(Debug, Clone)]
pub enum ResolvedCoordinate {
    RankOne {
        order: usize,
        u: Array1<f64>,
    },
    Dense2 {
        beta: Vec<f64>,
        /// `ι(β)` as a symmetric matrix.
        matrix: Array2<f64>,
    },
    Dense3 {
        beta: Vec<f64>,
        tensor: SymTensor,
        /// `t_j = Σ_i T_{iij}`.
        trace: Array1<f64>,
    },
}

impl ResolvedCoordinate {
    pub fn order(&self) -> usize {
        match self {
            ResolvedCoordinate::RankOne { order, .. } => *order,
            ResolvedCoordinate::Dense2 { .. } => 2,
            ResolvedCoordinate::Dense3 { .. } => 3,
        }
    }

    /// `ι(β)` for order-2 coordinates.
    pub fn matrix(&self) -> Option<Array2<f64>> {
        match self {
            ResolvedCoordinate::Dense2 { matrix, .. } => Some(matrix.clone()),
            ResolvedCoordinate::RankOne { order: 2, u } => {
                let col = u.view().insert_axis(Axis(1));
                Some(col.dot(&col.t()))
            }
            _ => None,
        }
    }

    /// `⟨β, β'⟩` for two coordinates of the same order.
    pub fn overlap(&self, other: &ResolvedCoordinate) -> Result<f64> {
        use ResolvedCoordinate::*;
        if self.order() != other.order() {
            return Ok(0.0);
        }
        let k = self.order();
        Ok(match (self, other) {
            (RankOne { u, .. }, RankOne { u: v, .. }) => u.dot(v).powi(k as i32),
            (Dense2 { beta: a, .. }, Dense2 { beta: b, .. })
            | (Dense3 { beta: a, .. }, Dense3 { beta: b, .. }) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            (RankOne { u, .. }, dense) | (dense, RankOne { u, .. }) => {
                let ix = BasisIndexer::shared(u.len(), k)?;
                let q = crate::hermite::tensor::q_k_unchecked(u.view(), &ix);
                let beta = match dense {
                    Dense2 { beta, .. } | Dense3 { beta, .. } => beta,
                    RankOne { .. } => unreachable!(),
                };
                q.iter().zip(beta).map(|(x, y)| x * y).sum()
            }
            _ => 0.0,
        })
    }

    /// `ξ(x_i)` for every column of `x` (`d×n`).
    pub fn eval_exact(&self, x: ArrayView2<f64>) -> Array1<f64> {
        match self {
            ResolvedCoordinate::RankOne { order, u } => {
                let proj = u.dot(&x);
                proj.mapv(|t| he(*order, t))
            }
            ResolvedCoordinate::Dense2 { matrix, .. } => {
                let tx = matrix.dot(&x);
                let trace: f64 = matrix.diag().sum();
                let quad = (&tx * &x).sum_axis(Axis(0));
                quad.mapv(|q| (q - trace) / 2f64.sqrt())
            }
            ResolvedCoordinate::Dense3 { tensor, trace, .. } => {
                let d = x.nrows();
                let n = x.ncols();
                let tm = tensor.as_tensor().matricize(1);
                let lin = trace.dot(&x);
                let mut out = Array1::zeros(n);
                let chunk = (1 << 20) / (d * d).max(1);
                let chunk = chunk.clamp(1, 1024);
                let mut start = 0;
                while start < n {
                    let end = (start + chunk).min(n);
                    let xs = x.slice(s![.., start..end]);
                    let c = end - start;
                    let mut outer = Array2::<f64>::zeros((d * d, c));
                    for (col, xi) in xs.axis_iter(Axis(1)).enumerate() {
                        for a in 0..d {
                            for b in 0..d {
                                outer[[a * d + b, col]] = xi[a] * xi[b];
                            }
                        }
                    }
                    let txx = tm.dot(&outer);
                    let cubic = (&txx * &xs).sum_axis(Axis(0));
                    for col in 0..c {
                        out[start + col] = (cubic[col] - 3.0 * lin[start + col]) / 6f64.sqrt();
                    }
                    start = end;
                }
                out
            }
        }
    }

    /// `⟨ι(β), G⟩_F` for an order-2 coordinate and symmetric `G`.
    pub fn eval_sym_gaussian(&self, g: ArrayView2<f64>) -> f64 {
        match self {
            ResolvedCoordinate::Dense2 { matrix, .. } => (matrix * &g).sum(),
            ResolvedCoordinate::RankOne { order: 2, u } => u.dot(&g.dot(u)),
            _ => panic!("symmetric Gaussian evaluation requires an order-2 coordinate"),
        }
    }
}

/// Inner map of the link: `f ↦ t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexMap {
    /// `t = offset + Σ_i w_i f_i`.
    WeightedSum { offset: f64, weights: Vec<f64> },
    /// `t = Σ_k c_k He_k(f_1)` on a single latent coordinate.
    HermiteSingleIndex { coeffs: Vec<f64> },
}

/// Outer map of the link, applied to `t + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputMap {
    #[default]
    Identity,
    /// `sign(t)`, with `sign(0) = +1`.
    Sign,
    /// `y = +1` with probability `1 / (1 + exp(−scale·t))`.
    Logistic { scale: f64 },
}

/// Link `η(f; ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub index: IndexMap,
    #[serde(default)]
    pub output: OutputMap,
}

impl LinkSpec {
    pub fn identity_sum(offset: f64, weights: Vec<f64>) -> Self {
        LinkSpec {
            index: IndexMap::WeightedSum { offset, weights },
            output: OutputMap::Identity,
        }
    }

    pub fn sign_sum(offset: f64, weights: Vec<f64>) -> Self {
        LinkSpec {
            index: IndexMap::WeightedSum { offset, weights },
            output: OutputMap::Sign,
        }
    }

    pub fn hermite_single_index(coeffs: Vec<f64>, output: OutputMap) -> Self {
        LinkSpec {
            index: IndexMap::HermiteSingleIndex { coeffs },
            output,
        }
    }

    pub fn with_output(mut self, output: OutputMap) -> Self {
        self.output = output;
        self
    }

    pub fn arity(&self) -> usize {
        match &self.index {
            IndexMap::WeightedSum { weights, .. } => weights.len(),
            IndexMap::HermiteSingleIndex { .. } => 1,
        }
    }

    pub fn is_binary(&self) -> bool {
        !matches!(self.output, OutputMap::Identity)
    }

    pub fn index_value(&self, f: ArrayView1<f64>) -> f64 {
        match &self.index {
            IndexMap::WeightedSum { offset, weights } => {
                offset + weights.iter().zip(f.iter()).map(|(w, v)| w * v).sum::<f64>()
            }
            IndexMap::HermiteSingleIndex { coeffs } => crate::hermite::hermite_series(coeffs, f[0]),
        }
    }

    /// `η` given the noisy index `t` and a uniform draw `u ∈ [0, 1)`.
    pub fn output_value(&self, t: f64, u: f64) -> f64 {
        match self.output {
            OutputMap::Identity => t,
            OutputMap::Sign => sign(t),
            OutputMap::Logistic { scale } => {
                let prob = 1.0 / (1.0 + (-scale * t).exp());
                if u < prob {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Additive noise on the link index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    Gaussian { sd: f64 },
    /// Uniform on `[−half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl NoiseSpec {
    pub fn draw(&self, rng: &mut crate::seed::Rng) -> f64 {
        use rand::Rng as _;
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Latent signal `f_*(x) = (x_1..x_s, ξ_1, ..)` with link and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Number of order-1 coordinates `x_1..x_s`.
    pub s: usize,
    #[serde(default)]
    pub higher: Vec<ChaosCoordinate>,
    pub link: LinkSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
}

impl TargetSpec {
    /// `y = Σ_k c_k He_k(x_1)`.
    pub fn single_index(coeffs: Vec<f64>, output: OutputMap) -> Self {
        TargetSpec {
            s: 1,
            higher: Vec::new(),
            link: LinkSpec::hermite_single_index(coeffs, output),
            noise: NoiseSpec::None,
        }
    }

    pub fn m(&self) -> usize {
        self.s + self.higher.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.link.arity() != self.m() {
            return Err(Error::InvalidArgument(format!(
                "link expects {} inputs but the target has {} coordinates",
                self.link.arity(),
                self.m()
            )));
        }
        if let Some(c) = self.higher.iter().find(|c| c.order < 2) {
            return Err(Error::UnsupportedOrder {
                k: c.order,
                reason: "higher coordinates need order ≥ 2; use `s` for linear ones",
            });
        }
        Ok(())
    }

    /// Rewrite a Hermite single-index link as rank-one chaos coordinates
    /// along `e_1` combined by a weighted sum; other targets are returned
    /// unchanged.
    pub fn chaos_expanded(&self) -> TargetSpec {
        let coeffs = match (&self.link.index, self.s, self.higher.is_empty()) {
            (IndexMap::HermiteSingleIndex { coeffs }, 1, true) => coeffs,
            _ => return self.clone(),
        };
        let offset = coeffs.first().copied().unwrap_or(0.0);
        let mut weights = vec![coeffs.get(1).copied().unwrap_or(0.0)];
        let mut higher = Vec::new();
        for (k, &c) in coeffs.iter().enumerate().skip(2) {
            if c != 0.0 {
                higher.push(ChaosCoordinate::axis(k, 0));
                weights.push(c);
            }
        }
        TargetSpec {
            s: 1,
            higher,
            link: LinkSpec {
                index: IndexMap::WeightedSum { offset, weights },
                output: self.link.output,
            },
            noise: self.noise,
        }
    }

    pub fn prepare(&self, d: usize) -> Result<PreparedTarget> {
        self.validate()?;
        if self.s > d {
            return Err(Error::InvalidArgument(format!(
                "support size {} exceeds d = {d}",
                self.s
            )));
        }
        let coords = self
            .higher
            .iter()
            .map(|c| c.resolve(d))
            .collect::<Result<Vec<_>>>()?;
        let mut orders: Vec<usize> = coords
            .iter()
            .map(|c| c.order())
            .filter(|&k| k >= 3)
            .collect();
        orders.sort_unstable();
        orders.dedup();
        let mut groups = Vec::new();
        for k in orders {
            let members: Vec<usize> = (0..coords.len())
                .filter(|&i| coords[i].order() == k)
                .collect();
            let gram = Array2::from_shape_fn((members.len(), members.len()), |(a, b)| {
                coords[members[a]]
                    .overlap(&coords[members[b]])
                    .unwrap_or(f64::NAN)
            });
            let chol = psd_cholesky(&gram)?;
            groups.push(SurrogateGroup {
                order: k,
                members,
                chol,
            });
        }
        Ok(PreparedTarget {
            d,
            s: self.s,
            coords,
            groups,
            link: self.link.clone(),
            noise: self.noise,
        })
    }
}

/// Lower-triangular `L` with `L Lᵀ = A` for positive semidefinite `A`.
/// Pivots in `[−1e−10, 0]` are treated as zero.
pub fn psd_cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !diag.is_finite() || diag < -1e-10 {
            return Err(Error::Coefficient(format!(
                "Gram matrix is not positive semidefinite (pivot {diag:e})"
            )));
        }
        let ljj = diag.max(0.0).sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = if ljj > 1e-12 { v / ljj } else { 0.0 };
        }
    }
    Ok(l)
}

/// Coordinates of one order `k ≥ 3` replaced jointly by Gaussians with
/// covariance `L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SurrogateGroup {
    pub order: usize,
    /// Indices into [`PreparedTarget::coords`].
    pub members: Vec<usize>,
    pub chol: Array2<f64>,
}

/// Target resolved for a fixed input dimension.
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    pub d: usize,
    pub s: usize,
    /// Coordinates of order ≥ 2, in the order they were declared.
    pub coords: Vec<ResolvedCoordinate>,
    pub groups: Vec<SurrogateGroup>,
    pub link: LinkSpec,
    pub noise: NoiseSpec,
}

impl PreparedTarget {
    pub fn m(&self) -> usize {
        self.s + self.coords.len()
    }

    /// Row of coordinate `i` of `coords` in the latent matrix.
    pub fn row_of(&self, i: usize) -> usize {
        self.s + i
    }
}
