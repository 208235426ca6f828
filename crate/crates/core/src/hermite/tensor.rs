//! Dense tensors over `[d]^k`, the isometric embedding `ι` of chaos
//! coefficients, partial contractions and closed-form chaos evaluation.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::basis::BasisIndexer;
use super::poly::he;
use crate::error::{Error, Result};

/// Largest dense tensor the library will allocate (entries).
pub const MAX_DENSE_ENTRIES: usize = 1 << 24;

/// General dense tensor of order `k` over `ℝ^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

fn checked_len(dim: usize, order: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..order {
        n = n
            .checked_mul(dim)
            .filter(|&n| n <= MAX_DENSE_ENTRIES)
            .ok_or_else(|| Error::Capacity(format!("dense tensor d={dim} k={order}")))?;
    }
    Ok(n)
}

impl Tensor {
    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        let len = checked_len(dim, order)?;
        Ok(Tensor {
            order,
            dim,
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(dim: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(dim, order)?;
        if data.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                got: data.len(),
            });
        }
        Ok(Tensor { order, dim, data })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flat_index(idx);
        self.data[f] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::DimMismatch(format!(
                "inner product of order {} dim {} with order {} dim {}",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Largest deviation from the tensor with permuted indices, over the
    /// adjacent transpositions (which generate the symmetric group).
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.order];
        for flat in 0..self.data.len() {
            unflatten(flat, self.dim, &mut idx);
            for a in 0..self.order.saturating_sub(1) {
                idx.swap(a, a + 1);
                let other = self.get(&idx);
                idx.swap(a, a + 1);
                worst = worst.max((self.data[flat] - other).abs());
            }
        }
        worst
    }

    /// View as a `d^rows × d^(k-rows)` matrix.
    pub fn matricize(&self, row_order: usize) -> ArrayView2<'_, f64> {
        let rows = self.dim.pow(row_order as u32);
        let cols = self.dim.pow((self.order - row_order) as u32);
        ArrayView2::from_shape((rows, cols), &self.data).expect("tensor shape")
    }
}

fn unflatten(mut flat: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

/// Symmetric tensor in `(ℝ^d)^{⊙k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor(Tensor);

impl SymTensor {
    /// Wraps a tensor after checking symmetry to `tol`.
    pub fn new(t: Tensor, tol: f64) -> Result<Self> {
        let defect = t.symmetry_defect();
        if defect > tol {
            return Err(Error::InvalidArgument(format!(
                "tensor is not symmetric (defect {defect:e})"
            )));
        }
        Ok(SymTensor(t))
    }

    /// Symmetrized copy `Sym(T)`.
    pub fn symmetrize(t: &Tensor) -> Self {
        let mut out = t.clone();
        let mut idx = vec![0usize; t.order];
        let perms = permutations(t.order);
        let mut permuted = vec![0usize; t.order];
        for flat in 0..t.data.len() {
            unflatten(flat, t.dim, &mut idx);
            let mut acc = 0.0;
            for p in &perms {
                for (slot, &src) in permuted.iter_mut().zip(p) {
                    *slot = idx[src];
                }
                acc += t.get(&permuted);
            }
            out.data[flat] = acc / perms.len() as f64;
        }
        SymTensor(out)
    }

    /// `u^{⊗k}`.
    pub fn rank_one(u: ArrayView1<f64>, k: usize) -> Result<Self> {
        let d = u.len();
        let mut t = Tensor::zeros(d, k)?;
        let mut idx = vec![0usize; k];
        for flat in 0..t.data.len() {
            unflatten(flat, d, &mut idx);
            t.data[flat] = idx.iter().map(|&i| u[i]).product();
        }
        Ok(SymTensor(t))
    }

    /// `I_d` as an order-2 symmetric tensor, scaled by `scale`.
    pub fn scaled_identity(d: usize, scale: f64) -> Result<Self> {
        let mut t = Tensor::zeros(d, 2)?;
        for i in 0..d {
            t.set(&[i, i], scale);
        }
        Ok(SymTensor(t))
    }

    pub fn from_matrix(m: ArrayView2<f64>, tol: f64) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimMismatch(format!("{r}x{c} matrix is not square")));
        }
        let t = Tensor::from_vec(r, 2, m.iter().copied().collect())?;
        SymTensor::new(t, tol)
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        if self.order() != 2 {
            return Err(Error::UnsupportedOrder {
                k: self.order(),
                reason: "matrix view needs order 2",
            });
        }
        Ok(self.0.matricize(1).to_owned())
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

fn distinct_permutations(tuple: &[usize]) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = permutations(tuple.len())
        .into_iter()
        .map(|p| p.iter().map(|&i| tuple[i]).collect())
        .collect();
    all.sort();
    all.dedup();
    all
}

/// `q_k(w)`: coefficients of `He_k(⟨w, x⟩)` in the basis `h_k(x)`.
pub fn q_k(w: ArrayView1<f64>, k: usize) -> Result<Vec<f64>> {
    let norm = w.dot(&w).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitVector { norm });
    }
    if k == 0 {
        return Err(Error::OrderOutOfRange { k, max: usize::MAX });
    }
    Ok(q_k_unchecked(w, &*BasisIndexer::shared(w.len(), k)?))
}

/// `q_k` without the unit-norm check; valid as the coefficient map of
/// `(√k!)⁻¹ ⟨w, ·⟩^k`-type monomials for any `w`.
pub fn q_k_unchecked(w: ArrayView1<f64>, ix: &BasisIndexer) -> Vec<f64> {
    ix.iter()
        .map(|m| {
            let mono: f64 = m
                .exponents()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, &e)| w[j].powi(e as i32))
                .product();
            m.multinomial().sqrt() * mono
        })
        .collect()
}

/// Isometric embedding `ι: ℝ^{B_{d,k}} → (ℝ^d)^{⊙k}`.
pub fn iota(v: &[f64], k: usize, d: usize) -> Result<SymTensor> {
    iota_with(v, &*BasisIndexer::shared(d, k)?)
}

/// `ι` using an explicit indexer.
pub fn iota_with(v: &[f64], ix: &BasisIndexer) -> Result<SymTensor> {
    if v.len() != ix.len() {
        return Err(Error::LengthMismatch {
            expected: ix.len(),
            got: v.len(),
        });
    }
    let mut t = Tensor::zeros(ix.dim(), ix.order())?;
    for (pos, &val) in v.iter().enumerate() {
        let scale = 1.0 / ix.multi_index(pos).multinomial().sqrt();
        for perm in distinct_permutations(ix.tuple(pos)) {
            t.set(&perm, val * scale);
        }
    }
    Ok(SymTensor(t))
}

/// Inverse of `ι` on symmetric tensors.
pub fn iota_inverse(t: &SymTensor) -> Result<Vec<f64>> {
    let ix = BasisIndexer::shared(t.dim(), t.order())?;
    Ok((0..ix.len())
        .map(|pos| ix.multi_index(pos).multinomial().sqrt() * t.0.get(ix.tuple(pos)))
        .collect())
}

/// Partial contraction `S ⊗_r T` over the last `r` indices of each factor.
pub fn contract_r(s: &SymTensor, t: &SymTensor, r: usize) -> Result<Tensor> {
    let (k, l) = (s.order(), t.order());
    if r > k.min(l) {
        return Err(Error::ContractionOutOfRange { r, k, l });
    }
    if s.dim() != t.dim() {
        return Err(Error::DimMismatch(format!(
            "contraction of dims {} and {}",
            s.dim(),
            t.dim()
        )));
    }
    let d = s.dim();
    let out_order = k + l - 2 * r;
    checked_len(d, out_order)?;
    let sm = s.0.matricize(k - r);
    let tm = t.0.matricize(l - r);
    let prod = sm.dot(&tm.t());
    Tensor::from_vec(d, out_order, prod.iter().copied().collect())
}

/// `⟨T, H_k(x)⟩` for `k ≤ 3`, equal to `⟨ι⁻¹(T), h_k(x)⟩`.
pub fn monic_chaos_eval(t: &SymTensor, x: ArrayView1<f64>) -> Result<f64> {
    let d = t.dim();
    if x.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let data = &t.0.data;
    match t.order() {
        1 => Ok(data.iter().zip(x.iter()).map(|(a, b)| a * b).sum()),
        2 => {
            let mut quad = 0.0;
            let mut trace = 0.0;
            for i in 0..d {
                let row = &data[i * d..(i + 1) * d];
                let ri: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                quad += x[i] * ri;
                trace += row[i];
            }
            Ok((quad - trace) / 2f64.sqrt())
        }
        3 => {
            let mut cubic = 0.0;
            let mut lin = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let base = (i * d + j) * d;
                    let row = &data[base..base + d];
                    let inner: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    cubic += x[i] * x[j] * inner;
                }
                // Σ_j T_{iij} x_j
                let base = (i * d + i) * d;
                lin += data[base..base + d]
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            Ok((cubic - 3.0 * lin) / 6f64.sqrt())
        }
        k => Err(Error::UnsupportedOrder {
            k,
            reason: "dense chaos evaluation supports k ≤ 3",
        }),
    }
}

/// Basis vector `h_k(x) = (He_𝒌(x))_{|𝒌| = k}` in the shared ordering.
pub fn hermite_basis_vector(x: ArrayView1<f64>, k: usize) -> Result<Vec<f64>> {
    let ix = BasisIndexer::shared(x.len(), k)?;
    Ok(hermite_basis_vector_with(x, &ix))
}

pub fn hermite_basis_vector_with(x: ArrayView1<f64>, ix: &BasisIndexer) -> Vec<f64> {
    ix.iter()
        .map(|m| {
            m.exponents()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, &e)| he(e as usize, x[j]))
                .product()
        })
        .collect()
}
