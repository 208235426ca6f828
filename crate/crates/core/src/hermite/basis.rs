//! Multi-indices and the shared basis ordering for degree-`k` Hermite chaos.
//!
//! Coefficient vectors in ℝ^{B_{d,k}} are laid out in graded reverse
//! lexicographic order, largest first: `a` precedes `b` when the rightmost
//! nonzero entry of `a - b` is negative. For `d = 2, k = 2` this gives
//! `(2,0), (1,1), (0,2)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Exponent vector `(k_1, …, k_d)` of a multivariate Hermite polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u16>);

impl MultiIndex {
    pub fn new(exponents: Vec<u16>) -> Self {
        MultiIndex(exponents)
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Multinomial coefficient `k! / (k_1! ⋯ k_d!)`.
    pub fn multinomial(&self) -> f64 {
        let k = self.order();
        let mut out = factorial(k);
        for &e in &self.0 {
            out /= factorial(e as usize);
        }
        out
    }

    /// Nondecreasing index tuple `(i_1 ≤ … ≤ i_k)` with this type.
    pub fn to_tuple(&self) -> Vec<usize> {
        let mut t = Vec::with_capacity(self.order());
        for (i, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                t.push(i);
            }
        }
        t
    }

    /// Type of an index tuple: the occurrence count of each coordinate.
    pub fn from_tuple(tuple: &[usize], d: usize) -> Self {
        let mut e = vec![0u16; d];
        for &i in tuple {
            e[i] += 1;
        }
        MultiIndex(e)
    }

    /// Graded reverse lexicographic comparison; `Greater` means "comes first".
    pub fn grevlex_cmp(&self, other: &Self) -> Ordering {
        let (oa, ob) = (self.order(), other.order());
        if oa != ob {
            return oa.cmp(&ob);
        }
        for (a, b) in self.0.iter().zip(&other.0).rev() {
            if a != b {
                // rightmost nonzero entry of a - b negative => a is larger
                return b.cmp(a);
            }
        }
        Ordering::Equal
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out as usize
}

/// `B_{d,k} = C(d+k-1, k)`.
pub fn basis_dim(d: usize, k: usize) -> usize {
    if d == 0 {
        return usize::from(k == 0);
    }
    binomial(d + k - 1, k)
}

/// Position ↔ multi-index map for one `(d, k)`.
#[derive(Debug, Clone)]
pub struct BasisIndexer {
    d: usize,
    k: usize,
    indices: Vec<MultiIndex>,
    tuples: Vec<Vec<usize>>,
    lookup: HashMap<MultiIndex, usize>,
}

const MAX_BASIS: usize = 4_000_000;

impl BasisIndexer {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        let size = basis_dim(d, k);
        if size > MAX_BASIS {
            return Err(Error::Capacity(format!(
                "basis B_{{{d},{k}}} = {size} exceeds {MAX_BASIS}"
            )));
        }
        let mut indices = Vec::with_capacity(size);
        let mut tuple = vec![0usize; k];
        enumerate_tuples(d, k, 0, 0, &mut tuple, &mut |t| {
            indices.push(MultiIndex::from_tuple(t, d))
        });
        indices.sort_by(|a, b| b.grevlex_cmp(a));
        Ok(Self::from_ordered(d, k, indices))
    }

    /// Builds an indexer from an explicit position → multi-index list without
    /// checking that it is a bijection. Used for fault injection in
    /// self-tests.
    #[doc(hidden)]
    pub fn from_ordered(d: usize, k: usize, indices: Vec<MultiIndex>) -> Self {
        let tuples = indices.iter().map(MultiIndex::to_tuple).collect();
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        BasisIndexer {
            d,
            k,
            indices,
            tuples,
            lookup,
        }
    }

    /// Process-wide cached indexer.
    pub fn shared(d: usize, k: usize) -> Result<Arc<BasisIndexer>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<BasisIndexer>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(ix) = cache.lock().unwrap().get(&(d, k)) {
            return Ok(ix.clone());
        }
        let ix = Arc::new(BasisIndexer::new(d, k)?);
        cache.lock().unwrap().insert((d, k), ix.clone());
        Ok(ix)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn multi_index(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    pub fn tuple(&self, pos: usize) -> &[usize] {
        &self.tuples[pos]
    }

    pub fn position(&self, index: &MultiIndex) -> Result<usize> {
        if index.order() != self.k {
            return Err(Error::OrderOutOfRange {
                k: index.order(),
                max: self.k,
            });
        }
        self.lookup
            .get(index)
            .copied()
            .ok_or_else(|| Error::DimMismatch(format!("multi-index {index:?} not in basis")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }
}

fn enumerate_tuples(
    d: usize,
    k: usize,
    depth: usize,
    start: usize,
    tuple: &mut [usize],
    f: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        f(tuple);
        return;
    }
    for i in start..d {
        tuple[depth] = i;
        enumerate_tuples(d, k, depth + 1, i, tuple, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_dimension_matches_binomial() {
        for d in 1..7 {
            for k in 0..5 {
                assert_eq!(BasisIndexer::new(d, k).unwrap().len(), basis_dim(d, k));
            }
        }
        assert_eq!(basis_dim(40, 2), 820);
        assert_eq!(basis_dim(40, 3), 11480);
    }

    #[test]
    fn grevlex_order_small_case() {
        let ix = BasisIndexer::new(2, 2).unwrap();
        let got: Vec<Vec<u16>> = ix.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(got, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let ix = BasisIndexer::new(3, 2).unwrap();
        let got: Vec<Vec<u16>> = ix.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
    }

    #[test]
    fn lookup_inverts_positions() {
        let ix = BasisIndexer::new(4, 3).unwrap();
        for (pos, m) in ix.iter().enumerate() {
            assert_eq!(ix.position(m).unwrap(), pos);
            assert_eq!(m.order(), 3);
        }
        assert!(ix.position(&MultiIndex::new(vec![1, 0, 0, 0])).is_err());
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(MultiIndex::new(vec![1, 1]).multinomial(), 2.0);
        assert_eq!(MultiIndex::new(vec![2, 1, 0]).multinomial(), 3.0);
        assert_eq!(MultiIndex::new(vec![1, 1, 1]).multinomial(), 6.0);
    }
}
