//! Index permutations on correlation tensors, the fully antisymmetric
//! projector, and the full ↔ reduced (strictly increasing) index bijection.
//!
//! A full tensor of order n over d = 2L Majorana labels stores entry
//! (j₁,…,j_n) at Σ_k j_k d^{n−k}, j₁ most significant. All permutation
//! operators are applied as index maps; nothing of size d^n × d^n is built.

use std::collections::HashMap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct FullTensor {
    pub dim: usize,
    pub order: usize,
    pub data: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTensor {
    pub dim: usize,
    pub order: usize,
    pub data: Vec<C64>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

pub fn linear_index(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &j| acc * dim + j)
}

pub fn multi_index(mut lin: usize, order: usize, dim: usize) -> Vec<usize> {
    let mut v = vec![0; order];
    for k in (0..order).rev() {
        v[k] = lin % dim;
        lin /= dim;
    }
    v
}

/// Sorts in place and returns the permutation sign, or None on a repeated index.
pub fn sort_with_sign(v: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// All permutations of 0..n with their signs, in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    (0..n)
        .permutations(n)
        .map(|p| {
            let mut q = p.clone();
            let s = sort_with_sign(&mut q).unwrap_or(0.0);
            (p, s)
        })
        .collect()
}

/// Lexicographically ordered combinations of `order` labels out of `dim`.
#[derive(Clone, Debug)]
pub struct Combinations {
    pub dim: usize,
    pub order: usize,
    pub list: Vec<Vec<usize>>,
    binom: Vec<Vec<usize>>,
}

impl Combinations {
    pub fn new(dim: usize, order: usize) -> Self {
        let list = if order <= dim {
            (0..dim).combinations(order).collect()
        } else {
            Vec::new()
        };
        let binom = (0..=dim)
            .map(|n| (0..=order.max(1)).map(|k| binomial(n, k)).collect())
            .collect();
        Self { dim, order, list, binom }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// Lexicographic rank of a strictly increasing tuple.
    pub fn rank(&self, comb: &[usize]) -> usize {
        let n = self.order;
        let total = self.binom[self.dim][n];
        let mut s = 0;
        for (i, &c) in comb.iter().enumerate() {
            s += self.binom[self.dim - 1 - c][n - i];
        }
        total - 1 - s
    }

    pub fn unrank(&self, r: usize) -> &[usize] {
        &self.list[r]
    }
}

impl FullTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            data: vec![ZERO; dim.pow(order as u32)],
        }
    }

    pub fn scalar(x: C64, dim: usize) -> Self {
        Self { dim, order: 0, data: vec![x] }
    }

    pub fn from_matrix(m: &CMat) -> Self {
        Self {
            dim: m.nrows(),
            order: 2,
            data: crate::linalg::vec_rows(m),
        }
    }

    pub fn to_matrix(&self) -> CMat {
        assert_eq!(self.order, 2);
        crate::linalg::unvec_rows(&self.data, self.dim, self.dim)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[linear_index(idx, self.dim)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn add_scaled(&mut self, other: &Self, s: C64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            order: self.order,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Tensor product self ⊗ other.
    pub fn kron(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self {
            dim: self.dim,
            order: self.order + other.order,
            data,
        }
    }

    /// result[j] = self[(j_{src[0]}, j_{src[1]}, …)].
    pub fn gather(&self, src: &[usize]) -> Self {
        let n = self.order;
        assert_eq!(src.len(), n);
        let d = self.dim;
        let mut out = Self::zeros(d, n);
        let mut idx = vec![0usize; n];
        let mut sidx = vec![0usize; n];
        for lin in 0..out.data.len() {
            let mut x = lin;
            for k in (0..n).rev() {
                idx[k] = x % d;
                x /= d;
            }
            for k in 0..n {
                sidx[k] = idx[src[k]];
            }
            out.data[lin] = self.data[linear_index(&sidx, d)];
        }
        out
    }

    /// Applies a 2L×2L matrix on every slot: (⊗ᵏ M) v.
    pub fn apply_all_slots(&self, m: &CMat) -> Self {
        let mut cur = self.clone();
        for slot in 0..self.order {
            cur = cur.apply_slot(slot, m);
        }
        cur
    }

    /// Applies M on one slot.
    pub fn apply_slot(&self, slot: usize, m: &CMat) -> Self {
        let d = self.dim;
        let n = self.order;
        let inner = d.pow((n - slot - 1) as u32);
        let outer = d.pow(slot as u32);
        let mut out = vec![ZERO; self.data.len()];
        for o in 0..outer {
            for a in 0..d {
                for b in 0..d {
                    let mab = m[(a, b)];
                    if mab == ZERO {
                        continue;
                    }
                    let dst = (o * d + a) * inner;
                    let src = (o * d + b) * inner;
                    for k in 0..inner {
                        out[dst + k] += mab * self.data[src + k];
                    }
                }
            }
        }
        Self { dim: d, order: n, data: out }
    }
}

/// Source map of R_k ⊗ I: result_j = v_{(j_k, j_1, …, ĵ_k, …)}, k 1-based.
fn rk_source(k: usize, n: usize) -> Vec<usize> {
    let mut src = Vec::with_capacity(n);
    src.push(k - 1);
    src.extend((0..n).filter(|&p| p != k - 1));
    src
}

pub fn apply_rk(k: usize, v: &FullTensor) -> Result<FullTensor> {
    if k < 2 || k > v.order {
        return Err(Error::InvalidArgument(format!(
            "R_k needs 2 <= k <= n, got k = {k}, n = {}",
            v.order
        )));
    }
    Ok(v.gather(&rk_source(k, v.order)))
}

/// Inverse of `apply_rk`.
pub fn apply_rk_inverse(k: usize, v: &FullTensor) -> Result<FullTensor> {
    if k < 2 || k > v.order {
        return Err(Error::InvalidArgument(format!("R_k inverse needs 2 <= k <= n, got {k}")));
    }
    let src = rk_source(k, v.order);
    let mut inv = vec![0; src.len()];
    for (p, &s) in src.iter().enumerate() {
        inv[s] = p;
    }
    Ok(v.gather(&inv))
}

/// Applies 𝐑_n = Σ_{k} Σ_{s<k} (−1)^{k−s} [R_s⊗I][R_k⊗I] to the last n slots.
pub fn bold_r_tail(v: &FullTensor, n: usize) -> FullTensor {
    let total = v.order;
    assert!(n >= 2 && n <= total);
    let off = total - n;
    let d = v.dim;
    let mut out = FullTensor::zeros(d, total);
    let mut idx = vec![0usize; total];
    let mut sidx = vec![0usize; total];
    let pairs: Vec<(usize, usize, f64)> = (1..n)
        .flat_map(|k| (0..k).map(move |s| (k, s, if (k - s) % 2 == 0 { 1.0 } else { -1.0 })))
        .collect();
    for lin in 0..out.data.len() {
        let mut x = lin;
        for p in (0..total).rev() {
            idx[p] = x % d;
            x /= d;
        }
        let mut acc = ZERO;
        for &(k, s, sign) in &pairs {
            sidx[..off].copy_from_slice(&idx[..off]);
            sidx[off] = idx[off + k];
            sidx[off + 1] = idx[off + s];
            let mut p = off + 2;
            for q in 0..n {
                if q != k && q != s {
                    sidx[p] = idx[off + q];
                    p += 1;
                }
            }
            acc += v.data[linear_index(&sidx, d)] * sign;
        }
        out.data[lin] = acc;
    }
    out
}

pub fn bold_r(v: &FullTensor) -> FullTensor {
    bold_r_tail(v, v.order)
}

/// 𝐑_{2m}(|F⟩⟩ ⊗ w) with w of order 2m−2.
pub fn apply_r2m(m: usize, w: &FullTensor, f: &CMat) -> Result<FullTensor> {
    if m == 0 || w.order + 2 != 2 * m || f.nrows() != w.dim || f.ncols() != w.dim {
        return Err(Error::InvalidArgument(format!(
            "apply_r2m: m = {m}, w order {}, F {}x{}, dim {}",
            w.order,
            f.nrows(),
            f.ncols(),
            w.dim
        )));
    }
    Ok(bold_r(&FullTensor::from_matrix(f).kron(w)))
}

/// ℝ_{(2m,2l+2)} = Π_{r=0}^{m−l−1} (I_{2r} ⊗ 𝐑_{2m−2r}), applied right to left.
pub fn frak_r(m: usize, l: usize, v: &FullTensor) -> FullTensor {
    assert_eq!(v.order, 2 * m);
    let mut cur = v.clone();
    for r in (0..m - l).rev() {
        cur = bold_r_tail(&cur, 2 * m - 2 * r);
    }
    cur
}

/// Full antisymmetrization (1/n!) Σ_σ sgn(σ) v_{σ(j)}.
pub fn antisym_project(v: &FullTensor) -> FullTensor {
    let n = v.order;
    let d = v.dim;
    let nf = factorial(n);
    let mut acc: HashMap<usize, C64> = HashMap::new();
    let mut idx = vec![0usize; n];
    for lin in 0..v.data.len() {
        let x = v.data[lin];
        if x == ZERO {
            continue;
        }
        idx.copy_from_slice(&multi_index(lin, n, d));
        if let Some(s) = sort_with_sign(&mut idx) {
            *acc.entry(linear_index(&idx, d)).or_insert(ZERO) += x * s;
        }
    }
    let mut out = FullTensor::zeros(d, n);
    for lin in 0..out.data.len() {
        idx.copy_from_slice(&multi_index(lin, n, d));
        if let Some(s) = sort_with_sign(&mut idx) {
            if let Some(a) = acc.get(&linear_index(&idx, d)) {
                out.data[lin] = a * (s / nf);
            }
        }
    }
    out
}

/// Max |v − P_FA v|.
pub fn antisymmetry_residual(v: &FullTensor) -> f64 {
    v.max_abs_diff(&antisym_project(v))
}

pub fn reduce(v: &FullTensor, tol: f64) -> Result<ReducedTensor> {
    let res = antisymmetry_residual(v);
    if res > tol {
        return Err(Error::ReduceLossy(res));
    }
    Ok(reduce_unchecked(v))
}

/// Reads the strictly increasing entries without checking antisymmetry.
pub fn reduce_unchecked(v: &FullTensor) -> ReducedTensor {
    let combos = Combinations::new(v.dim, v.order);
    ReducedTensor {
        dim: v.dim,
        order: v.order,
        data: combos.list.iter().map(|c| v.get(c)).collect(),
    }
}

pub fn expand(r: &ReducedTensor) -> FullTensor {
    let n = r.order;
    let d = r.dim;
    let combos = Combinations::new(d, n);
    let mut out = FullTensor::zeros(d, n);
    let mut idx = vec![0usize; n];
    for lin in 0..out.data.len() {
        idx.copy_from_slice(&multi_index(lin, n, d));
        if let Some(s) = sort_with_sign(&mut idx) {
            out.data[lin] = r.data[combos.rank(&idx)] * s;
        }
    }
    out
}

impl ReducedTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            data: vec![ZERO; binomial(dim, order)],
        }
    }

    pub fn get(&self, comb: &[usize]) -> C64 {
        self.data[lex_rank(self.dim, comb)]
    }
}

/// Lexicographic rank of a strictly increasing tuple without a lookup table.
pub fn lex_rank(dim: usize, comb: &[usize]) -> usize {
    let n = comb.len();
    let s: usize = comb
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(dim - 1 - c, n - i))
        .sum();
    binomial(dim, n) - 1 - s
}

/// One entry of 𝐑_n acting on the last n slots of a tensor given entrywise.
fn bold_r_tail_entry(idx: &[usize], n: usize, v: &dyn Fn(&[usize]) -> C64) -> C64 {
    let total = idx.len();
    let off = total - n;
    let mut sidx = idx.to_vec();
    let mut acc = ZERO;
    for k in 1..n {
        for s in 0..k {
            sidx[off] = idx[off + k];
            sidx[off + 1] = idx[off + s];
            let mut p = off + 2;
            for q in 0..n {
                if q != k && q != s {
                    sidx[p] = idx[off + q];
                    p += 1;
                }
            }
            let x = v(&sidx);
            if (k - s) % 2 == 0 {
                acc += x;
            } else {
                acc -= x;
            }
        }
    }
    acc
}

/// One entry of `frak_r(m, l, v)` without materializing v.
pub fn frak_r_entry(m: usize, l: usize, idx: &[usize], v: &dyn Fn(&[usize]) -> C64) -> C64 {
    assert_eq!(idx.len(), 2 * m);
    fn level(m: usize, l: usize, r: usize, idx: &[usize], v: &dyn Fn(&[usize]) -> C64) -> C64 {
        if r == m - l {
            return v(idx);
        }
        bold_r_tail_entry(idx, 2 * m - 2 * r, &|j: &[usize]| level(m, l, r + 1, j, v))
    }
    level(m, l, 0, idx, v)
}
