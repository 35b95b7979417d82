//! Brute-force reference: Jordan–Wigner operators on 2^L states, the dense
//! vectorized Liouvillian, exact evolution, spectra, and direct traces.
//!
//! a_j = (∏_{k<j} Z_k) σ⁻_j with site 0 the most significant bit of the
//! basis index; Z = diag(1, −1) on (empty, occupied). Vectorization is
//! row-major: ρ_{mn} ↦ entry m·D + n, so vec(AρB) = (A ⊗ Bᵀ) vec(ρ).

use crate::combinatorics::FullTensor;
use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, c, col, col_to_vec, conj, eig, expm, eye, frobenius, inverse, kron, r, scale, solve, transpose,
    zeros, CMat, C64, I, ONE, ZERO,
};
use crate::model::{FermionChainModel, InitialState};

pub const MAX_ORACLE_SITES: usize = 6;
/// The dense 4^L superoperator is only materialized up to this size.
pub const DENSE_SUPEROPERATOR_MAX_SITES: usize = 5;

/// A scaled signed permutation matrix: M[p, perm[p]] = coef[p].
#[derive(Clone, Debug)]
pub struct Monomial {
    pub perm: Vec<usize>,
    pub coef: Vec<C64>,
}

impl Monomial {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            coef: vec![ONE; dim],
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let perm: Vec<usize> = self.perm.iter().map(|&q| other.perm[q]).collect();
        let coef = self
            .coef
            .iter()
            .zip(&self.perm)
            .map(|(&a, &q)| a * other.coef[q])
            .collect();
        Self { perm, coef }
    }

    /// Tr[M ρ].
    pub fn trace_with(&self, rho: &CMat) -> C64 {
        self.perm
            .iter()
            .zip(&self.coef)
            .enumerate()
            .map(|(p, (&q, &a))| a * rho[(q, p)])
            .sum()
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.perm.len();
        let mut m = zeros(n, n);
        for p in 0..n {
            m[(p, self.perm[p])] = self.coef[p];
        }
        m
    }
}

/// Jordan–Wigner fermion operators for L sites.
#[derive(Clone, Debug)]
pub struct FockSpace {
    pub l: usize,
    pub dim: usize,
    /// Majorana operators ω_0 … ω_{2L−1} as monomials.
    pub omegas: Vec<Monomial>,
}

impl FockSpace {
    pub fn new(l: usize) -> Self {
        let dim = 1usize << l;
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let bit = |b: usize, j: usize| (b >> (l - 1 - j)) & 1;
        let jw_sign = |b: usize, j: usize| -> f64 {
            let n: usize = (0..j).map(|s| bit(b, s)).sum();
            if n.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        };
        let mut omegas = Vec::with_capacity(2 * l);
        // ω_j = (a + a†)/√2 flips site j; ⟨b ⊕ e_j| ω_j |b⟩ = sign/√2.
        for j in 0..l {
            let mut perm = vec![0; dim];
            let mut coef = vec![ZERO; dim];
            for row in 0..dim {
                let flipped = row ^ (1 << (l - 1 - j));
                perm[row] = flipped;
                coef[row] = r(jw_sign(row, j) * k);
            }
            omegas.push(Monomial { perm, coef });
        }
        // ω_{L+j} = i(a − a†)/√2: row with site j empty comes from a (column occupied).
        for j in 0..l {
            let mut perm = vec![0; dim];
            let mut coef = vec![ZERO; dim];
            for row in 0..dim {
                let flipped = row ^ (1 << (l - 1 - j));
                perm[row] = flipped;
                let s = jw_sign(row, j) * k;
                coef[row] = if bit(row, j) == 0 { c(0.0, s) } else { c(0.0, -s) };
            }
            omegas.push(Monomial { perm, coef });
        }
        Self { l, dim, omegas }
    }

    /// Dense a_j.
    pub fn annihilator(&self, j: usize) -> CMat {
        let l = self.l;
        let w1 = self.omegas[j].to_dense();
        let w2 = self.omegas[l + j].to_dense();
        let k = std::f64::consts::FRAC_1_SQRT_2;
        scale(&(w1 - scale(&w2, I)), r(k))
    }

    pub fn omega_dense(&self, p: usize) -> CMat {
        self.omegas[p].to_dense()
    }

    pub fn monomial(&self, idx: &[usize]) -> Monomial {
        idx.iter()
            .fold(Monomial::identity(self.dim), |acc, &p| acc.mul(&self.omegas[p]))
    }

    /// Fermion parity operator diagonal: (−1)^{N}.
    pub fn parity_diag(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|b| if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }
}

/// Dense Hamiltonian and jump operators of a model.
#[derive(Clone, Debug)]
pub struct DenseOperators {
    pub h: CMat,
    pub jumps: Vec<CMat>,
}

pub fn dense_operators(model: &FermionChainModel, fock: &FockSpace) -> DenseOperators {
    let l = model.l;
    let d = fock.dim;
    let a: Vec<CMat> = (0..l).map(|j| fock.annihilator(j)).collect();
    let ad: Vec<CMat> = a.iter().map(adjoint).collect();
    let mut h = zeros(d, d);
    for i in 0..l {
        for j in 0..l {
            let hij = model.h[(i, j)];
            if hij != ZERO {
                h += scale(&(&ad[i] * &a[j]), hij);
            }
            let dij = model.delta[(i, j)];
            if dij != ZERO {
                h += scale(&(&a[i] * &a[j]), dij);
            }
            let dji = model.delta[(j, i)].conj();
            if dji != ZERO {
                h += scale(&(&ad[i] * &ad[j]), dji);
            }
        }
    }
    let mut jumps = Vec::new();
    for dsp in &model.linear {
        let mut lop = zeros(d, d);
        for j in 0..l {
            if dsp.l[j] != ZERO {
                lop += scale(&a[j], dsp.l[j]);
            }
            if dsp.g[j] != ZERO {
                lop += scale(&ad[j], dsp.g[j]);
            }
        }
        jumps.push(lop);
    }
    let w: Vec<CMat> = (0..2 * l).map(|p| fock.omega_dense(p)).collect();
    for u in &model.quadratic {
        let mut lop = zeros(d, d);
        for p in 0..2 * l {
            for q in 0..2 * l {
                if u[(p, q)] != ZERO {
                    lop += scale(&(&w[p] * &w[q]), u[(p, q)]);
                }
            }
        }
        jumps.push(lop);
    }
    DenseOperators { h, jumps }
}

#[derive(Clone, Debug)]
pub struct DenseLiouvillian {
    pub l: usize,
    pub fock: FockSpace,
    pub ops: DenseOperators,
    /// Superoperator, 4^L × 4^L, when L ≤ `DENSE_SUPEROPERATOR_MAX_SITES`.
    pub matrix: Option<CMat>,
    g: CMat,
    norm_bound: f64,
}

pub fn build_liouvillian(model: &FermionChainModel) -> Result<DenseLiouvillian> {
    if model.l > MAX_ORACLE_SITES {
        return Err(Error::SizeGuard(format!(
            "oracle limited to L <= {MAX_ORACLE_SITES}, got {}",
            model.l
        )));
    }
    let fock = FockSpace::new(model.l);
    let ops = dense_operators(model, &fock);
    let d = fock.dim;
    let id = eye(d);
    let dense = model.l <= DENSE_SUPEROPERATOR_MAX_SITES;
    let mut sup = dense.then(|| scale(&(kron(&ops.h, &id) - kron(&id, &transpose(&ops.h))), c(0.0, -1.0)));
    let mut k_sum = zeros(d, d);
    let mut norm_bound = 2.0 * frobenius(&ops.h);
    for lop in &ops.jumps {
        let k = adjoint(lop) * lop;
        if let Some(m) = sup.as_mut() {
            *m = &*m + scale(&kron(lop, &conj(lop)), r(2.0)) - kron(&k, &id) - kron(&id, &transpose(&k));
        }
        norm_bound += 4.0 * frobenius(lop).powi(2);
        k_sum += k;
    }
    let g = &ops.h - scale(&k_sum, I);
    Ok(DenseLiouvillian {
        l: model.l,
        fock,
        ops,
        matrix: sup,
        g,
        norm_bound: norm_bound.max(1e-300),
    })
}

fn vec_rho(rho: &CMat) -> Vec<C64> {
    crate::linalg::vec_rows(rho)
}

fn unvec_rho(v: &[C64], d: usize) -> CMat {
    crate::linalg::unvec_rows(v, d, d)
}

impl DenseLiouvillian {
    pub fn hilbert_dim(&self) -> usize {
        self.fock.dim
    }

    pub fn dense(&self) -> Result<&CMat> {
        self.matrix.as_ref().ok_or_else(|| {
            Error::SizeGuard(format!(
                "dense superoperator not built for L = {} (limit {DENSE_SUPEROPERATOR_MAX_SITES})",
                self.l
            ))
        })
    }

    /// L(ρ) in operator form: −i(Gρ − ρG†) + 2Σ LρL†, G = H − iΣL†L.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = scale(&(&self.g * rho - rho * adjoint(&self.g)), c(0.0, -1.0));
        for lop in &self.ops.jumps {
            out += scale(&(lop * rho * adjoint(lop)), r(2.0));
        }
        out
    }

    /// ‖⟨⟨I|L̂‖_max.
    pub fn trace_residual(&self) -> Result<f64> {
        let mat = self.dense()?;
        let d = self.fock.dim;
        let n = d * d;
        let mut m = 0.0f64;
        for col_i in 0..n {
            let s: C64 = (0..d).map(|k| mat[(k * d + k, col_i)]).sum();
            m = m.max(s.norm());
        }
        Ok(m)
    }

    /// e^{L t} ρ by scaled Taylor steps on the operator form.
    pub fn evolve_taylor(&self, rho: &CMat, t: f64) -> CMat {
        if t == 0.0 {
            return rho.clone();
        }
        let steps = (t * self.norm_bound).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut cur = rho.clone();
        for _ in 0..steps {
            let mut term = cur.clone();
            let mut acc = cur.clone();
            for k in 1..80 {
                term = scale(&self.apply(&term), r(h / k as f64));
                acc += &term;
                if frobenius(&term) <= 1e-18 * frobenius(&acc).max(1e-300) {
                    break;
                }
            }
            cur = acc;
        }
        cur
    }

    pub fn propagator(&self) -> Propagator<'_> {
        Propagator::new(self)
    }

    /// Eigenvalues of the full superoperator.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        crate::linalg::eigenvalues(self.dense()?)
    }

    /// Eigenvalues split into (even, odd) superoperator parity sectors:
    /// even keeps |m⟩⟨n| with equal fermion parity of m and n.
    pub fn parity_eigenvalues(&self) -> Result<(Vec<C64>, Vec<C64>)> {
        let mat = self.dense()?;
        let d = self.fock.dim;
        let par = self.fock.parity_diag();
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for m in 0..d {
            for n in 0..d {
                if par[m] == par[n] {
                    even.push(m * d + n);
                } else {
                    odd.push(m * d + n);
                }
            }
        }
        let sub = |idx: &[usize]| CMat::from_fn(idx.len(), idx.len(), |i, j| mat[(idx[i], idx[j])]);
        let ev = crate::linalg::eigenvalues(&sub(&even))?;
        let od = crate::linalg::eigenvalues(&sub(&odd))?;
        Ok((ev, od))
    }

    /// Steady state from L̂ρ = 0 with Tr ρ = 1 replacing the first row.
    pub fn steady_state(&self) -> Result<CMat> {
        let d = self.fock.dim;
        let n = d * d;
        let mut a = self.dense()?.clone();
        for j in 0..n {
            a[(0, j)] = ZERO;
        }
        for k in 0..d {
            a[(0, k * d + k)] = ONE;
        }
        let mut b = vec![ZERO; n];
        b[0] = ONE;
        let x = solve(&a, &col(&b));
        let rho = unvec_rho(&col_to_vec(&x), d);
        // symmetrize against roundoff
        Ok(scale(&(&rho + adjoint(&rho)), r(0.5)))
    }
}

/// Exact propagation: eigenbasis of L̂ when well conditioned, Taylor otherwise.
pub struct Propagator<'a> {
    lv: &'a DenseLiouvillian,
    diag: Option<(Vec<C64>, CMat, CMat)>,
}

const PROPAGATOR_EIG_MAX_DIM: usize = 1024;
const PROPAGATOR_COND_LIMIT: f64 = 1e6;

impl<'a> Propagator<'a> {
    fn new(lv: &'a DenseLiouvillian) -> Self {
        let diag = match &lv.matrix {
            Some(m) if m.nrows() <= PROPAGATOR_EIG_MAX_DIM => eig(m).ok().and_then(|(vals, v)| {
                let vinv = inverse(&v);
                let k = frobenius(&v) * frobenius(&vinv);
                (k.is_finite() && k < PROPAGATOR_COND_LIMIT).then_some((vals, v, vinv))
            }),
            _ => None,
        };
        Self { lv, diag }
    }

    pub fn uses_eigenbasis(&self) -> bool {
        self.diag.is_some()
    }

    pub fn evolve(&self, rho0: &CMat, t: f64) -> CMat {
        let d = self.lv.fock.dim;
        match &self.diag {
            Some((vals, v, vinv)) => {
                let coeffs = crate::linalg::matvec(vinv, &vec_rho(rho0));
                let scaled: Vec<C64> = coeffs.iter().zip(vals).map(|(&x, &l)| x * (l * t).exp()).collect();
                unvec_rho(&crate::linalg::matvec(v, &scaled), d)
            }
            None => self.lv.evolve_taylor(rho0, t),
        }
    }
}

/// Dense density matrix of an initial state.
pub fn initial_density(state: &InitialState, fock: &FockSpace) -> Result<CMat> {
    let d = fock.dim;
    let pure = |psi: &[C64]| CMat::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
    match state {
        InitialState::Vacuum => {
            let mut psi = vec![ZERO; d];
            psi[0] = ONE;
            Ok(pure(&psi))
        }
        InitialState::FullyFilled => {
            let mut psi = vec![ZERO; d];
            psi[d - 1] = ONE;
            Ok(pure(&psi))
        }
        InitialState::Ghz => {
            let k = std::f64::consts::FRAC_1_SQRT_2;
            let mut psi = vec![ZERO; d];
            psi[0] = r(k);
            psi[d - 1] = r(k);
            Ok(pure(&psi))
        }
        InitialState::DenseMatrix(rho) => {
            if rho.nrows() != d || rho.ncols() != d {
                return Err(Error::InvalidArgument(format!("density matrix must be {d}x{d}")));
            }
            Ok(rho.clone())
        }
        InitialState::GaussianCovariance(t2) => {
            let g = crate::quad_dynamics::gaussian_density(t2)?;
            let n = 2 * fock.l;
            let mut q = zeros(d, d);
            for p in 0..n {
                for s in 0..n {
                    let x = g.varrho[(p, s)];
                    if x != ZERO {
                        q += scale(&fock.monomial(&[p, s]).to_dense(), x);
                    }
                }
            }
            let e = expm(&q);
            let tr: C64 = (0..d).map(|i| e[(i, i)]).sum();
            Ok(scale(&e, ONE / tr))
        }
    }
}

/// Tr[ω_{j₁}⋯ω_{j_n} ρ].
pub fn exact_corr(fock: &FockSpace, rho: &CMat, idx: &[usize]) -> C64 {
    fock.monomial(idx).trace_with(rho)
}

/// All entries of the order-n correlation tensor of ρ.
pub fn corr_tensor(fock: &FockSpace, rho: &CMat, order: usize) -> FullTensor {
    let dim = 2 * fock.l;
    let mut out = FullTensor::zeros(dim, order);
    if order == 0 {
        out.data[0] = (0..fock.dim).map(|i| rho[(i, i)]).sum();
        return out;
    }
    // Fix the first two slots' monomial, then extend.
    let prefix_order = order.min(2);
    let rest = order - prefix_order;
    let rest_len = dim.pow(rest as u32);
    let rest_monos: Vec<Monomial> = (0..rest_len)
        .map(|lin| fock.monomial(&crate::combinatorics::multi_index(lin, rest, dim)))
        .collect();
    for p in 0..dim.pow(prefix_order as u32) {
        let pidx = crate::combinatorics::multi_index(p, prefix_order, dim);
        let pm = fock.monomial(&pidx);
        for (q, rm) in rest_monos.iter().enumerate() {
            out.data[p * rest_len + q] = pm.mul(rm).trace_with(rho);
        }
    }
    out
}

/// Trace-preserving, Hermiticity and positivity diagnostics of ρ.
pub fn density_diagnostics(rho: &CMat) -> (f64, f64, f64) {
    let d = rho.nrows();
    let tr: C64 = (0..d).map(|i| rho[(i, i)]).sum();
    let herm = crate::linalg::max_abs(&(rho - adjoint(rho)));
    let hsym = scale(&(rho + adjoint(rho)), r(0.5));
    let min_eig = hsym
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    ((tr - ONE).norm(), herm, min_eig)
}
