//! Closed even-order correlation dynamics for quadratic Liouvillians.
//!
//! T₂ obeys dT₂/dt = F₁T₂ + T₂F₁ᵀ − iF_Bᵀ. Higher orders follow the
//! high-order solution built from T₂(t), slotwise propagated initial data,
//! and the 𝐑 permutation sums in `combinatorics`.

use crate::combinatorics::{factorial, frak_r, frak_r_entry, sort_with_sign, FullTensor};
use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, c, eye, max_abs, r, scale, sylvester, transpose, zeros, CMat, ExpGen, C64, I, ONE, ZERO,
};
use crate::model::InitialState;
use crate::oracle::{self, FockSpace, MAX_ORACLE_SITES};
use crate::structure::StructureMatrices;

/// Largest full tensor (entries) that `high_order` will build.
pub const FULL_TENSOR_BUDGET: usize = 1 << 26;

/// Order-2 correlation matrix of the vacuum (sign −1) or filled state (+1).
fn number_eigenstate_t2(l: usize, sign: f64) -> CMat {
    let mut t = scale(&eye(2 * l), r(0.5));
    for j in 0..l {
        t[(j, l + j)] = c(0.0, 0.5 * sign);
        t[(l + j, j)] = c(0.0, -0.5 * sign);
    }
    t
}

pub fn vacuum_t2(l: usize) -> CMat {
    number_eigenstate_t2(l, -1.0)
}

pub fn filled_t2(l: usize) -> CMat {
    number_eigenstate_t2(l, 1.0)
}

/// Pairing expansion T_{j₁…j_n} = Σ_k (−1)^k T_{j₁j_k} T_{rest}.
pub fn wick(t2: &CMat, n: usize) -> Result<FullTensor> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("wick needs an even order, got {n}")));
    }
    let d = t2.nrows();
    let mut cur = FullTensor::scalar(ONE, d);
    for order in (2..=n).step_by(2) {
        cur = wick_step(t2, &cur, order);
    }
    Ok(cur)
}

fn wick_step(t2: &CMat, prev: &FullTensor, n: usize) -> FullTensor {
    let d = t2.nrows();
    let mut out = FullTensor::zeros(d, n);
    let inner = d.pow((n - 2) as u32);
    let mut idx = vec![0usize; n];
    for lin in 0..out.data.len() {
        let mut x = lin;
        for p in (0..n).rev() {
            idx[p] = x % d;
            x /= d;
        }
        let mut acc = ZERO;
        for k in 1..n {
            let pair = t2[(idx[0], idx[k])];
            if pair == ZERO {
                continue;
            }
            let mut rest = 0usize;
            for (p, &j) in idx.iter().enumerate().skip(1) {
                if p != k {
                    rest = rest * d + j;
                }
            }
            debug_assert!(rest < inner);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc += pair * prev.data[rest] * sign;
        }
        out.data[lin] = acc;
    }
    out
}

/// Correlation tensors of orders 0, 2, …, max_order for an initial state.
pub fn initial_corr(state: &InitialState, l: usize, max_order: usize) -> Result<Vec<FullTensor>> {
    if !max_order.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("max_order must be even, got {max_order}")));
    }
    let d = 2 * l;
    let from_t2 = |t2: &CMat| -> Result<Vec<FullTensor>> {
        let mut out = vec![FullTensor::scalar(ONE, d)];
        for n in (2..=max_order).step_by(2) {
            let prev = out.last().expect("nonempty");
            out.push(wick_step(t2, prev, n));
        }
        Ok(out)
    };
    let from_oracle = |state: &InitialState| -> Result<Vec<FullTensor>> {
        if l > MAX_ORACLE_SITES {
            return Err(Error::SizeGuard(format!(
                "state needs the dense oracle, which is limited to L <= {MAX_ORACLE_SITES}"
            )));
        }
        let fock = FockSpace::new(l);
        let rho = oracle::initial_density(state, &fock)?;
        Ok((0..=max_order)
            .step_by(2)
            .map(|n| oracle::corr_tensor(&fock, &rho, n))
            .collect())
    };
    match state {
        InitialState::Vacuum => from_t2(&vacuum_t2(l)),
        InitialState::FullyFilled => from_t2(&filled_t2(l)),
        InitialState::GaussianCovariance(t2) => {
            check_t2(t2, 1e-9)?;
            from_t2(t2)
        }
        InitialState::Ghz => {
            let vac = from_t2(&vacuum_t2(l))?;
            let full = from_t2(&filled_t2(l))?;
            let mut out: Vec<FullTensor> = vac
                .iter()
                .zip(&full)
                .map(|(a, b)| {
                    let mut s = a.scaled(r(0.5));
                    s.add_scaled(b, r(0.5));
                    s
                })
                .collect();
            if l <= max_order {
                // The mixture identity needs L above the order; the
                // coherence |vac⟩⟨full| contributes at order 2L.
                let exact = from_oracle(state)?;
                for (n, t) in exact.into_iter().enumerate() {
                    if 2 * n >= l {
                        out[n] = t;
                    }
                }
            }
            Ok(out)
        }
        InitialState::DenseMatrix(_) => from_oracle(state),
    }
}

/// Checks T₂† = T₂ and T₂ + T₂ᵀ = I.
pub fn check_t2(t2: &CMat, tol: f64) -> Result<()> {
    let n = t2.nrows();
    let herm = max_abs(&(t2 - adjoint(t2)));
    let anti = max_abs(&(t2 + transpose(t2) - eye(n)));
    if herm > tol || anti > tol {
        return Err(Error::InvalidArgument(format!(
            "T2 invariants violated (hermiticity {herm:.3e}, T+Tᵀ−I {anti:.3e})"
        )));
    }
    Ok(())
}

/// Steady-state order-2 correlation matrix.
#[derive(Clone, Debug)]
pub struct SteadyT2 {
    pub t2: CMat,
    /// True when the Lyapunov operator is singular and `t2` is the
    /// minimum-norm solution.
    pub non_unique: bool,
}

/// Solves F₁T + TF₁ᵀ = iF_Bᵀ.
pub fn steady_state_t2(sm: &StructureMatrices) -> Result<SteadyT2> {
    let rhs = scale(&transpose(&sm.f_b), I);
    let (t2, non_unique) = sylvester(&sm.f1, &transpose(&sm.f1), &rhs)?;
    Ok(SteadyT2 { t2, non_unique })
}

/// Propagator for the quadratic class: holds e^{F₁t} and a particular
/// stationary solution.
#[derive(Clone, Debug)]
pub struct QuadPropagator {
    pub exp: ExpGen,
    pub steady: SteadyT2,
}

impl QuadPropagator {
    pub fn new(sm: &StructureMatrices) -> Result<Self> {
        Ok(Self {
            exp: ExpGen::new(&sm.f1),
            steady: steady_state_t2(sm)?,
        })
    }

    /// T₂(t) = e^{F₁t}(T₂(0) − T∞)e^{F₁ᵀt} + T∞.
    pub fn evolve_t2(&self, t2_0: &CMat, t: f64) -> CMat {
        if t == 0.0 {
            return t2_0.clone();
        }
        let e = self.exp.at(t);
        let tinf = &self.steady.t2;
        &e * (t2_0 - tinf) * transpose(&e) + tinf
    }

    /// Order-2m tensor at time t from initial tensors of orders 0, 2, …, 2m.
    pub fn high_order(&self, init: &[FullTensor], m: usize, t: f64) -> Result<FullTensor> {
        if m == 0 {
            return Ok(init[0].clone());
        }
        if init.len() <= m {
            return Err(Error::InvalidArgument(format!(
                "high_order needs initial tensors up to order {}, got {}",
                2 * m,
                2 * (init.len().max(1) - 1)
            )));
        }
        let d = init[1].dim;
        if d.pow(2 * m as u32) > FULL_TENSOR_BUDGET {
            return Err(Error::SizeGuard(format!(
                "full order-{} tensor over {d} labels exceeds the budget; use the reduced path",
                2 * m
            )));
        }
        let e = self.exp.at(t);
        let t2_0 = init[1].to_matrix();
        let t2_t = self.evolve_t2(&t2_0, t);
        let prop0 = &e * &t2_0 * transpose(&e);
        let dmat = transpose(&(t2_t - prop0));
        let dten = FullTensor::from_matrix(&dmat);
        let mut total = FullTensor::zeros(d, 2 * m);
        for l in 0..=m {
            let k = m - l;
            let mut v = FullTensor::scalar(ONE, d);
            for _ in 0..k {
                v = v.kron(&dten);
            }
            let propagated = if l == 0 {
                init[0].clone()
            } else {
                init[l].apply_all_slots(&e)
            };
            v = v.kron(&propagated);
            let term = if k == 0 { v } else { frak_r(m, l, &v) };
            let coef = if k.is_multiple_of(2) { 1.0 } else { -1.0 } / factorial(k);
            total.add_scaled(&term, r(coef));
        }
        Ok(total)
    }
}

/// Pairing expansion of a single entry.
pub fn wick_entry(t2: &CMat, idx: &[usize]) -> C64 {
    match idx.len() {
        0 => ONE,
        n if n % 2 == 1 => ZERO,
        n => {
            let mut acc = ZERO;
            let mut rest = Vec::with_capacity(n - 2);
            for k in 1..n {
                let pair = t2[(idx[0], idx[k])];
                if pair == ZERO {
                    continue;
                }
                rest.clear();
                rest.extend(idx[1..].iter().enumerate().filter(|(p, _)| p + 1 != k).map(|(_, &j)| j));
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                acc += pair * wick_entry(t2, &rest) * sign;
            }
            acc
        }
    }
}

/// Convex combination of Gaussian states reproducing an initial state's
/// correlations below order `exact_below`.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    pub parts: Vec<(f64, CMat)>,
    pub exact_below: usize,
}

impl GaussianMixture {
    pub fn of(state: &InitialState, l: usize) -> Option<Self> {
        let single = |t2: CMat| GaussianMixture {
            parts: vec![(1.0, t2)],
            exact_below: usize::MAX,
        };
        match state {
            InitialState::Vacuum => Some(single(vacuum_t2(l))),
            InitialState::FullyFilled => Some(single(filled_t2(l))),
            InitialState::GaussianCovariance(t2) => Some(single(t2.clone())),
            InitialState::Ghz => Some(GaussianMixture {
                parts: vec![(0.5, vacuum_t2(l)), (0.5, filled_t2(l))],
                exact_below: l,
            }),
            InitialState::DenseMatrix(_) => None,
        }
    }
}

/// Entrywise evaluation of the high-order solution at a fixed time, for
/// initial states given as Gaussian mixtures. Avoids full tensors.
pub struct HighOrderAt {
    d: CMat,
    /// e^{F₁t} T₂,w(0) e^{F₁ᵀt} per mixture part.
    propagated: Vec<(f64, CMat)>,
    exact_below: usize,
}

impl HighOrderAt {
    /// Entry of T_{n}(t) at any index tuple of even length n.
    pub fn entry(&self, idx: &[usize]) -> Result<C64> {
        let n = idx.len();
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("odd order {n}")));
        }
        if n >= self.exact_below {
            return Err(Error::MethodRefused(format!(
                "order {n} is not captured by the Gaussian mixture (exact below {})",
                self.exact_below
            )));
        }
        let m = n / 2;
        if m == 0 {
            return Ok(ONE);
        }
        let mut total = ZERO;
        for l in 0..=m {
            let k = m - l;
            let dd = &self.d;
            let props = &self.propagated;
            let v = |j: &[usize]| -> C64 {
                let mut x = ONE;
                for p in 0..k {
                    x *= dd[(j[2 * p], j[2 * p + 1])];
                    if x == ZERO {
                        return ZERO;
                    }
                }
                let tail = &j[2 * k..];
                if tail.is_empty() {
                    return x;
                }
                x * props.iter().map(|(w, t2)| wick_entry(t2, tail) * *w).sum::<C64>()
            };
            let term = if k == 0 { v(idx) } else { frak_r_entry(m, l, idx, &v) };
            let coef = if k.is_multiple_of(2) { 1.0 } else { -1.0 } / factorial(k);
            total += term * coef;
        }
        Ok(total)
    }
}

impl QuadPropagator {
    pub fn entries_at(&self, mix: &GaussianMixture, t: f64) -> HighOrderAt {
        let e = self.exp.at(t);
        let et = transpose(&e);
        let tinf = &self.steady.t2;
        let d = transpose(&(tinf - &e * tinf * &et));
        let propagated = mix.parts.iter().map(|(w, t2)| (*w, &e * t2 * &et)).collect();
        HighOrderAt {
            d,
            propagated,
            exact_below: mix.exact_below,
        }
    }
}

pub fn evolve_t2(sm: &StructureMatrices, t2_0: &CMat, t: f64) -> Result<CMat> {
    Ok(QuadPropagator::new(sm)?.evolve_t2(t2_0, t))
}

/// Gaussian state ρ = e^{log_norm} · exp(Σ ϱ_pq ω_p ω_q).
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub varrho: CMat,
    pub log_norm: f64,
}

/// Inverts T₂ = (I + e^{2ϱ})⁻¹.
pub fn gaussian_density(t2: &CMat) -> Result<GaussianState> {
    let n = t2.nrows();
    let herm = scale(&(t2 + adjoint(t2)), r(0.5));
    let evd = herm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let v = evd.U().to_owned();
    const EDGE: f64 = 1e-12;
    if let Some(x) = vals.iter().find(|&&x| !(EDGE..=1.0 - EDGE).contains(&x)) {
        return Err(Error::SingularCovariance(format!("eigenvalue {x:.3e} at the boundary of [0, 1]")));
    }
    let mut vd = v.clone();
    for j in 0..n {
        let f = 0.5 * (1.0 / vals[j] - 1.0).ln();
        for i in 0..n {
            vd[(i, j)] *= r(f);
        }
    }
    let rho = &vd * adjoint(&v);
    let varrho = scale(&(&rho - transpose(&rho)), r(0.5));
    let log_norm = 0.5 * vals.iter().map(|x| x.ln()).sum::<f64>();
    Ok(GaussianState { varrho, log_norm })
}

/// T₂ = (I + e^{2ϱ})⁻¹.
pub fn covariance_from_varrho(varrho: &CMat) -> CMat {
    let n = varrho.nrows();
    let e = crate::linalg::expm(&scale(varrho, r(2.0)));
    crate::linalg::inverse(&(eye(n) + e))
}

const FCS_MIN_STEPS: usize = 8;
const FCS_MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_4;

/// ⟨∏_r exp(Σ (W_r)_pq ω_p ω_q)⟩ = √det[T₂ + (I − T₂)∏ e^{2W_r}], with the
/// square-root branch followed continuously from W = 0.
pub fn fcs(t2: &CMat, ws: &[CMat]) -> Result<C64> {
    let n = t2.nrows();
    for w in ws {
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::InvalidArgument("W has the wrong dimension".into()));
        }
        let res = max_abs(&(w + transpose(w)));
        if res > 1e-12 * (1.0 + max_abs(w)) {
            return Err(Error::InvalidArgument(format!("W is not antisymmetric (residual {res:.3e})")));
        }
    }
    if ws.iter().all(|w| max_abs(w) == 0.0) {
        return Ok(ONE);
    }
    let id = eye(n);
    let det_at = |s: f64| -> C64 {
        let mut prod = eye(n);
        for w in ws {
            prod = prod * crate::linalg::expm(&scale(w, r(2.0 * s)));
        }
        crate::linalg::det(&(t2 + (&id - t2) * prod))
    };
    let mut root = ONE;
    let mut prev_s = 0.0;
    let mut prev_det = ONE;
    let mut s_next = 1.0 / FCS_MIN_STEPS as f64;
    let mut guard = 0;
    while prev_s < 1.0 {
        guard += 1;
        if guard > 1 << 16 {
            return Err(Error::Numerical("fcs homotopy failed to converge".into()));
        }
        let s = s_next.min(1.0);
        let dv = det_at(s);
        if dv == ZERO {
            return Err(Error::Numerical("determinant vanished along the homotopy".into()));
        }
        let dphase = (dv / prev_det).arg();
        if dphase.abs() > FCS_MAX_PHASE_STEP && s - prev_s > 1e-9 {
            s_next = prev_s + 0.5 * (s - prev_s);
            continue;
        }
        let cand = dv.sqrt();
        root = if (cand - root).norm() <= (cand + root).norm() { cand } else { -cand };
        prev_det = dv;
        prev_s = s;
        s_next = s + 1.0 / FCS_MIN_STEPS as f64;
    }
    Ok(root)
}

/// W and scalar prefactor with exp(c Σ_{j∈sites} n_j) = e^{c|sites|/2} exp(ωᵀWω).
pub fn number_weight(l: usize, sites: &[usize], coef: f64) -> (CMat, f64) {
    let mut w = zeros(2 * l, 2 * l);
    for &j in sites {
        w[(j, l + j)] = c(0.0, -0.5 * coef);
        w[(l + j, j)] = c(0.0, 0.5 * coef);
    }
    (w, 0.5 * coef * sites.len() as f64)
}

/// ln⟨exp((2/L) Σ_{j < L/2} n_j)⟩ from T₂.
pub fn log_half_chain_exp(t2: &CMat) -> Result<C64> {
    let l = t2.nrows() / 2;
    let sites: Vec<usize> = (0..l / 2).collect();
    let (w, pref) = number_weight(l, &sites, 2.0 / l as f64);
    Ok(fcs(t2, &[w])?.ln() + pref)
}

/// Looks up T at an arbitrary index tuple through a sorted accessor.
pub fn signed_lookup(get_sorted: impl Fn(&[usize]) -> C64, idx: &[usize]) -> C64 {
    let mut v = idx.to_vec();
    match sort_with_sign(&mut v) {
        Some(s) => get_sorted(&v) * s,
        None => {
            // Repeated labels: ω_j² = ½ reduces the order.
            let mut w = idx.to_vec();
            for p in 0..w.len() {
                for q in p + 1..w.len() {
                    if w[p] == w[q] {
                        // move the partner next to p with sign, then drop both
                        let mut sign = 1.0;
                        for _ in p + 1..q {
                            sign = -sign;
                        }
                        w.remove(q);
                        w.remove(p);
                        return signed_lookup(get_sorted, &w) * (0.5 * sign);
                    }
                }
            }
            unreachable!()
        }
    }
}

/// ⟨n_j⟩ = ½ − iT_{j,L+j}.
pub fn density(t2: impl Fn(usize, usize) -> C64, l: usize, j: usize) -> C64 {
    r(0.5) - I * t2(j, l + j)
}

/// ⟨n_a n_b⟩ for a ≠ b from a sorted-index accessor of orders 2 and 4.
pub fn density_density(get_sorted: impl Fn(&[usize]) -> C64, l: usize, a: usize, b: usize) -> C64 {
    assert_ne!(a, b);
    let t = |idx: &[usize]| signed_lookup(&get_sorted, idx);
    r(0.25) - c(0.0, 0.5) * (t(&[a, l + a]) + t(&[b, l + b])) - t(&[a, l + a, b, l + b])
}

/// Cov(n_a, n_b) = ⟨n_a n_b⟩ − ⟨n_a⟩⟨n_b⟩.
pub fn covariance(get_sorted: impl Fn(&[usize]) -> C64, l: usize, a: usize, b: usize) -> C64 {
    let t = |idx: &[usize]| signed_lookup(&get_sorted, idx);
    let na = r(0.5) - I * t(&[a, l + a]);
    let nb = r(0.5) - I * t(&[b, l + b]);
    density_density(&get_sorted, l, a, b) - na * nb
}
