//! Quadratic dissipators L_μ = Σ U_{jk} ω_j ω_k under the closure condition:
//! reduced sector generators F̄_n, Ḡ_n over strictly increasing index tuples,
//! their propagation and the steady-state recursion.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use crate::combinatorics::{binomial, sort_with_sign, Combinations, ReducedTensor};
use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, c, eye, r, scale, sylvester, trace, zeros, CMat, ExpGen, C64, I, ONE, ZERO,
};
use crate::model::FermionChainModel;
use crate::structure::StructureMatrices;

pub const CLOSURE_RTOL: f64 = 1e-12;
const DENSE_SOLVE_MAX: usize = 1500;

#[derive(Clone, Debug, serde::Serialize)]
pub struct ClosureReport {
    pub residual: f64,
    pub scale: f64,
    /// No quartic Hamiltonian term is representable, so this always holds.
    pub u_h_required_zero: bool,
    pub closed: bool,
}

/// Evaluates ‖Im Σ_μ U_a ⊗ U_a*‖_max against a tolerance relative to
/// ‖Σ_μ U_a ⊗ U_a*‖_max.
pub fn check_closure(model: &FermionChainModel) -> ClosureReport {
    let ua = model.u_antisym();
    let d = model.dim_majorana();
    let mut residual = 0.0f64;
    let mut scale_v = 0.0f64;
    if !ua.is_empty() {
        for x in 0..d {
            for p in 0..d {
                for y in 0..d {
                    for q in 0..d {
                        let s: C64 = ua.iter().map(|u| u[(x, p)] * u[(y, q)].conj()).sum();
                        residual = residual.max(s.im.abs());
                        scale_v = scale_v.max(s.norm());
                    }
                }
            }
        }
    }
    ClosureReport {
        residual,
        scale: scale_v,
        u_h_required_zero: true,
        closed: residual <= CLOSURE_RTOL * scale_v.max(f64::MIN_POSITIVE),
    }
}

/// F_γ in its published form, built from the diagonal and trace of U_{L,μ}.
/// It is not part of the generator: diagonal entries of U only shift the
/// jump operator by Tr(U)/2, and the trace term in O₁ already carries that
/// shift exactly. Adding F_γ as an order-lowering coupling disagrees with
/// exact diagonalization at order 2.
pub fn f_gamma(model: &FermionChainModel) -> CMat {
    let d = model.dim_majorana();
    let mut out = zeros(d, d);
    for (ul, ua) in model.quadratic.iter().zip(model.u_antisym()) {
        let tr = trace(ul).conj();
        for j1 in 0..d {
            for j2 in 0..d {
                let w = r(0.5) * ul[(j1, j1)].conj() + r(0.5) * ul[(j2, j2)].conj() - tr;
                out[(j1, j2)] += ua[(j1, j2)] * w;
            }
        }
    }
    crate::linalg::re_part(&out)
}

/// Operators shared by all sectors: the one-slot core O₁, the two-slot
/// term K = Re Σ U_a ⊗ U_a†, and F_B for the coupling W_n.
#[derive(Clone, Debug)]
pub struct QuarticCore {
    pub dim: usize,
    pub o1: CMat,
    /// Nonzero entries of K grouped by source pair: k[p·d+q] = [(x, y, K_{(x,y),(p,q)})].
    pub k: Vec<Vec<(usize, usize, f64)>>,
    pub f_b: CMat,
    pub closure: ClosureReport,
}

impl QuarticCore {
    pub fn new(model: &FermionChainModel, sm: &StructureMatrices) -> Result<Self> {
        let closure = check_closure(model);
        if !closure.closed {
            return Err(Error::NotClosed { residual: closure.residual });
        }
        let d = model.dim_majorana();
        let ua = model.u_antisym();
        let mut o1 = sm.f1.clone();
        let mut trace_term = zeros(d, d);
        for (ul, u) in model.quadratic.iter().zip(&ua) {
            o1 -= u * adjoint(u);
            trace_term += scale(u, trace(ul).conj());
        }
        o1 += crate::linalg::re_part(&trace_term);
        let mut k = vec![Vec::new(); d * d];
        if !ua.is_empty() {
            let uad: Vec<CMat> = ua.iter().map(adjoint).collect();
            for p in 0..d {
                for q in 0..d {
                    let list = &mut k[p * d + q];
                    for x in 0..d {
                        for y in 0..d {
                            let s: f64 = ua.iter().zip(&uad).map(|(u, ud)| (u[(x, p)] * ud[(y, q)]).re).sum();
                            if s != 0.0 {
                                list.push((x, y, s));
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            dim: d,
            o1,
            k,
            f_b: sm.f_b.clone(),
            closure,
        })
    }

    /// W_n = iC(n,2)F_B.
    pub fn coupling(&self, n: usize) -> CMat {
        scale(&self.f_b, c(0.0, binomial(n, 2) as f64))
    }

    /// Labels that no generator term touches.
    pub fn frozen_labels(&self) -> Vec<usize> {
        let d = self.dim;
        let mut touched = vec![false; d];
        for p in 0..d {
            for x in 0..d {
                if self.o1[(x, p)] != ZERO || self.f_b[(x, p)] != ZERO {
                    touched[x] = true;
                    touched[p] = true;
                }
            }
            for q in 0..d {
                let list = &self.k[p * d + q];
                if !list.is_empty() {
                    touched[p] = true;
                    touched[q] = true;
                    for &(x, y, _) in list {
                        touched[x] = true;
                        touched[y] = true;
                    }
                }
            }
        }
        (0..d).filter(|&p| !touched[p]).collect()
    }
}

/// Strictly increasing tuples over a subset of Majorana labels.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub labels: Vec<usize>,
    pub order: usize,
    pub combos: Combinations,
    position: Vec<Option<usize>>,
}

impl SectorBasis {
    pub fn new(dim: usize, labels: &[usize], order: usize) -> Self {
        let mut position = vec![None; dim];
        for (i, &l) in labels.iter().enumerate() {
            position[l] = Some(i);
        }
        Self {
            labels: labels.to_vec(),
            order,
            combos: Combinations::new(labels.len(), order),
            position,
        }
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    /// Label tuple of basis element `i`.
    pub fn tuple(&self, i: usize) -> Vec<usize> {
        self.combos.unrank(i).iter().map(|&p| self.labels[p]).collect()
    }

    /// Rank and sign of an arbitrary label tuple, None on repeats.
    pub fn locate(&self, tuple: &[usize]) -> Option<(usize, f64)> {
        let mut pos: Vec<usize> = tuple.iter().map(|&l| self.position[l]).collect::<Option<_>>()?;
        let s = sort_with_sign(&mut pos)?;
        Some((self.combos.rank(&pos), s))
    }
}

/// Sparse matrix as column-sorted triplets.
#[derive(Clone, Debug, Default)]
pub struct Sparse {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    pub fn to_dense(&self) -> CMat {
        let mut m = zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, C64>> {
        let trips: Vec<Triplet<usize, usize, C64>> =
            self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Numerical(format!("sparse assembly: {e:?}")))
    }
}

fn merge_column(mut col: Vec<(usize, C64)>) -> Vec<(usize, C64)> {
    col.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, C64)> = Vec::with_capacity(col.len());
    for (i, v) in col {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|e| e.1 != ZERO);
    out
}

/// The pair (F̄_n, Ḡ_n) of one correlation sector.
#[derive(Clone, Debug)]
pub struct SectorGenerator {
    pub n: usize,
    pub basis: SectorBasis,
    pub fbar: Sparse,
    /// Present for n ≥ 2.
    pub gbar: Option<Sparse>,
}

impl SectorGenerator {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Builds F̄_n and Ḡ_n over all labels.
pub fn build_sector_generators(core: &QuarticCore, orders: &[usize]) -> Result<Vec<SectorGenerator>> {
    let labels: Vec<usize> = (0..core.dim).collect();
    build_sector_generators_on(core, &labels, orders)
}

/// Builds F̄_n and Ḡ_n on the tuples drawn from `labels`, which must be
/// closed under the generator.
pub fn build_sector_generators_on(
    core: &QuarticCore,
    labels: &[usize],
    orders: &[usize],
) -> Result<Vec<SectorGenerator>> {
    orders
        .iter()
        .map(|&n| {
            if n > labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "sector order {n} exceeds the {} available labels",
                    labels.len()
                )));
            }
            Ok(build_one(core, labels, n))
        })
        .collect()
}

fn build_one(core: &QuarticCore, labels: &[usize], n: usize) -> SectorGenerator {
    let d = core.dim;
    let basis = SectorBasis::new(d, labels, n);
    let dim = basis.len();
    let o1_cols: Vec<Vec<(usize, C64)>> = (0..d)
        .map(|p| (0..d).filter(|&x| core.o1[(x, p)] != ZERO).map(|x| (x, core.o1[(x, p)])).collect())
        .collect();
    let fcols: Vec<Vec<(usize, C64)>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let s = basis.tuple(col);
            let mut out = Vec::new();
            let mut work = s.clone();
            for b in 0..n {
                for &(x, v) in &o1_cols[s[b]] {
                    work[b] = x;
                    if let Some((row, sign)) = basis.locate(&work) {
                        out.push((row, v * sign));
                    }
                }
                work[b] = s[b];
            }
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    for &(x, y, v) in &core.k[s[a] * d + s[b]] {
                        work[a] = x;
                        work[b] = y;
                        if let Some((row, sign)) = basis.locate(&work) {
                            out.push((row, r(-v * sign)));
                        }
                    }
                    work[a] = s[a];
                    work[b] = s[b];
                }
            }
            merge_column(out)
        })
        .collect();
    let fbar = Sparse {
        nrows: dim,
        ncols: dim,
        entries: fcols
            .into_iter()
            .enumerate()
            .flat_map(|(j, col)| col.into_iter().map(move |(i, v)| (i, j, v)))
            .collect(),
    };
    let gbar = (n >= 2).then(|| {
        let w = core.coupling(n);
        let lower = SectorBasis::new(d, labels, n - 2);
        let weight = 1.0 / (n * (n - 1)) as f64;
        let gcols: Vec<Vec<(usize, C64)>> = (0..lower.len())
            .into_par_iter()
            .map(|col| {
                let s = lower.tuple(col);
                let mut out = Vec::new();
                let mut work = vec![0usize; n];
                work[2..].copy_from_slice(&s);
                for (ia, &a) in labels.iter().enumerate() {
                    for &b in &labels[ia + 1..] {
                        let v = w[(a, b)] - w[(b, a)];
                        if v == ZERO {
                            continue;
                        }
                        work[0] = a;
                        work[1] = b;
                        if let Some((row, sign)) = basis.locate(&work) {
                            out.push((row, v * (sign * weight)));
                        }
                    }
                }
                merge_column(out)
            })
            .collect();
        Sparse {
            nrows: dim,
            ncols: lower.len(),
            entries: gcols
                .into_iter()
                .enumerate()
                .flat_map(|(j, col)| col.into_iter().map(move |(i, v)| (i, j, v)))
                .collect(),
        }
    });
    SectorGenerator { n, basis, fbar, gbar }
}

/// Reduced tensors of orders 0, 2, …, 2M restricted to a label subset.
fn restrict(t: &ReducedTensor, basis: &SectorBasis) -> Vec<C64> {
    (0..basis.len()).map(|i| t.get(&basis.tuple(i))).collect()
}

fn unrestrict(v: &[C64], basis: &SectorBasis, dim: usize) -> ReducedTensor {
    let mut out = ReducedTensor::zeros(dim, basis.order);
    for (i, &x) in v.iter().enumerate() {
        out.data[crate::combinatorics::lex_rank(dim, &basis.tuple(i))] = x;
    }
    out
}

fn check_chain(gens: &[SectorGenerator]) -> Result<()> {
    for (k, g) in gens.iter().enumerate() {
        if g.n != 2 * k {
            return Err(Error::InvalidArgument(format!(
                "generators must cover orders 0, 2, 4, … consecutively; position {k} has order {}",
                g.n
            )));
        }
    }
    Ok(())
}

/// Block-lower-triangular generator of the stacked vector (T̄₀, T̄₂, …, T̄_{2M}).
pub fn augmented_generator(gens: &[SectorGenerator]) -> Result<(CMat, Vec<usize>)> {
    check_chain(gens)?;
    let mut offsets = Vec::with_capacity(gens.len());
    let mut total = 0;
    for g in gens {
        offsets.push(total);
        total += g.dim();
    }
    let mut big = zeros(total, total);
    for (k, g) in gens.iter().enumerate() {
        let o = offsets[k];
        for &(i, j, v) in &g.fbar.entries {
            big[(o + i, o + j)] += v;
        }
        if let Some(gb) = &g.gbar {
            let ol = offsets[k - 1];
            for &(i, j, v) in &gb.entries {
                big[(o + i, ol + j)] += v;
            }
        }
    }
    Ok((big, offsets))
}

/// Propagator of the stacked reduced system.
pub struct ReducedPropagator {
    gens: Vec<SectorGenerator>,
    offsets: Vec<usize>,
    exp: ExpGen,
    dim: usize,
}

impl ReducedPropagator {
    pub fn new(gens: Vec<SectorGenerator>) -> Result<Self> {
        let (big, offsets) = augmented_generator(&gens)?;
        let dim = gens.first().map(|g| g.basis.position.len()).unwrap_or(0);
        Ok(Self {
            exp: ExpGen::new(&big),
            gens,
            offsets,
            dim,
        })
    }

    pub fn generators(&self) -> &[SectorGenerator] {
        &self.gens
    }

    /// Tensors of orders 0, 2, …, 2M at time t from initial reduced tensors.
    pub fn evolve(&self, init: &[ReducedTensor], t: f64) -> Result<Vec<ReducedTensor>> {
        if init.len() < self.gens.len() {
            return Err(Error::InvalidArgument("not enough initial tensors".into()));
        }
        let mut x = Vec::new();
        for (g, t0) in self.gens.iter().zip(init) {
            x.extend(restrict(t0, &g.basis));
        }
        let y = crate::linalg::matvec(&self.exp.at(t), &x);
        Ok(self
            .gens
            .iter()
            .enumerate()
            .map(|(k, g)| unrestrict(&y[self.offsets[k]..self.offsets[k] + g.dim()], &g.basis, self.dim))
            .collect())
    }
}

pub fn evolve_reduced(gens: &[SectorGenerator], init: &[ReducedTensor], t: f64) -> Result<Vec<ReducedTensor>> {
    ReducedPropagator::new(gens.to_vec())?.evolve(init, t)
}

/// Taylor-stepped propagation of the stacked reduced system through sparse
/// products, for sizes where a dense exponential is out of reach.
pub struct SparseReducedPropagator {
    rows: Vec<Vec<(usize, C64)>>,
    offsets: Vec<usize>,
    gens: Vec<SectorGenerator>,
    dim: usize,
    norm1: f64,
}

const TAYLOR_STEP_NORM: f64 = 1.0;
const TAYLOR_MAX_TERMS: usize = 80;

impl SparseReducedPropagator {
    pub fn new(gens: Vec<SectorGenerator>) -> Result<Self> {
        check_chain(&gens)?;
        let mut offsets = Vec::with_capacity(gens.len());
        let mut total = 0;
        for g in &gens {
            offsets.push(total);
            total += g.dim();
        }
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); total];
        let mut colsum = vec![0.0; total];
        for (k, g) in gens.iter().enumerate() {
            let o = offsets[k];
            for &(i, j, v) in &g.fbar.entries {
                rows[o + i].push((o + j, v));
                colsum[o + j] += v.norm();
            }
            if let Some(gb) = &g.gbar {
                let ol = offsets[k - 1];
                for &(i, j, v) in &gb.entries {
                    rows[o + i].push((ol + j, v));
                    colsum[ol + j] += v.norm();
                }
            }
        }
        let dim = gens.first().map(|g| g.basis.position.len()).unwrap_or(0);
        Ok(Self {
            rows,
            offsets,
            gens,
            dim,
            norm1: colsum.into_iter().fold(0.0, f64::max),
        })
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    fn step(&self, x: &[C64], h: f64) -> Vec<C64> {
        let mut y = x.to_vec();
        let mut term = x.to_vec();
        for k in 1..=TAYLOR_MAX_TERMS {
            term = self.apply(&term);
            let f = h / k as f64;
            term.iter_mut().for_each(|z| *z *= f);
            let mut tn: f64 = 0.0;
            let mut yn: f64 = 0.0;
            for (a, b) in y.iter_mut().zip(&term) {
                *a += b;
                tn = tn.max(b.norm());
                yn = yn.max(a.norm());
            }
            if tn <= 1e-17 * yn.max(1e-300) {
                break;
            }
        }
        y
    }

    /// Tensors of orders 0, 2, …, 2M at each of the nondecreasing `times`.
    pub fn trajectory(&self, init: &[ReducedTensor], times: &[f64]) -> Result<Vec<Vec<ReducedTensor>>> {
        if init.len() < self.gens.len() {
            return Err(Error::InvalidArgument("not enough initial tensors".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("times must be finite, nonnegative and nondecreasing".into()));
        }
        let mut x = Vec::new();
        for (g, t0) in self.gens.iter().zip(init) {
            x.extend(restrict(t0, &g.basis));
        }
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let span = t - now;
            if span > 0.0 {
                let n = (span * self.norm1 / TAYLOR_STEP_NORM).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    x = self.step(&x, h);
                }
                now = t;
            }
            out.push(
                self.gens
                    .iter()
                    .enumerate()
                    .map(|(k, g)| unrestrict(&x[self.offsets[k]..self.offsets[k] + g.dim()], &g.basis, self.dim))
                    .collect(),
            );
        }
        Ok(out)
    }
}

/// Closed-form order-2 and order-4 solution through the Sylvester matrix K
/// with F̄₄K − KF̄₂ + Ḡ₄ = 0. Returns None when F̄₂ or F̄₄ is singular or
/// their spectra overlap.
pub struct ClosedForm {
    f2: ExpGen,
    f4: ExpGen,
    c2: Vec<C64>,
    k: CMat,
    y_inf: Vec<C64>,
    b2: SectorBasis,
    b4: SectorBasis,
    dim: usize,
}

impl ClosedForm {
    pub fn new(gens: &[SectorGenerator]) -> Result<Option<Self>> {
        check_chain(gens)?;
        if gens.len() < 3 {
            return Err(Error::InvalidArgument("closed form needs orders 0, 2, 4".into()));
        }
        let f2 = gens[1].fbar.to_dense();
        let f4 = gens[2].fbar.to_dense();
        let g2 = gens[1].gbar.as_ref().expect("order 2 has a coupling").to_dense();
        let g4 = gens[2].gbar.as_ref().expect("order 4 has a coupling").to_dense();
        let ev2 = crate::linalg::eigenvalues(&f2)?;
        let ev4 = crate::linalg::eigenvalues(&f4)?;
        let scale_v = 1.0 + crate::linalg::norm1(&f2) + crate::linalg::norm1(&f4);
        let min2 = ev2.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let min4 = ev4.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let gap = ev4
            .iter()
            .flat_map(|a| ev2.iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);
        if min2 < 1e-10 * scale_v || min4 < 1e-10 * scale_v || gap < 1e-10 * scale_v {
            return Ok(None);
        }
        // c₂ = F̄₂⁻¹Ḡ₂·1
        let g2v: Vec<C64> = (0..g2.nrows()).map(|i| g2[(i, 0)]).collect();
        let c2 = crate::linalg::col_to_vec(&crate::linalg::solve(&f2, &crate::linalg::col(&g2v)));
        let (k, _) = sylvester(&f4, &scale(&f2, r(-1.0)), &scale(&g4, r(-1.0)))?;
        // y∞ = F̄₄⁻¹Ḡ₄c₂
        let g4c2 = crate::linalg::matvec(&g4, &c2);
        let y_inf = crate::linalg::col_to_vec(&crate::linalg::solve(&f4, &crate::linalg::col(&g4c2)));
        Ok(Some(Self {
            f2: ExpGen::new(&f2),
            f4: ExpGen::new(&f4),
            c2,
            k,
            y_inf,
            b2: gens[1].basis.clone(),
            b4: gens[2].basis.clone(),
            dim: gens[0].basis.position.len(),
        }))
    }

    pub fn evolve(&self, init: &[ReducedTensor], t: f64) -> Vec<ReducedTensor> {
        let t2 = restrict(&init[1], &self.b2);
        let t4 = restrict(&init[2], &self.b4);
        let x20: Vec<C64> = t2.iter().zip(&self.c2).map(|(a, b)| a + b).collect();
        let x2t = crate::linalg::matvec(&self.f2.at(t), &x20);
        let t2t: Vec<C64> = x2t.iter().zip(&self.c2).map(|(a, b)| a - b).collect();
        let kx20 = crate::linalg::matvec(&self.k, &x20);
        let y0: Vec<C64> = t4.iter().zip(&kx20).zip(&self.y_inf).map(|((a, b), c)| a - b - c).collect();
        let yt = crate::linalg::matvec(&self.f4.at(t), &y0);
        let kx2t = crate::linalg::matvec(&self.k, &x2t);
        let t4t: Vec<C64> = yt.iter().zip(&kx2t).zip(&self.y_inf).map(|((a, b), c)| a + b + c).collect();
        vec![
            ReducedTensor { dim: self.dim, order: 0, data: vec![ONE] },
            unrestrict(&t2t, &self.b2, self.dim),
            unrestrict(&t4t, &self.b4, self.dim),
        ]
    }
}

fn solve_sector(f: &Sparse, rhs: &[C64], n: usize) -> Result<Vec<C64>> {
    let dim = f.nrows;
    let bnorm = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let x = if dim <= DENSE_SOLVE_MAX {
        let a = f.to_dense();
        let sv = crate::linalg::singular_values(&a)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if !(smin > 1e-12 * smax.max(1e-300)) {
            return Err(Error::SingularSector(n));
        }
        crate::linalg::col_to_vec(&crate::linalg::solve(&a, &crate::linalg::col(rhs)))
    } else {
        let a = f.to_faer()?;
        let lu = a.sp_lu().map_err(|_| Error::SingularSector(n))?;
        let sol = lu.solve(crate::linalg::col(rhs));
        crate::linalg::col_to_vec(&sol)
    };
    let fx = f.matvec(&x);
    let res = fx.iter().zip(rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let xnorm = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let fnorm = f.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max);
    if !xnorm.is_finite() || res > 1e-8 * (bnorm + fnorm * xnorm).max(1e-300) || xnorm * fnorm > 1e12 * bnorm.max(1e-300)
    {
        return Err(Error::SingularSector(n));
    }
    Ok(x)
}

/// Steady state of the reduced system on the generators' label subset:
/// T̄₀ = 1, F̄_n T̄_n + Ḡ_n T̄_{n−2} = 0.
pub fn steady_state_reduced(gens: &[SectorGenerator]) -> Result<Vec<ReducedTensor>> {
    check_chain(gens)?;
    let dim = gens.first().map(|g| g.basis.position.len()).unwrap_or(0);
    let mut prev = vec![ONE];
    let mut out = vec![ReducedTensor { dim, order: 0, data: vec![ONE] }];
    for g in &gens[1..] {
        let gb = g.gbar.as_ref().expect("coupling present for n >= 2");
        let rhs: Vec<C64> = gb.matvec(&prev).into_iter().map(|z| -z).collect();
        let x = solve_sector(&g.fbar, &rhs, g.n)?;
        out.push(unrestrict(&x, &g.basis, dim));
        prev = x;
    }
    Ok(out)
}

/// Steady state with frozen labels handled: the system is solved on the
/// active labels, and tuples containing frozen labels take the product of
/// their frozen part (from `init`) and the active steady value.
pub struct SteadyReduced {
    pub tensors: Vec<ReducedTensor>,
    pub frozen: Vec<usize>,
}

pub fn steady_state_with_frozen(
    core: &QuarticCore,
    max_order: usize,
    init: &[ReducedTensor],
) -> Result<SteadyReduced> {
    let d = core.dim;
    let frozen = core.frozen_labels();
    let active: Vec<usize> = (0..d).filter(|p| !frozen.contains(p)).collect();
    let orders: Vec<usize> = (0..=max_order).step_by(2).filter(|&n| n <= active.len()).collect();
    let gens = build_sector_generators_on(core, &active, &orders)?;
    let act = steady_state_reduced(&gens)?;
    if frozen.is_empty() {
        return Ok(SteadyReduced { tensors: act, frozen });
    }
    let mut tensors = Vec::new();
    for n in (0..=max_order).step_by(2) {
        let mut t = ReducedTensor::zeros(d, n);
        for (i, tuple) in Combinations::new(d, n).list.iter().enumerate() {
            let f: Vec<usize> = tuple.iter().copied().filter(|p| frozen.contains(p)).collect();
            let a: Vec<usize> = tuple.iter().copied().filter(|p| !frozen.contains(p)).collect();
            if !a.len().is_multiple_of(2) {
                continue;
            }
            let init_f = if f.is_empty() { ONE } else { init[f.len() / 2].get(&f) };
            let act_a = if a.is_empty() { ONE } else { act[a.len() / 2].get(&a) };
            let mut cat: Vec<usize> = f.iter().chain(&a).copied().collect();
            let sign = sort_with_sign(&mut cat).expect("distinct");
            t.data[i] = init_f * act_a * sign;
        }
        tensors.push(t);
    }
    Ok(SteadyReduced { tensors, frozen })
}

/// One point of a covariance study.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CovPoint {
    pub delta: f64,
    pub gamma_l: f64,
    pub gamma_g: f64,
    pub gamma_t: f64,
    pub n1: f64,
    pub nl: f64,
    pub cov_re: f64,
    pub cov_im: f64,
}

/// Steady-state Cov(n₁, n_L) of a closed model.
pub fn steady_covariance(model: &FermionChainModel) -> Result<(C64, C64, C64)> {
    let sm = StructureMatrices::build(model);
    let core = QuarticCore::new(model, &sm)?;
    let l = model.l;
    let init: Vec<ReducedTensor> = crate::quad_dynamics::initial_corr(&crate::model::InitialState::Vacuum, l, 4)?
        .iter()
        .map(crate::combinatorics::reduce_unchecked)
        .collect();
    let ss = steady_state_with_frozen(&core, 4, &init)?;
    let get = |idx: &[usize]| ss.tensors[idx.len() / 2].get(idx);
    let n1 = crate::quad_dynamics::density(|a, b| get(&[a, b]), l, 0);
    let nl = crate::quad_dynamics::density(|a, b| get(&[a, b]), l, l - 1);
    let cov = crate::quad_dynamics::covariance(get, l, 0, l - 1);
    Ok((n1, nl, cov))
}

/// Cov(n₁, n_L)_∞ over γ_l = a(1+δ), γ_g = a(1−δ), fanned out across threads.
pub fn covariance_study(l: usize, j: f64, a: f64, gamma_t: f64, deltas: &[f64]) -> Result<Vec<CovPoint>> {
    let rates: Vec<[f64; 3]> = deltas.iter().map(|d| [a * (1.0 + d), a * (1.0 - d), gamma_t]).collect();
    let mut pts = covariance_grid(l, j, &rates)?;
    for (p, &d) in pts.iter_mut().zip(deltas) {
        p.delta = d;
    }
    Ok(pts)
}

/// Cov(n₁, n_L)_∞ at arbitrary (γ_l, γ_g, γ_t) points, in input order. The
/// reported δ is (γ_l − γ_g)/(γ_l + γ_g), or 0 when both vanish.
pub fn covariance_grid(l: usize, j: f64, rates: &[[f64; 3]]) -> Result<Vec<CovPoint>> {
    rates
        .par_iter()
        .map(|&[gl, gg, gt]| {
            let model = FermionChainModel::preset(l, j, gl, gg, gt)?;
            let (n1, nl, cov) = steady_covariance(&model)?;
            let sum = gl + gg;
            Ok(CovPoint {
                delta: if sum > 0.0 { (gl - gg) / sum } else { 0.0 },
                gamma_l: gl,
                gamma_g: gg,
                gamma_t: gt,
                n1: n1.re,
                nl: nl.re,
                cov_re: cov.re,
                cov_im: cov.im,
            })
        })
        .collect()
}

/// Dense F_{M,n} on the full (2L)^n space: one-slot O₁ on every slot and
/// −K on every ordered slot pair. For small checks only.
pub fn full_generator_dense(core: &QuarticCore, n: usize) -> CMat {
    let d = core.dim;
    let size = d.pow(n as u32);
    let mut m = zeros(size, size);
    for col in 0..size {
        let s = crate::combinatorics::multi_index(col, n, d);
        let mut work = s.clone();
        for b in 0..n {
            for x in 0..d {
                let v = core.o1[(x, s[b])];
                if v != ZERO {
                    work[b] = x;
                    m[(crate::combinatorics::linear_index(&work, d), col)] += v;
                }
            }
            work[b] = s[b];
        }
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                for &(x, y, v) in &core.k[s[a] * d + s[b]] {
                    work[a] = x;
                    work[b] = y;
                    m[(crate::combinatorics::linear_index(&work, d), col)] -= r(v);
                }
                work[a] = s[a];
                work[b] = s[b];
            }
        }
    }
    m
}

/// Generator of the special case U = U† = −Uᵀ acting on T₂:
/// M T + T Mᵀ − 8Σ U T Uᵀ with M = F_A + iF_B − 4ΣU², as a dense (2L)²
/// operator on row-major vec(T).
pub fn special_case_operator(model: &FermionChainModel, sm: &StructureMatrices) -> CMat {
    let d = model.dim_majorana();
    let mut mq = &sm.f_a + scale(&sm.f_b, I);
    for u in &model.quadratic {
        mq -= scale(&(u * u), r(4.0));
    }
    let id = eye(d);
    let mut op = crate::linalg::kron(&mq, &id) + crate::linalg::kron(&id, &mq);
    for u in &model.quadratic {
        op -= scale(&crate::linalg::kron(u, u), r(8.0));
    }
    op
}
