//! Derived matrices of the quadratic Liouvillian and the rapid spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, blocks, c, conj, eig, eye, inverse, frobenius, r, scale, trace, transpose, zeros, CMat, C64, I,
};
use crate::model::FermionChainModel;

#[derive(Clone, Debug)]
pub struct StructureMatrices {
    pub l: usize,
    pub m_l: CMat,
    pub m_g: CMat,
    pub m_c: CMat,
    pub a: CMat,
    pub b_a: CMat,
    pub b_a_tilde: CMat,
    pub f_plus: CMat,
    pub f_minus: CMat,
    pub f_a: CMat,
    pub f_b: CMat,
    pub f1: CMat,
    pub x: CMat,
    pub y: CMat,
    pub q: CMat,
    pub f0: f64,
}

fn outer_sum(l: usize, n: usize, pairs: impl Iterator<Item = (Vec<C64>, Vec<C64>)>) -> CMat {
    let mut m = zeros(l, n);
    for (u, v) in pairs {
        for i in 0..l {
            for j in 0..n {
                m[(i, j)] += u[i].conj() * v[j];
            }
        }
    }
    m
}

impl StructureMatrices {
    pub fn build(model: &FermionChainModel) -> Self {
        let l = model.l;
        let lin = &model.linear;
        let m_l = outer_sum(l, l, lin.iter().map(|d| (d.l.clone(), d.l.clone())));
        let m_g = outer_sum(l, l, lin.iter().map(|d| (d.g.clone(), d.g.clone())));
        let m_c = outer_sum(l, l, lin.iter().map(|d| (d.l.clone(), d.g.clone())));
        let h = &model.h;
        let delta = &model.delta;
        let half_i = c(0.0, 0.5);

        let a = h - scale(&(&m_l - transpose(&m_g)), I);
        let b_a = delta + scale(&(conj(&m_c) - adjoint(&m_c)), half_i);
        let b_a_tilde = adjoint(delta) + scale(&(transpose(&m_c) - &m_c), half_i);

        let at = transpose(&a);
        let bsum = &b_a + &b_a_tilde;
        let bdiff = &b_a - &b_a_tilde;
        let f11 = scale(&(&a - &at), c(0.0, -0.5)) - scale(&bsum, I);
        let f12 = scale(&(&a + &at), r(-0.5)) - &bdiff;
        let f22 = scale(&(&a - &at), c(0.0, -0.5)) + scale(&bsum, I);

        let mlt = transpose(&m_l);
        let mgt = transpose(&m_g);
        let mcs = conj(&m_c);
        let mct = transpose(&m_c);
        let f13_1 = &mgt - &mlt + &mcs - &mct;
        let f14_1 = scale(&(&mgt + &mlt + &mcs + &mct), I);
        let f23_1 = scale(&(&mgt + &mlt - &mcs - &mct), I);

        let fp = |p: f64| -> CMat {
            let f13 = scale(&f13_1, r(p));
            let f14 = scale(&f14_1, r(p));
            let f23 = scale(&f23_1, r(p));
            let m = blocks(&[
                &[&f11, &f12, &f13, &f14],
                &[&scale(&transpose(&f12), r(-1.0)), &f22, &f23, &scale(&adjoint(&f13), r(-1.0))],
                &[&scale(&transpose(&f13), r(-1.0)), &conj(&f23), &conj(&f22), &scale(&adjoint(&f12), r(-1.0))],
                &[&conj(&f14), &conj(&f13), &conj(&f12), &conj(&f11)],
            ]);
            scale(&m, r(0.5))
        };
        let f_plus = fp(1.0);
        let f_minus = fp(-1.0);

        let f_a = blocks(&[&[&f11, &f12], &[&scale(&transpose(&f12), r(-1.0)), &f22]]);
        let f_b = blocks(&[&[&f14_1, &f13_1], &[&scale(&adjoint(&f13_1), r(-1.0)), &f23_1]]);
        let f1 = &f_a + scale(&f_b, I);

        let x1 = scale(&(&m_l + &mgt - scale(h, I)), r(0.5));
        let x2 = scale(&(&m_c + &mct), r(0.5)) + scale(&conj(delta), I);
        let x = blocks(&[
            &[&x1, &scale(&x2, I)],
            &[&scale(&conj(&x2), c(0.0, -1.0)), &conj(&x1)],
        ]);
        let y = blocks(&[
            &[&scale(&mcs, c(0.0, -1.0)), &mlt],
            &[&mgt, &scale(&mct, I)],
        ]);
        let id = eye(l);
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let q = scale(&blocks(&[&[&id, &scale(&id, I)], &[&scale(&id, I), &id]]), r(k));
        let f0 = -(trace(&m_l) + trace(&m_g)).re;

        Self {
            l,
            m_l,
            m_g,
            m_c,
            a,
            b_a,
            b_a_tilde,
            f_plus,
            f_minus,
            f_a,
            f_b,
            f1,
            x,
            y,
            q,
            f0,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.l
    }

    /// ‖F₁ + 2Q⁻¹XᵀQ‖_max.
    pub fn similarity_residual(&self) -> f64 {
        let rhs = scale(&(inverse(&self.q) * transpose(&self.x) * &self.q), r(-2.0));
        crate::linalg::max_abs(&(&self.f1 - rhs))
    }

    /// ‖F_B − 2iQ⁻¹Y[[0,I],[I,0]]Q‖_max.
    pub fn fb_residual(&self) -> f64 {
        let l = self.l;
        let z = zeros(l, l);
        let id = eye(l);
        let swap = blocks(&[&[&z, &id], &[&id, &z]]);
        let rhs = scale(&(inverse(&self.q) * &self.y * swap * &self.q), c(0.0, 2.0));
        crate::linalg::max_abs(&(&self.f_b - rhs))
    }

    /// Largest absolute imaginary part of F₁.
    pub fn f1_imag_residual(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.f1.ncols() {
            for i in 0..self.f1.nrows() {
                m = m.max(self.f1[(i, j)].im.abs());
            }
        }
        m
    }

    pub fn scale_norm(&self) -> f64 {
        frobenius(&self.f1).max(frobenius(&self.f_b)).max(1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RapidSpectrum {
    #[serde(skip)]
    pub alphas: Vec<C64>,
    #[serde(skip)]
    pub eigvecs: CMat,
    pub condition: f64,
}

pub const NONDIAG_LIMIT: f64 = 1e10;

/// Eigenvalues α_j of X, sorted by (Re, Im) ascending.
pub fn rapid_spectrum(sm: &StructureMatrices) -> Result<RapidSpectrum> {
    let (vals, vecs) = eig(&sm.x)?;
    let cond = crate::linalg::condition(&vecs);
    if !(cond < NONDIAG_LIMIT) {
        return Err(Error::NonDiagonalizable(cond));
    }
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| {
        vals[i]
            .re
            .total_cmp(&vals[j].re)
            .then(vals[i].im.total_cmp(&vals[j].im))
    });
    let alphas = idx.iter().map(|&i| vals[i]).collect();
    let eigvecs = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, idx[j])]);
    Ok(RapidSpectrum { alphas, eigvecs, condition: cond })
}

/// Serializable snapshot of all matrices for the `dump-structure` command.
pub fn to_json(sm: &StructureMatrices) -> serde_json::Value {
    fn m(a: &CMat) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
            .collect();
        serde_json::json!(rows)
    }
    serde_json::json!({
        "L": sm.l,
        "M_l": m(&sm.m_l), "M_g": m(&sm.m_g), "M_c": m(&sm.m_c),
        "A": m(&sm.a), "B_a": m(&sm.b_a), "B_a_tilde": m(&sm.b_a_tilde),
        "F_plus": m(&sm.f_plus), "F_minus": m(&sm.f_minus),
        "F_A": m(&sm.f_a), "F_B": m(&sm.f_b), "F1": m(&sm.f1),
        "X": m(&sm.x), "Y": m(&sm.y), "Q": m(&sm.q),
        "f0": sm.f0,
    })
}
