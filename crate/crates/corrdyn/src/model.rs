//! The open fermionic chain: Hamiltonian, linear and quadratic dissipators,
//! initial states, and model-file parsing.
//!
//! Majorana convention: ω_s = (a_s + a_s†)/√2, ω_{L+s} = i(a_s − a_s†)/√2,
//! so {ω_i, ω_j} = δ_ij. Indices are 0-based in code and 1-based in files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint, c, frobenius, r, transpose, zeros, CMat, C64, ZERO};

/// L_μ = Σ_j (l_j a_j + g_j a_j†).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDissipator {
    pub l: Vec<C64>,
    pub g: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct FermionChainModel {
    pub l: usize,
    pub h: CMat,
    pub delta: CMat,
    pub linear: Vec<LinearDissipator>,
    /// U_{L,μ} in the ω basis, stored as given.
    pub quadratic: Vec<CMat>,
}

#[derive(Clone, Debug)]
pub enum InitialState {
    Vacuum,
    FullyFilled,
    Ghz,
    /// Order-2 correlation matrix T₂ of a Gaussian state.
    GaussianCovariance(CMat),
    /// Density matrix in the 2^L Jordan–Wigner basis (oracle only).
    DenseMatrix(CMat),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub hermiticity_residual: f64,
    pub antisymmetry_residual: f64,
    pub delta_correction: f64,
    pub dimension_ok: bool,
    pub fatal: Option<String>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        self.fatal.is_some()
    }
}

const HERMITICITY_TOL: f64 = 1e-10;

/// Checks dimensions and Hermiticity, and measures the symmetric part of Δ
/// that antisymmetrization removes.
pub fn validate(
    l: usize,
    h: &CMat,
    delta: &CMat,
    linear: &[LinearDissipator],
    quadratic: &[CMat],
    auto_fix: bool,
) -> ValidationReport {
    let mut rep = ValidationReport {
        dimension_ok: true,
        ..Default::default()
    };
    let dims_ok = l > 0
        && h.nrows() == l
        && h.ncols() == l
        && delta.nrows() == l
        && delta.ncols() == l
        && linear.iter().all(|d| d.l.len() == l && d.g.len() == l)
        && quadratic.iter().all(|u| u.nrows() == 2 * l && u.ncols() == 2 * l);
    if !dims_ok {
        rep.dimension_ok = false;
        rep.fatal = Some(format!("dimension mismatch for L = {l}"));
        return rep;
    }
    rep.hermiticity_residual = 0.5 * frobenius(&(h - adjoint(h)));
    let sym = delta + transpose(delta);
    rep.delta_correction = 0.5 * frobenius(&sym);
    let antisym = antisymmetrize(delta);
    rep.antisymmetry_residual = frobenius(&(&antisym + transpose(&antisym)));
    let tol = HERMITICITY_TOL * frobenius(h).max(1.0);
    if rep.hermiticity_residual > tol && !auto_fix {
        rep.fatal = Some(format!(
            "h is not Hermitian (residual {:.3e})",
            rep.hermiticity_residual
        ));
    }
    rep
}

pub fn antisymmetrize(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] - m[(j, i)]) * 0.5)
}

fn hermitize(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

impl FermionChainModel {
    /// Validates and normalizes: Δ is replaced by its antisymmetric part.
    /// With `auto_fix`, h is replaced by its Hermitian part instead of failing.
    pub fn new(
        l: usize,
        h: CMat,
        delta: CMat,
        linear: Vec<LinearDissipator>,
        quadratic: Vec<CMat>,
        auto_fix: bool,
    ) -> Result<(Self, ValidationReport)> {
        let rep = validate(l, &h, &delta, &linear, &quadratic, auto_fix);
        if let Some(msg) = &rep.fatal {
            return Err(Error::InvalidModel(msg.clone()));
        }
        let h = if auto_fix { hermitize(&h) } else { h };
        let model = Self {
            l,
            h,
            delta: antisymmetrize(&delta),
            linear,
            quadratic,
        };
        Ok((model, rep))
    }

    /// Open chain with hopping J, loss √γ_l a₁, gain √γ_g a_L†, and for γ_t > 0
    /// the pair dissipators √γ_t a₁a_L and √γ_t a₁†a_L†.
    pub fn preset(l: usize, j: f64, gamma_l: f64, gamma_g: f64, gamma_t: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidModel(format!("preset chain needs L >= 2, got {l}")));
        }
        for (name, v) in [("gamma_l", gamma_l), ("gamma_g", gamma_g), ("gamma_t", gamma_t)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if !j.is_finite() {
            return Err(Error::InvalidModel("J must be finite".into()));
        }
        let mut h = zeros(l, l);
        for s in 0..l - 1 {
            h[(s, s + 1)] = r(j);
            h[(s + 1, s)] = r(j);
        }
        let mut linear = Vec::new();
        if gamma_l > 0.0 {
            let mut lv = vec![ZERO; l];
            lv[0] = r(gamma_l.sqrt());
            linear.push(LinearDissipator { l: lv, g: vec![ZERO; l] });
        }
        if gamma_g > 0.0 {
            let mut gv = vec![ZERO; l];
            gv[l - 1] = r(gamma_g.sqrt());
            linear.push(LinearDissipator { l: vec![ZERO; l], g: gv });
        }
        let mut quadratic = Vec::new();
        if gamma_t > 0.0 {
            let st = gamma_t.sqrt();
            let a1 = annihilation_row(l, 0);
            let al = annihilation_row(l, l - 1);
            quadratic.push(pair_operator(&a1, &al, st));
            let c1: Vec<C64> = a1.iter().map(|x| x.conj()).collect();
            let cl: Vec<C64> = al.iter().map(|x| x.conj()).collect();
            quadratic.push(pair_operator(&c1, &cl, st));
        }
        Ok(Self {
            l,
            h,
            delta: zeros(l, l),
            linear,
            quadratic,
        })
    }

    pub fn dim_majorana(&self) -> usize {
        2 * self.l
    }

    /// U_{a,μ} = U_{L,μ} − U_{L,μ}ᵀ.
    pub fn u_antisym(&self) -> Vec<CMat> {
        self.quadratic.iter().map(|u| u - transpose(u)).collect()
    }

    pub fn has_quadratic(&self) -> bool {
        !self.quadratic.is_empty()
    }

    /// Linear dissipator coefficients c in L_μ = Σ_p c_p ω_p.
    pub fn linear_majorana(&self) -> Vec<Vec<C64>> {
        let l = self.l;
        self.linear
            .iter()
            .map(|d| {
                let mut cv = vec![ZERO; 2 * l];
                for s in 0..l {
                    let a = annihilation_row(l, s);
                    for p in 0..2 * l {
                        cv[p] += d.l[s] * a[p] + d.g[s] * a[p].conj();
                    }
                }
                cv
            })
            .collect()
    }

    /// Antisymmetric Hm with H = Σ Hm_pq ω_p ω_q + const.
    pub fn hamiltonian_majorana(&self) -> CMat {
        let l = self.l;
        let n = 2 * l;
        let rows: Vec<Vec<C64>> = (0..l).map(|s| annihilation_row(l, s)).collect();
        let mut hm = zeros(n, n);
        for i in 0..l {
            for j in 0..l {
                let hij = self.h[(i, j)];
                let dij = self.delta[(i, j)];
                let dji = self.delta[(j, i)].conj();
                for p in 0..n {
                    let ai = rows[i][p];
                    for q in 0..n {
                        let aj = rows[j][q];
                        hm[(p, q)] += hij * ai.conj() * aj + dij * ai * aj + dji * ai.conj() * aj.conj();
                    }
                }
            }
        }
        antisymmetrize(&hm)
    }
}

/// Coefficients of a_s in the ω basis: a_s = (ω_s − iω_{L+s})/√2.
pub fn annihilation_row(l: usize, s: usize) -> Vec<C64> {
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; 2 * l];
    v[s] = r(k);
    v[l + s] = c(0.0, -k);
    v
}

/// Antisymmetrized coefficient matrix of (Σ u_p ω_p)(Σ v_q ω_q) for anticommuting factors.
fn pair_operator(u: &[C64], v: &[C64], amp: f64) -> CMat {
    let n = u.len();
    CMat::from_fn(n, n, |p, q| (u[p] * v[q] - v[p] * u[q]) * (0.5 * amp))
}

// ---- model files ----

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Cplx(pub [f64; 2]);

impl From<Cplx> for C64 {
    fn from(x: Cplx) -> Self {
        c(x.0[0], x.0[1])
    }
}

impl From<C64> for Cplx {
    fn from(x: C64) -> Self {
        Cplx([x.re, x.im])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearSpec {
    pub l: Vec<Cplx>,
    pub g: Vec<Cplx>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadraticSpec {
    #[serde(rename = "U")]
    pub u: Vec<Vec<Cplx>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Explicit {
        #[serde(rename = "L")]
        l: usize,
        h: Vec<Vec<Cplx>>,
        #[serde(default)]
        delta: Option<Vec<Vec<Cplx>>>,
        #[serde(default)]
        linear: Vec<LinearSpec>,
        #[serde(default)]
        quadratic: Vec<QuadraticSpec>,
        #[serde(default)]
        auto_fix: bool,
    },
    Preset {
        #[serde(rename = "L")]
        l: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        gamma_l: f64,
        #[serde(default)]
        gamma_g: f64,
        #[serde(default)]
        gamma_t: f64,
    },
}

fn to_mat(rows: &[Vec<Cplx>], n: usize, name: &str) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidModel(format!("{name} must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j].into()))
}

impl ModelSpec {
    pub fn build(&self) -> Result<(FermionChainModel, ValidationReport)> {
        match self {
            ModelSpec::Preset { l, j, gamma_l, gamma_g, gamma_t } => {
                let m = FermionChainModel::preset(*l, *j, *gamma_l, *gamma_g, *gamma_t)?;
                let rep = validate(m.l, &m.h, &m.delta, &m.linear, &m.quadratic, false);
                Ok((m, rep))
            }
            ModelSpec::Explicit { l, h, delta, linear, quadratic, auto_fix } => {
                let l = *l;
                if l == 0 {
                    return Err(Error::InvalidModel("L must be positive".into()));
                }
                let h = to_mat(h, l, "h")?;
                let delta = match delta {
                    Some(d) => to_mat(d, l, "delta")?,
                    None => zeros(l, l),
                };
                let mut lin = Vec::new();
                for d in linear {
                    if d.l.len() != l || d.g.len() != l {
                        return Err(Error::InvalidModel(format!("linear dissipator vectors must have length {l}")));
                    }
                    lin.push(LinearDissipator {
                        l: d.l.iter().map(|&x| x.into()).collect(),
                        g: d.g.iter().map(|&x| x.into()).collect(),
                    });
                }
                let quad = quadratic
                    .iter()
                    .map(|q| to_mat(&q.u, 2 * l, "U"))
                    .collect::<Result<Vec<_>>>()?;
                FermionChainModel::new(l, h, delta, lin, quad, *auto_fix)
            }
        }
    }
}
