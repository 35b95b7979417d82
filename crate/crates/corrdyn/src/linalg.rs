//! Dense complex linear algebra helpers on top of `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;

use crate::error::{Error, Result};

pub type C64 = faer::c64;
pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn eye(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn conj(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn re_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| r(a[(i, j)].re))
}

pub fn im_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| r(a[(i, j)].im))
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    a.norm_l2()
}

/// Max absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let mut dst = zeros(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    faer::linalg::kron::kron(dst.as_mut(), a.as_ref(), b.as_ref());
    dst
}

/// Block matrix from a row-major grid of equally sized blocks.
pub fn blocks(grid: &[&[&CMat]]) -> CMat {
    let br = grid[0][0].nrows();
    let bc = grid[0][0].ncols();
    Mat::from_fn(br * grid.len(), bc * grid[0].len(), |i, j| {
        grid[i / br][j / bc][(i % br, j % bc)]
    })
}

pub fn block(a: &CMat, r0: usize, c0: usize, nr: usize, nc: usize) -> CMat {
    a.as_ref().submatrix(r0, c0, nr, nc).to_owned()
}

pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: &CMat) -> CMat {
    a.partial_piv_lu().inverse()
}

pub fn det(a: &CMat) -> C64 {
    a.determinant()
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    a.eigenvalues().map_err(|e| Error::Numerical(format!("eigenvalue solver failed: {e:?}")))
}

/// Eigenvalues and right eigenvectors (columns).
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let e = a.eigen().map_err(|e| Error::Numerical(format!("eigen solver failed: {e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Frobenius condition number estimate of an eigenvector basis.
pub fn condition(v: &CMat) -> f64 {
    let inv = inverse(v);
    let k = frobenius(v) * frobenius(&inv);
    if k.is_finite() {
        k
    } else {
        f64::INFINITY
    }
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values().map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))
}

pub fn pseudoinverse(a: &CMat) -> Result<CMat> {
    let svd = a.svd().map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    Ok(svd.pseudoinverse())
}

/// Row-major vectorization: entry (i, j) lands at i * ncols + j.
pub fn vec_rows(a: &CMat) -> Vec<C64> {
    let mut v = Vec::with_capacity(a.nrows() * a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            v.push(a[(i, j)]);
        }
    }
    v
}

pub fn unvec_rows(v: &[C64], n: usize, m: usize) -> CMat {
    Mat::from_fn(n, m, |i, j| v[i * m + j])
}

pub fn col(v: &[C64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(a: &CMat) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, 0)]).collect()
}

pub fn matvec(a: &CMat, v: &[C64]) -> Vec<C64> {
    col_to_vec(&(a * col(v)))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scale(a, r(0.5f64.powi(s)));
    let id = eye(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let lin = |x6: f64, x4: f64, x2: f64, x0: f64| -> CMat {
        scale(&a6, r(x6)) + scale(&a4, r(x4)) + scale(&a2, r(x2)) + scale(&id, r(x0))
    };
    let u_inner = &a6 * (scale(&a6, r(b[13])) + scale(&a4, r(b[11])) + scale(&a2, r(b[9])))
        + lin(b[7], b[5], b[3], b[1]);
    let u = &a * u_inner;
    let v = &a6 * (scale(&a6, r(b[12])) + scale(&a4, r(b[10])) + scale(&a2, r(b[8])))
        + lin(b[6], b[4], b[2], b[0]);
    let mut res = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        res = &res * &res;
    }
    res
}

/// Reusable generator of e^{A t}: eigendecomposition when the eigenbasis is
/// well conditioned, scaling-and-squaring otherwise.
#[derive(Clone, Debug)]
pub struct ExpGen {
    a: CMat,
    diag: Option<(Vec<C64>, CMat, CMat)>,
}

pub const EIG_COND_LIMIT: f64 = 1e8;

impl ExpGen {
    pub fn new(a: &CMat) -> Self {
        let diag = eig(a).ok().and_then(|(vals, v)| {
            let vinv = inverse(&v);
            let k = frobenius(&v) * frobenius(&vinv);
            (k.is_finite() && k < EIG_COND_LIMIT).then_some((vals, v, vinv))
        });
        Self { a: a.clone(), diag }
    }

    pub fn uses_eigenbasis(&self) -> bool {
        self.diag.is_some()
    }

    pub fn at(&self, t: f64) -> CMat {
        match &self.diag {
            Some((vals, v, vinv)) => {
                let n = vals.len();
                let mut vd = v.clone();
                for j in 0..n {
                    let e = (vals[j] * t).exp();
                    for i in 0..n {
                        vd[(i, j)] *= e;
                    }
                }
                &vd * vinv
            }
            None => expm(&scale(&self.a, r(t))),
        }
    }
}

/// Solves A X + X B = C.
///
/// Uses the eigenbases of A and B when both are well conditioned and no
/// eigenvalue sum is near zero; otherwise the vectorized Kronecker system,
/// falling back to its minimum-norm least-squares solution when singular.
/// The returned flag is true when the system was singular.
pub fn sylvester(a: &CMat, b: &CMat, cm: &CMat) -> Result<(CMat, bool)> {
    let n = a.nrows();
    let m = b.nrows();
    if let (Ok((la, va)), Ok((lb, vb))) = (eig(a), eig(b)) {
        let va_inv = inverse(&va);
        let vb_inv = inverse(&vb);
        let ka = frobenius(&va) * frobenius(&va_inv);
        let kb = frobenius(&vb) * frobenius(&vb_inv);
        let scale_ab = 1.0 + norm1(a) + norm1(b);
        let gap = la
            .iter()
            .flat_map(|x| lb.iter().map(move |y| (x + y).norm()))
            .fold(f64::INFINITY, f64::min);
        if ka < EIG_COND_LIMIT && kb < EIG_COND_LIMIT && gap > 1e-8 * scale_ab {
            let ct = &va_inv * cm * &vb;
            let y = Mat::from_fn(n, m, |i, j| ct[(i, j)] / (la[i] + lb[j]));
            return Ok((&va * y * &vb_inv, false));
        }
    }
    // (A ⊗ I + I ⊗ Bᵀ) vec(X) = vec(C) with row-major vec.
    let big = kron(a, &eye(m)) + kron(&eye(n), &transpose(b));
    let rhs = col(&vec_rows(cm));
    let sv = singular_values(&big)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin > 1e-12 * smax.max(1.0) {
        let x = solve(&big, &rhs);
        Ok((unvec_rows(&col_to_vec(&x), n, m), false))
    } else {
        let x = pseudoinverse(&big)? * rhs;
        Ok((unvec_rows(&col_to_vec(&x), n, m), true))
    }
}
