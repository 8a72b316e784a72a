//! Dense matrix functions and the structural probes used to certify the jump operators.

use crate::error::{Error, Result};
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64;

pub type DenseMatrix = Mat<f64>;

pub const DEFAULT_MAX_DENSE_N: usize = 4096;
pub const DEFAULT_EXPM_CAP: f64 = 1e6;
pub const EVENTUAL_NONNEG_TOL: f64 = 1e-12;

/// Dense size cap, overridable through `LEVY_PIDE_MAX_N`.
pub fn max_dense_n() -> usize {
    std::env::var("LEVY_PIDE_MAX_N")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DENSE_N)
}

pub fn check_dense_size(n: usize) -> Result<()> {
    let limit = max_dense_n();
    if n > limit {
        return Err(Error::Capacity { requested: n, limit });
    }
    Ok(())
}

pub fn identity(n: usize) -> DenseMatrix {
    Mat::identity(n, n)
}

pub fn scaled(a: &DenseMatrix, s: f64) -> DenseMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| s * a[(i, j)])
}

/// `a·x + b·y`.
pub fn lincomb(a: f64, x: &DenseMatrix, b: f64, y: &DenseMatrix) -> DenseMatrix {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| a * x[(i, j)] + b * y[(i, j)])
}

/// `x + s·I`.
pub fn shift(x: &DenseMatrix, s: f64) -> DenseMatrix {
    let mut m = x.clone();
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += s;
    }
    m
}

pub fn norm1(a: &DenseMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(a: &DenseMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DenseMatrix) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn min_entry(a: &DenseMatrix) -> f64 {
    let mut m = f64::INFINITY;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.min(a[(i, j)]);
        }
    }
    m
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    max_abs(&lincomb(1.0, a, -1.0, b))
}

fn all_finite(a: &DenseMatrix) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()))
}

pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj != 0.0 {
            let col = a.col(j);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += col[i] * xj;
            }
        }
    }
    y
}

pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let inv = a.partial_piv_lu().inverse();
    if !all_finite(&inv) {
        return Err(Error::Convergence { what: "matrix inverse", iterations: 0, residual: f64::INFINITY });
    }
    Ok(inv)
}

/// Solves `a X = b`.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let x = a.partial_piv_lu().solve(b);
    if !all_finite(&x) {
        return Err(Error::Convergence { what: "dense solve", iterations: 0, residual: f64::INFINITY });
    }
    Ok(x)
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0,
            3960.0, 90.0, 1.0,
        ],
        13 => &[
            64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
            129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
            40840800.0, 960960.0, 16380.0, 182.0, 1.0,
        ],
        _ => unreachable!(),
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    expm_with_cap(a, DEFAULT_EXPM_CAP)
}

pub fn expm_with_cap(a: &DenseMatrix, cap: f64) -> Result<DenseMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm = norm1(a);
    if !norm.is_finite() || norm > cap {
        return Err(Error::Overflow { norm, cap });
    }
    if norm == 0.0 {
        return Ok(identity(n));
    }
    let eye = identity(n);
    let a2 = a * a;
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b = pade_coefficients(m);
            let mut powers = vec![eye.clone(), a2.clone()];
            while powers.len() <= m / 2 {
                let next = powers.last().unwrap() * &a2;
                powers.push(next);
            }
            let mut u_inner = Mat::<f64>::zeros(n, n);
            let mut v = Mat::<f64>::zeros(n, n);
            for (k, p) in powers.iter().enumerate() {
                u_inner = lincomb(1.0, &u_inner, b[2 * k + 1], p);
                v = lincomb(1.0, &v, b[2 * k], p);
            }
            let u = a * &u_inner;
            return solve(&lincomb(-1.0, &u, 1.0, &v), &lincomb(1.0, &u, 1.0, &v));
        }
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let a = scaled(a, 0.5f64.powi(s));
    let b = pade_coefficients(13);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let comb = |c6: f64, c4: f64, c2: f64| lincomb(1.0, &lincomb(c6, &a6, c4, &a4), c2, &a2);
    let u_hi = &a6 * &comb(b[13], b[11], b[9]);
    let u_inner = shift(&lincomb(1.0, &u_hi, 1.0, &comb(b[7], b[5], b[3])), b[1]);
    let u = &a * &u_inner;
    let v_hi = &a6 * &comb(b[12], b[10], b[8]);
    let v = shift(&lincomb(1.0, &v_hi, 1.0, &comb(b[6], b[4], b[2])), b[0]);
    let mut r = solve(&lincomb(-1.0, &u, 1.0, &v), &lincomb(1.0, &u, 1.0, &v))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

pub const SQRTM_TOL: f64 = 1e-15;
pub const SQRTM_MAX_ITER: usize = 60;

fn log_abs_det(lu_u: faer::MatRef<'_, f64>) -> f64 {
    (0..lu_u.nrows()).map(|i| lu_u[(i, i)].abs().ln()).sum()
}

/// Principal square root by the scaled product form of the Denman–Beavers iteration.
pub fn sqrtm(a: &DenseMatrix) -> Result<DenseMatrix> {
    sqrtm_with(a, SQRTM_TOL, SQRTM_MAX_ITER)
}

pub fn sqrtm_with(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<DenseMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut x = a.clone();
    let mut scaling = true;
    let mut prev = f64::INFINITY;
    for k in 1..=max_iter {
        let lu = m.partial_piv_lu();
        let minv = lu.inverse();
        if !all_finite(&minv) {
            return Err(Error::Convergence { what: "sqrtm", iterations: k, residual: f64::INFINITY });
        }
        let mu = if scaling { (-log_abs_det(lu.U()) / (2.0 * n as f64)).exp() } else { 1.0 };
        let (mu2, imu2) = (mu * mu, 1.0 / (mu * mu));
        let t = shift(&scaled(&minv, imu2), 1.0);
        x = scaled(&(&x * &t), 0.5 * mu);
        m = shift(&lincomb(0.25 * mu2, &m, 0.25 * imu2, &minv), 0.5);
        let err = norm1(&shift(&m, -1.0));
        if !err.is_finite() {
            return Err(Error::Convergence { what: "sqrtm", iterations: k, residual: err });
        }
        if err < tol {
            return Ok(x);
        }
        // once quadratic convergence stalls we are at the rounding floor
        if err < 1e-8 && err >= 0.5 * prev {
            return Ok(x);
        }
        if err < 1e-2 {
            scaling = false;
        }
        prev = err;
    }
    Err(Error::Convergence { what: "sqrtm", iterations: max_iter, residual: prev })
}

// 8-point Gauss–Legendre rule on [0, 1]
const GL_NODES: [f64; 4] = [0.1834346424956498, 0.525532409916329, 0.7966664774136267, 0.9602898564975363];
const GL_WEIGHTS: [f64; 4] = [0.362683783378362, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Principal logarithm by inverse scaling and squaring.
pub fn logm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut x = a.clone();
    let mut s = 0;
    while norm1(&shift(&x, -1.0)) > 0.25 {
        if s >= 64 {
            return Err(Error::Convergence { what: "logm", iterations: s, residual: norm1(&shift(&x, -1.0)) });
        }
        x = sqrtm(&x)?;
        s += 1;
    }
    let e = shift(&x, -1.0);
    let mut acc = Mat::<f64>::zeros(n, n);
    // log(I + E) = ∫_0^1 E (I + tE)^{-1} dt
    for k in 0..4 {
        for sign in [-1.0, 1.0] {
            let t = 0.5 * (1.0 + sign * GL_NODES[k]);
            let y = solve(&shift(&scaled(&e, t), 1.0), &e)?;
            acc = lincomb(1.0, &acc, 0.5 * GL_WEIGHTS[k], &y);
        }
    }
    Ok(scaled(&acc, 2f64.powi(s as i32)))
}

/// Real power `A^p = exp(p log A)`.
pub fn powm(a: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    if p == 0.0 {
        return Ok(identity(a.nrows()));
    }
    expm(&scaled(&logm(a)?, p))
}

pub fn eigenvalues(a: &DenseMatrix) -> Result<Vec<Complex64>> {
    a.eigenvalues()
        .map(|v| v.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
        .map_err(|_| Error::Convergence { what: "eigenvalue solver", iterations: 0, residual: f64::NAN })
}

pub const SPECTRAL_RTOL: f64 = 1e-8;
const EIGEN_FALLBACK_N: usize = 512;

/// Spectral radius by power iteration. An estimate is accepted only when
/// `(θ, v)` is an eigenpair to relative residual 1e-6; clustered or complex
/// peripheral spectra fail that check and go to a full eigensolve.
pub fn spectral_radius(a: &DenseMatrix) -> Result<f64> {
    let n = a.nrows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sin()).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    let mut streak = 0;
    let max_iter = if n <= EIGEN_FALLBACK_N { 300 } else { 2000 };
    for _ in 0..max_iter {
        let w = matvec(a, &v);
        let lam = norm(&w);
        if lam == 0.0 {
            return Ok(0.0);
        }
        if (lam - prev).abs() <= SPECTRAL_RTOL * lam {
            streak += 1;
            if streak >= 3 {
                let theta: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
                let r = norm(&w.iter().zip(&v).map(|(y, x)| y - theta * x).collect::<Vec<_>>());
                if r <= 1e-6 * lam {
                    return Ok(lam);
                }
                break;
            }
        } else {
            streak = 0;
        }
        prev = lam;
        v = w.into_iter().map(|x| x / lam).collect();
    }
    if n <= EIGEN_FALLBACK_N || check_dense_size(n).is_ok() {
        return Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Err(Error::Convergence { what: "spectral radius", iterations: max_iter, residual: prev })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerIndex {
    Found(usize),
    NotFound,
}

fn nonneg_within_tol(p: &DenseMatrix, tol: f64) -> bool {
    min_entry(p) >= -tol * max_abs(p)
}

/// Smallest `k0 ≤ kmax` with `A^k ≥ 0` (up to `tol` relative to the largest entry
/// of `A^k`) for every `k0 ≤ k ≤ kmax`. A witness at `kmax` alone is not enough
/// evidence when `kmax ≥ 2`.
pub fn eventual_nonneg_probe(a: &DenseMatrix, kmax: usize) -> PowerIndex {
    eventual_nonneg_probe_tol(a, kmax, EVENTUAL_NONNEG_TOL)
}

pub fn eventual_nonneg_probe_tol(a: &DenseMatrix, kmax: usize, tol: f64) -> PowerIndex {
    assert!(kmax >= 1);
    let scale = max_abs(a);
    if scale == 0.0 {
        return PowerIndex::Found(1);
    }
    let p = scaled(a, 1.0 / scale);
    let mut pk = p.clone();
    let mut ok = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            pk = &pk * &p;
            let m = max_abs(&pk);
            if m == 0.0 {
                // nilpotent: every later power is zero
                ok.resize(kmax, true);
                break;
            }
            pk = scaled(&pk, 1.0 / m);
        }
        ok.push(nonneg_within_tol(&pk, tol));
    }
    let mut k0 = None;
    for k in (1..=kmax).rev() {
        if ok[k - 1] {
            k0 = Some(k);
        } else {
            break;
        }
    }
    match k0 {
        Some(k) if k < kmax || kmax == 1 => PowerIndex::Found(k),
        _ => PowerIndex::NotFound,
    }
}

/// Certifies eventual nonnegativity: finds `K = 2^j` with `A^k ≥ 0` for every
/// `k ∈ [K, 2K)`. Every later power is then a product of nonnegative powers.
/// Returns `K`, or `None` if no such window exists up to `2^max_doublings`.
pub fn eventual_nonneg_certificate(a: &DenseMatrix, max_doublings: u32) -> Option<usize> {
    let scale = max_abs(a);
    if scale == 0.0 {
        return Some(1);
    }
    let p = scaled(a, 1.0 / scale);
    let normalize = |m: DenseMatrix| {
        let s = max_abs(&m);
        if s == 0.0 {
            m
        } else {
            scaled(&m, 1.0 / s)
        }
    };
    let mut pk = p.clone();
    let mut k = 1usize;
    for _ in 0..=max_doublings {
        // pk = A^k, k = 2^j; walk the window [k, 2k)
        let mut w = pk.clone();
        let mut good = true;
        for step in 0..k {
            if step > 0 {
                w = normalize(&w * &p);
            }
            if !nonneg_within_tol(&w, EVENTUAL_NONNEG_TOL) {
                good = false;
                break;
            }
        }
        if good {
            return Some(k);
        }
        pk = normalize(&pk * &pk);
        k *= 2;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmCertificate {
    pub s: f64,
    pub rho_b: f64,
    /// Power from which `B = sI - A` is certified nonnegative.
    pub power_index: Option<usize>,
}

impl EmCertificate {
    pub fn passed(&self) -> bool {
        self.power_index.is_some() && self.rho_b > 0.0 && self.rho_b < self.s
    }
}

/// EM-matrix probe: writes `A = sI - B` with `s = ρ(A)` and checks that `B` is
/// eventually nonnegative with `0 < ρ(B) < s`.
pub fn em_probe(a: &DenseMatrix, max_doublings: u32) -> Result<EmCertificate> {
    let s = spectral_radius(a)?;
    let b = shift(&scaled(a, -1.0), s);
    let rho_b = spectral_radius(&b)?;
    Ok(EmCertificate { s, rho_b, power_index: eventual_nonneg_certificate(&b, max_doublings) })
}
