//! NIG jump generator `J = δ(√(α²−β²) I − M₂^{1/2})` and its time steps.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::grid::{build_stencil, CompositeGrid, StencilKind};
use crate::matfun::{self, check_dense_size, DenseMatrix};
use crate::model::NigParams;

pub const PADE_TOL: f64 = 1e-10;
pub const PADE_MAX_ITER: usize = 100;

/// Which one-sided second-order stencil discretises the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `A^B₂`, used for β < 0.
    Backward,
    /// `A^F₂`, used for β ≥ 0.
    Forward,
}

impl Branch {
    pub fn for_skew(beta: f64) -> Self {
        if beta < 0.0 {
            Branch::Backward
        } else {
            Branch::Forward
        }
    }
}

fn require_uniform(grid: &CompositeGrid) -> Result<()> {
    if grid.uniform {
        Ok(())
    } else {
        Err(Error::Grid("the jump generators need a uniform grid".into()))
    }
}

/// `M₂ = (α²−β²)I − 2β A₂ − A^C₂`, with `A₂` chosen by the sign of `skew`.
/// Shared by the NIG and GH generators.
pub fn build_m2(alpha: f64, skew: f64, grid: &CompositeGrid) -> Result<(BandedMatrix, Branch)> {
    require_uniform(grid)?;
    let branch = Branch::for_skew(skew);
    let a2 = build_stencil(
        match branch {
            Branch::Backward => StencilKind::B2,
            Branch::Forward => StencilKind::F2,
        },
        grid,
    )?;
    let c2 = build_stencil(StencilKind::C2, grid)?;
    let shift = BandedMatrix::identity(grid.len()).scale(alpha * alpha - skew * skew);
    Ok((shift.combine(1.0, &a2, -2.0 * skew).combine(1.0, &c2, -1.0), branch))
}

/// `Z = δ M₂^{1/2}`, the discrete `δ√(α² − (β+∇)²)`.
pub fn build_z(alpha: f64, beta: f64, delta: f64, grid: &CompositeGrid) -> Result<(DenseMatrix, Branch)> {
    check_dense_size(grid.len())?;
    let (m2, branch) = build_m2(alpha, beta, grid)?;
    let root = matfun::sqrtm(&m2.to_dense())?;
    Ok((matfun::scaled(&root, delta), branch))
}

/// Asymptotic eigenvalues of `M₂` on a uniform grid of `n` nodes, `i = 1..=n`.
pub fn m2_eigenvalue_estimates(alpha: f64, beta: f64, h: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let s = (i as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
            alpha * alpha - beta * beta + 3.0 * beta.abs() / h + 4.0 / (h * h) * s * s
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct NigGenerator {
    pub j: DenseMatrix,
    pub branch: Branch,
    pub grid: CompositeGrid,
}

pub fn build_nig_generator(params: &NigParams, grid: &CompositeGrid) -> Result<NigGenerator> {
    let (z, branch) = build_z(params.alpha, params.beta, params.delta, grid)?;
    let z0 = params.delta * (params.alpha * params.alpha - params.beta * params.beta).sqrt();
    let j = matfun::shift(&matfun::scaled(&z, -1.0), z0);
    Ok(NigGenerator { j, branch, grid: grid.clone() })
}

impl NigGenerator {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `expm(Δτ J)`, to be reused across steps of equal length.
    pub fn propagator(&self, dt: f64) -> Result<DenseMatrix> {
        matfun::expm(&matfun::scaled(&self.j, dt))
    }
}

fn check_len(gen: &NigGenerator, c: &[f64]) -> Result<()> {
    if c.len() != gen.len() {
        return Err(Error::Grid(format!("vector of length {} on a grid of {} nodes", c.len(), gen.len())));
    }
    Ok(())
}

pub fn nig_jump_step_expm(gen: &NigGenerator, c_in: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_len(gen, c_in)?;
    if dt == 0.0 {
        return Ok(c_in.to_vec());
    }
    Ok(matfun::matvec(&gen.propagator(dt)?, c_in))
}

/// (1,1) Padé step `(I − ½ΔτJ) c = (I + ½ΔτJ) c_in`, solved by the fixed point
/// `c ← c_in + ½ΔτJ(c + c_in)` from `c = c_in`.
pub fn nig_jump_step_pade(gen: &NigGenerator, c_in: &[f64], dt: f64, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    check_len(gen, c_in)?;
    let half = 0.5 * dt;
    let mut c = c_in.to_vec();
    let mut sum: Vec<f64> = c_in.iter().map(|v| 2.0 * v).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let jc = matfun::matvec(&gen.j, &sum);
        residual = 0.0;
        for i in 0..c.len() {
            let next = c_in[i] + half * jc[i];
            residual = residual.max((next - c[i]).abs());
            c[i] = next;
            sum[i] = next + c_in[i];
        }
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            return Ok(c);
        }
    }
    Err(Error::Convergence { what: "Pade fixed-point iteration", iterations: max_iter, residual })
}
