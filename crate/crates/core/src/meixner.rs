//! Meixner jump step.
//!
//! `cos((a∇ + b)/2)` factors as `Π_n M_n` with
//! `M_n = I − (a²A^C₂ + 2abA₂ + b²I) / (4π²(n−½)²)`, so one step is
//! `cos(b/2)^κ Π_n M_n^{−κ}` with `κ = 2dΔτ`. The product is truncated at `p`
//! factors. The location `m` is left to the diffusion drift.

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Error, Result};
use crate::grid::{build_stencil, CompositeGrid, StencilKind};
use crate::matfun;
use crate::model::MeixnerParams;
use crate::nig::Branch;
use std::f64::consts::PI;

pub const DEFAULT_TRUNCATION: usize = 10;

/// How the three knots `κ = 0, 1, 2` are joined in the interpolation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaInterp {
    #[default]
    Quadratic,
    /// Piecewise cubic Hermite with Fritsch–Carlson slopes.
    MonotoneCubic,
}

#[derive(Debug, Clone)]
pub struct MeixnerFactorSet {
    pub factors: Vec<BandedMatrix>,
    pub branch: Branch,
    pub kappa: f64,
    pub cos_half_b: f64,
    lu: Vec<BandedLu>,
    lu_sq: Vec<BandedLu>,
}

impl MeixnerFactorSet {
    pub fn p(&self) -> usize {
        self.factors.len()
    }

    pub fn len(&self) -> usize {
        self.factors.first().map_or(0, |f| f.n())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `cos(b/2)^κ`.
    pub fn prefactor(&self) -> f64 {
        self.cos_half_b.powf(self.kappa)
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::Grid(format!("vector of length {} on a grid of {} nodes", c.len(), self.len())));
        }
        Ok(())
    }
}

/// `a²A^C₂ + 2abA₂ + b²I`, the discrete `(a∇ + b)²`.
fn symbol_square(params: &MeixnerParams, grid: &CompositeGrid) -> Result<(BandedMatrix, Branch)> {
    if !grid.uniform {
        return Err(Error::Grid("the jump generators need a uniform grid".into()));
    }
    let branch = Branch::for_skew(params.b);
    let a2 = build_stencil(
        match branch {
            Branch::Backward => StencilKind::B2,
            Branch::Forward => StencilKind::F2,
        },
        grid,
    )?;
    let c2 = build_stencil(StencilKind::C2, grid)?;
    let (a, b) = (params.a, params.b);
    let q = BandedMatrix::identity(grid.len()).scale(b * b).combine(1.0, &a2, 2.0 * a * b).combine(1.0, &c2, a * a);
    Ok((q, branch))
}

pub fn build_meixner_factors(params: &MeixnerParams, grid: &CompositeGrid, dt: f64, p: usize) -> Result<MeixnerFactorSet> {
    if p == 0 {
        return Err(Error::domain("Meixner truncation order must be >= 1"));
    }
    if !(dt >= 0.0) {
        return Err(Error::domain("jump step needs dt >= 0"));
    }
    let (q, branch) = symbol_square(params, grid)?;
    let id = BandedMatrix::identity(grid.len());
    let mut factors = Vec::with_capacity(p);
    let mut lu = Vec::with_capacity(p);
    let mut lu_sq = Vec::with_capacity(p);
    for n in 1..=p {
        let m = n as f64 - 0.5;
        let f = id.combine(1.0, &q, -1.0 / (4.0 * PI * PI * m * m));
        lu.push(f.lu()?);
        lu_sq.push(f.mul(&f).lu()?);
        factors.push(f);
    }
    Ok(MeixnerFactorSet {
        factors,
        branch,
        kappa: 2.0 * params.d * dt,
        cos_half_b: (params.b / 2.0).cos(),
        lu,
        lu_sq,
    })
}

/// `cos(b/2)^κ Π M_n^{−κ} c`, one dense fractional power per factor.
pub fn meixner_step_product(fs: &MeixnerFactorSet, c_in: &[f64]) -> Result<Vec<f64>> {
    fs.check_len(c_in)?;
    if fs.kappa == 0.0 {
        return Ok(c_in.to_vec());
    }
    matfun::check_dense_size(fs.len())?;
    let mut c = c_in.to_vec();
    for f in &fs.factors {
        c = matfun::matvec(&matfun::powm(&f.to_dense(), -fs.kappa)?, &c);
    }
    let s = fs.prefactor();
    c.iter_mut().for_each(|v| *v *= s);
    Ok(c)
}

/// The three knots `(z₀, cos(b/2) Π M_n⁻¹ c, cos²(b/2) Π M_n⁻² c)`.
pub fn kappa_knots(fs: &MeixnerFactorSet, c_in: &[f64]) -> Result<[Vec<f64>; 3]> {
    fs.check_len(c_in)?;
    let mut z1 = c_in.to_vec();
    let mut z2 = c_in.to_vec();
    for (l1, l2) in fs.lu.iter().zip(&fs.lu_sq) {
        l1.solve_in_place(&mut z1);
        l2.solve_in_place(&mut z2);
    }
    let c = fs.cos_half_b;
    z1.iter_mut().for_each(|v| *v *= c);
    z2.iter_mut().for_each(|v| *v *= c * c);
    Ok([c_in.to_vec(), z1, z2])
}

/// Quadratic Lagrange weights on the knots 0, 1, 2.
pub fn quadratic_weights(k: f64) -> [f64; 3] {
    [0.5 * (k - 1.0) * (k - 2.0), k * (2.0 - k), 0.5 * k * (k - 1.0)]
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monotone cubic through `(0, y0), (1, y1), (2, y2)` evaluated at `k ∈ [0, 2]`.
pub fn monotone_cubic(y: [f64; 3], k: f64) -> f64 {
    let d0 = y[1] - y[0];
    let d1 = y[2] - y[1];
    let mid = if d0 * d1 > 0.0 { 2.0 / (1.0 / d0 + 1.0 / d1) } else { 0.0 };
    let end = |d: f64, other: f64| {
        let m = (3.0 * d - other) / 2.0;
        if sign(m) != sign(d) {
            0.0
        } else if sign(d) != sign(other) && m.abs() > 3.0 * d.abs() {
            3.0 * d
        } else {
            m
        }
    };
    let (ya, yb, ma, mb, t) = if k <= 1.0 {
        (y[0], y[1], end(d0, d1), mid, k)
    } else {
        (y[1], y[2], mid, end(d1, d0), k - 1.0)
    };
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * ya + (t3 - 2.0 * t2 + t) * ma + (-2.0 * t3 + 3.0 * t2) * yb + (t3 - t2) * mb
}

/// Pointwise interpolation in κ between the knots from [`kappa_knots`]; O(pN).
pub fn meixner_step_interp(fs: &MeixnerFactorSet, c_in: &[f64], how: KappaInterp) -> Result<Vec<f64>> {
    let k = fs.kappa;
    if !(0.0..=2.0).contains(&k) {
        return Err(Error::domain(format!("interpolation in kappa needs 0 <= kappa <= 2, got {k}")));
    }
    let [z0, z1, z2] = kappa_knots(fs, c_in)?;
    Ok(match how {
        KappaInterp::Quadratic => {
            let w = quadratic_weights(k);
            (0..z0.len()).map(|i| w[0] * z0[i] + w[1] * z1[i] + w[2] * z2[i]).collect()
        }
        KappaInterp::MonotoneCubic => (0..z0.len()).map(|i| monotone_cubic([z0[i], z1[i], z2[i]], k)).collect(),
    })
}
