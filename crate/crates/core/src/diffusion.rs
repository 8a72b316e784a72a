//! Diffusion stage: closed-form lognormal propagator and a Crank–Nicolson stepper.
//!
//! The grid variable is `x = ln(S/K)`. Prices are undiscounted payoffs evolved
//! backwards in time to maturity `tau`, discounted at `r`, with the asset
//! drifting at `r - q + c + μ` where `c` is the jump compensator and `μ` the
//! relocated jump location.

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Error, Result};
use crate::grid::CompositeGrid;
use crate::model::{compensator, ModelParams, Payoff, PayoffKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSpec {
    pub rate: f64,
    pub dividend: f64,
    pub sigma: f64,
    /// Compensator of the jump part.
    pub drift_adjustment: f64,
    /// Location parameter moved over from the jump model.
    pub extra_drift: f64,
}

impl DiffusionSpec {
    pub fn black_scholes(rate: f64, dividend: f64, sigma: f64) -> Self {
        DiffusionSpec { rate, dividend, sigma, drift_adjustment: 0.0, extra_drift: 0.0 }
    }

    pub fn from_model(params: &ModelParams) -> Result<Self> {
        let m = &params.market;
        Ok(DiffusionSpec {
            rate: m.rate,
            dividend: m.dividend,
            sigma: m.sigma,
            drift_adjustment: compensator(&params.jump)?,
            extra_drift: params.jump.location(),
        })
    }

    /// Growth rate of the asset under the stage dynamics.
    pub fn forward_rate(&self) -> f64 {
        self.rate - self.dividend + self.drift_adjustment + self.extra_drift
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::domain("diffusion volatility must be >= 0"));
        }
        Ok(())
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Stage value at one spot after time `t`.
pub fn bs_value(spec: &DiffusionSpec, payoff: &Payoff, spot: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return payoff.value(spot);
    }
    let k = payoff.strike;
    let df = (-spec.rate * t).exp();
    let fwd = spot * (spec.forward_rate() * t).exp();
    let sd = spec.sigma * t.sqrt();
    if sd == 0.0 {
        return df * payoff.value(fwd);
    }
    let d1 = ((fwd / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match payoff.kind {
        PayoffKind::Call => df * (fwd * norm_cdf(d1) - k * norm_cdf(d2)),
        PayoffKind::Put => df * (k * norm_cdf(-d2) - fwd * norm_cdf(-d1)),
        PayoffKind::Digital => df * norm_cdf(d2),
    }
}

/// Closed-form stage values on every node, `S = K e^x`.
pub fn bs_closed_form(spec: &DiffusionSpec, payoff: &Payoff, grid: &CompositeGrid, t: f64) -> Vec<f64> {
    let k = payoff.strike;
    grid.nodes.iter().map(|&x| bs_value(spec, payoff, k * x.exp(), t)).collect()
}

/// Payoff averaged over each node's dual cell `[x_i - h_{i-1}/2, x_i + h_i/2]`.
/// Smooths the kink for the finite-difference stepper.
pub fn cell_averaged_payoff(payoff: &Payoff, grid: &CompositeGrid) -> Vec<f64> {
    let k = payoff.strike;
    let n = grid.len();
    (0..n)
        .map(|i| {
            let x = grid.nodes[i];
            let a = if i > 0 { x - 0.5 * grid.steps[i - 1] } else { x };
            let b = if i + 1 < n { x + 0.5 * grid.steps[i] } else { x };
            if b <= a {
                return payoff.value(k * x.exp());
            }
            // ∫_a^b of the payoff in y = ln(S/K)
            let integral = match payoff.kind {
                PayoffKind::Call if b > 0.0 => {
                    let lo = a.max(0.0);
                    k * ((b.exp() - lo.exp()) - (b - lo))
                }
                PayoffKind::Put if a < 0.0 => {
                    let hi = b.min(0.0);
                    k * ((hi - a) - (hi.exp() - a.exp()))
                }
                PayoffKind::Digital => (b - a.max(0.0)).max(0.0),
                _ => 0.0,
            };
            integral / (b - a)
        })
        .collect()
}

/// Asymptotic stage values at the two grid ends at time-to-maturity `tau`.
pub fn boundary_values(spec: &DiffusionSpec, payoff: &Payoff, grid: &CompositeGrid, tau: f64) -> (f64, f64) {
    let k = payoff.strike;
    let df = (-spec.rate * tau).exp();
    let growth = (spec.forward_rate() * tau).exp();
    let s_hi = k * grid.nodes[grid.len() - 1].exp();
    match payoff.kind {
        PayoffKind::Call => (0.0, df * (s_hi * growth - k)),
        PayoffKind::Put => {
            let s_lo = k * grid.nodes[0].exp();
            (df * (k - s_lo * growth), 0.0)
        }
        PayoffKind::Digital => (0.0, df),
    }
}

/// Crank–Nicolson stepper for `∂τ C = D C`, with
/// `D = -r + (g - σ²/2)∂x + (σ²/2)∂²x` and Dirichlet ends. The tridiagonal
/// factorisation is done once per `(grid, dt)`.
#[derive(Debug, Clone)]
pub struct CnStepper {
    explicit: BandedMatrix,
    implicit: BandedLu,
    n: usize,
}

impl CnStepper {
    pub fn new(spec: &DiffusionSpec, grid: &CompositeGrid, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0) {
            return Err(Error::domain("diffusion step needs dt > 0"));
        }
        let n = grid.len();
        let s2 = spec.sigma * spec.sigma;
        let drift = spec.forward_rate() - 0.5 * s2;
        // D on interior rows; nonuniform three-point formulas reduce to the usual ones on a uniform grid
        let mut d = BandedMatrix::zeros(n, 1, 1);
        for i in 1..n - 1 {
            let hm = grid.steps[i - 1];
            let hp = grid.steps[i];
            let lo = -hp / (hm * (hm + hp));
            let up = hm / (hp * (hm + hp));
            let c1 = (hp - hm) / (hm * hp);
            let l2 = 2.0 / (hm * (hm + hp));
            let u2 = 2.0 / (hp * (hm + hp));
            let d2 = -2.0 / (hm * hp);
            d.set(i, i - 1, drift * lo + 0.5 * s2 * l2);
            d.set(i, i, drift * c1 + 0.5 * s2 * d2 - spec.rate);
            d.set(i, i + 1, drift * up + 0.5 * s2 * u2);
        }
        let id = BandedMatrix::identity(n);
        let mut explicit = id.combine(1.0, &d, 0.5 * dt);
        let mut implicit = id.combine(1.0, &d, -0.5 * dt);
        for i in [0, n - 1] {
            for j in explicit.row_range(i) {
                explicit.set(i, j, 0.0);
                implicit.set(i, j, if i == j { 1.0 } else { 0.0 });
            }
        }
        Ok(CnStepper { explicit, implicit: implicit.lu()?, n })
    }

    /// One step; `left`/`right` are the boundary values at the new time level.
    pub fn step(&self, c_in: &[f64], left: f64, right: f64) -> Vec<f64> {
        assert_eq!(c_in.len(), self.n);
        let mut rhs = self.explicit.matvec(c_in);
        rhs[0] = left;
        rhs[self.n - 1] = right;
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }
}

/// One Crank–Nicolson step from time-to-maturity `tau` to `tau + dt` with
/// asymptotic boundaries for `payoff`.
pub fn cn_step(
    spec: &DiffusionSpec,
    grid: &CompositeGrid,
    payoff: &Payoff,
    c_in: &[f64],
    tau: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let stepper = CnStepper::new(spec, grid, dt)?;
    let (l, r) = boundary_values(spec, payoff, grid, tau + dt);
    Ok(stepper.step(c_in, l, r))
}
