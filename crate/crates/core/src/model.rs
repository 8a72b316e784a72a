//! Parameter records, validation, characteristic exponents and compensators.

use crate::error::{Error, Result};
use crate::special::ln_bessel_k;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub dividend: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub dt: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.spot > 0.0, "spot > 0"),
            (self.strike > 0.0, "strike > 0"),
            (self.sigma >= 0.0, "sigma >= 0"),
            (self.dt > 0.0, "dt > 0"),
            (self.dt <= self.maturity * (1.0 + 1e-12), "dt <= maturity"),
            (self.rate.is_finite() && self.dividend.is_finite(), "finite rate and dividend"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::domain(format!("market parameters violate {what}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mu: f64,
}

impl GhParams {
    pub fn as_nig(&self) -> NigParams {
        NigParams { alpha: self.alpha, beta: self.beta, delta: self.delta, mu: self.mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeixnerParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpModel {
    Nig(NigParams),
    Gh(GhParams),
    Meixner(MeixnerParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Call,
    Put,
    Digital,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub kind: PayoffKind,
    pub strike: f64,
}

impl Payoff {
    pub fn call(strike: f64) -> Self {
        Payoff { kind: PayoffKind::Call, strike }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strike > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("payoff strike must be > 0"))
        }
    }

    pub fn value(&self, spot: f64) -> f64 {
        match self.kind {
            PayoffKind::Call => (spot - self.strike).max(0.0),
            PayoffKind::Put => (self.strike - spot).max(0.0),
            PayoffKind::Digital => {
                if spot > self.strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub market: MarketParams,
    pub jump: JumpModel,
}

fn check_hyperbolic(alpha: f64, beta: f64, delta: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha > 0 violated"));
    }
    if !(delta > 0.0) {
        return Err(Error::domain("delta > 0 violated"));
    }
    if !(beta.abs() < alpha) {
        return Err(Error::domain(format!("|beta| < alpha violated (|beta| = {}, alpha = {alpha})", beta.abs())));
    }
    Ok(())
}

impl JumpModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpModel::Nig(p) => check_hyperbolic(p.alpha, p.beta, p.delta),
            JumpModel::Gh(p) => {
                if !p.lambda.is_finite() {
                    return Err(Error::domain("lambda must be finite"));
                }
                check_hyperbolic(p.alpha, p.beta, p.delta)
            }
            JumpModel::Meixner(p) => {
                if !(p.a > 0.0) {
                    return Err(Error::domain("a > 0 violated"));
                }
                if !(p.d > 0.0) {
                    return Err(Error::domain("d > 0 violated"));
                }
                if !(p.b > -PI && p.b < PI - p.a) {
                    return Err(Error::domain(format!("-pi < b < pi - a violated (b = {}, a = {})", p.b, p.a)));
                }
                Ok(())
            }
        }
    }

    /// Location parameter, routed to the diffusion drift.
    pub fn location(&self) -> f64 {
        match *self {
            JumpModel::Nig(p) => p.mu,
            JumpModel::Gh(p) => p.mu,
            JumpModel::Meixner(p) => p.m,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            JumpModel::Nig(_) => "nig",
            JumpModel::Gh(_) => "gh",
            JumpModel::Meixner(_) => "meixner",
        }
    }
}

pub fn validate(params: ModelParams) -> Result<ModelParams> {
    params.market.validate()?;
    params.jump.validate()?;
    Ok(params)
}

fn hyperbolic_z2(alpha: f64, beta: f64, u: Complex64) -> Result<Complex64> {
    // the strip |β - Im u| < α keeps α² - (β + iu)² off the closed negative axis
    if !((beta - u.im).abs() < alpha) {
        return Err(Error::domain(format!("u = {u} outside the strip |beta - Im u| < alpha")));
    }
    let w = Complex64::new(beta, 0.0) + Complex64::i() * u;
    Ok(alpha * alpha - w * w)
}

/// Per-unit-time characteristic exponent φ(u), so that `E[e^{iuL_t}] = exp(t φ(u))`.
pub fn char_exponent(model: &JumpModel, u: Complex64) -> Result<Complex64> {
    let iu = Complex64::i() * u;
    match *model {
        JumpModel::Nig(p) => {
            let z2 = hyperbolic_z2(p.alpha, p.beta, u)?;
            let a = p.alpha * p.alpha - p.beta * p.beta;
            Ok(iu * p.mu + p.delta * (a.sqrt() - z2.sqrt()))
        }
        JumpModel::Gh(p) => {
            let z2 = hyperbolic_z2(p.alpha, p.beta, u)?;
            let a = p.alpha * p.alpha - p.beta * p.beta;
            let z = p.delta * z2.sqrt();
            let z0 = Complex64::new(p.delta * a.sqrt(), 0.0);
            let ratio = 0.5 * p.lambda * (Complex64::new(a, 0.0) / z2).ln();
            Ok(iu * p.mu + ratio + ln_bessel_k(p.lambda, z) - ln_bessel_k(p.lambda, z0))
        }
        JumpModel::Meixner(p) => {
            let q = p.a * u.im - p.b;
            if !(q.abs() < PI) {
                return Err(Error::domain(format!("u = {u} outside the strip |a Im u - b| < pi")));
            }
            let w = (p.a * u - Complex64::i() * p.b) / 2.0;
            Ok(iu * p.m + 2.0 * p.d * ((p.b / 2.0).cos().ln() - w.cosh().ln()))
        }
    }
}

/// c = -φ(-i), the drift correction that makes the discounted price a martingale.
pub fn compensator(model: &JumpModel) -> Result<f64> {
    Ok(-char_exponent(model, Complex64::new(0.0, -1.0))?.re)
}
