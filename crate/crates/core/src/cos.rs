//! Fourier-cosine reference pricer for European payoffs.

use crate::error::{Error, Result};
use crate::model::{char_exponent, compensator, ModelParams, Payoff, PayoffKind};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosConfig {
    pub terms: usize,
    /// L in [c₁ − L√(c₂ + √|c₄|), c₁ + L√(c₂ + √|c₄|)].
    pub width_multiplier: f64,
}

impl Default for CosConfig {
    fn default() -> Self {
        CosConfig { terms: 256, width_multiplier: 10.0 }
    }
}

impl CosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.terms < 4 {
            return Err(Error::domain(format!("COS needs at least 4 terms, got {}", self.terms)));
        }
        if !(self.width_multiplier > 0.0) {
            return Err(Error::domain("COS width multiplier must be > 0"));
        }
        Ok(())
    }
}

/// Characteristic function of ln(S_t/S₀) over `t`: diffusion, jumps and the
/// compensator drift composed into a single exponent.
pub struct LogReturnCf<'a> {
    model: &'a ModelParams,
    t: f64,
    drift: f64,
}

impl<'a> LogReturnCf<'a> {
    pub fn new(model: &'a ModelParams, t: f64) -> Result<Self> {
        let m = &model.market;
        let c = compensator(&model.jump)?;
        let drift = (m.rate - m.dividend + c - 0.5 * m.sigma * m.sigma) * t;
        Ok(LogReturnCf { model, t, drift })
    }

    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        let s = self.model.market.sigma;
        let i = Complex64::i();
        let e = i * u * self.drift - 0.5 * s * s * u * u * self.t + self.t * char_exponent(&self.model.jump, u)?;
        Ok(e.exp())
    }

    /// ln E[e^{θX}].
    fn cgf(&self, theta: f64) -> Result<f64> {
        Ok(self.eval(Complex64::new(0.0, -theta))?.re.ln())
    }

    /// First, second and fourth cumulants by central differences of the cumulant generating function.
    pub fn cumulants(&self) -> Result<(f64, f64, f64)> {
        let g0 = self.cgf(0.0)?;
        let e = 1e-3;
        let (gp, gm) = (self.cgf(e)?, self.cgf(-e)?);
        let c1 = (gp - gm) / (2.0 * e);
        let c2 = (gp - 2.0 * g0 + gm) / (e * e);
        let e = 2e-2;
        let g = [self.cgf(-2.0 * e)?, self.cgf(-e)?, g0, self.cgf(e)?, self.cgf(2.0 * e)?];
        let c4 = (g[0] - 4.0 * g[1] + 6.0 * g[2] - 4.0 * g[3] + g[4]) / e.powi(4);
        Ok((c1, c2, c4))
    }
}

/// Interval for the log-return X; the pricer shifts it by ln(S₀/K).
pub fn truncation_interval(cf: &LogReturnCf, cfg: &CosConfig) -> Result<(f64, f64)> {
    let (c1, c2, c4) = cf.cumulants()?;
    let half = cfg.width_multiplier * (c2.abs() + c4.abs().sqrt()).sqrt();
    if !(half.is_finite() && half > 0.0) {
        return Err(Error::domain(format!("degenerate COS truncation interval (c2 = {c2}, c4 = {c4})")));
    }
    Ok((c1 - half, c1 + half))
}

/// ∫_c^d e^y cos(u(y − a)) dy for every u.
fn chi(u: &[f64], a: f64, c: f64, d: f64) -> Vec<f64> {
    u.iter()
        .map(|&u| {
            let (sd, cd) = (u * (d - a)).sin_cos();
            let (sc, cc) = (u * (c - a)).sin_cos();
            (cd * d.exp() - cc * c.exp() + u * (sd * d.exp() - sc * c.exp())) / (1.0 + u * u)
        })
        .collect()
}

/// ∫_c^d cos(u(y − a)) dy for every u.
fn psi(u: &[f64], a: f64, c: f64, d: f64) -> Vec<f64> {
    u.iter()
        .map(|&u| if u == 0.0 { d - c } else { ((u * (d - a)).sin() - (u * (c - a)).sin()) / u })
        .collect()
}

/// Price at spot `model.market.spot` with the payoff written on y = ln(S_t/K).
pub fn cos_price(model: &ModelParams, payoff: &Payoff, t: f64, cfg: &CosConfig) -> Result<f64> {
    cfg.validate()?;
    payoff.validate()?;
    model.market.validate()?;
    model.jump.validate()?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("maturity must be >= 0, got {t}")));
    }
    let k = payoff.strike;
    let x = (model.market.spot / k).ln();
    if t == 0.0 {
        return Ok(payoff.value(model.market.spot));
    }
    let cf = LogReturnCf::new(model, t)?;
    let (a, b) = truncation_interval(&cf, cfg)?;
    let (a, b) = (a + x, b + x);
    let span = b - a;
    let u: Vec<f64> = (0..cfg.terms).map(|j| j as f64 * PI / span).collect();
    let m = &model.market;
    match payoff.kind {
        // calls go through the put: the put coefficients are bounded, so mass lost to truncation
        // in the right tail costs at most K times that mass instead of e^y times it
        PayoffKind::Call => {
            let put = expansion(&cf, x, a, b, &u, |u| put_coeffs(u, a, b, k))?;
            Ok(put + m.spot * (-m.dividend * t).exp() - k * (-m.rate * t).exp())
        }
        PayoffKind::Put => expansion(&cf, x, a, b, &u, |u| put_coeffs(u, a, b, k)),
        PayoffKind::Digital => expansion(&cf, x, a, b, &u, |u| {
            let c = a.max(0.0);
            if c >= b { vec![0.0; u.len()] } else { psi(u, a, c, b) }
        }),
    }
}

fn put_coeffs(u: &[f64], a: f64, b: f64, k: f64) -> Vec<f64> {
    let d = b.min(0.0);
    if a >= d {
        return vec![0.0; u.len()];
    }
    chi(u, a, a, d).iter().zip(psi(u, a, a, d)).map(|(x, p)| k * (p - x)).collect()
}

/// Call coefficients integrated directly over [max(a, 0), b].
pub fn direct_call_coeffs(u: &[f64], a: f64, b: f64, k: f64) -> Vec<f64> {
    let c = a.max(0.0);
    if c >= b {
        return vec![0.0; u.len()];
    }
    chi(u, a, c, b).iter().zip(psi(u, a, c, b)).map(|(x, p)| k * (x - p)).collect()
}

/// Discounted Σ' Re[φ(u_j) e^{iu_j(x − a)}] V_j · 2/(b − a).
pub fn expansion(
    cf: &LogReturnCf,
    x: f64,
    a: f64,
    b: f64,
    u: &[f64],
    coeffs: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<f64> {
    let mut sum = 0.0;
    for (j, (&uj, v)) in u.iter().zip(coeffs(u)).enumerate() {
        let phase = Complex64::new(0.0, uj * (x - a)).exp();
        let term = (cf.eval(Complex64::new(uj, 0.0))? * phase).re * v;
        sum += if j == 0 { 0.5 * term } else { term };
    }
    Ok((-cf.model.market.rate * cf.t).exp() * 2.0 / (b - a) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{bs_value, DiffusionSpec};
    use crate::model::{GhParams, JumpModel, MarketParams, MeixnerParams, NigParams};
    use proptest::prelude::*;

    fn market() -> MarketParams {
        MarketParams { spot: 100.0, strike: 100.0, rate: 0.05, dividend: 0.0, sigma: 0.15, maturity: 0.01, dt: 0.01 }
    }

    fn nig(beta: f64) -> ModelParams {
        ModelParams { market: market(), jump: JumpModel::Nig(NigParams { alpha: 10.0, beta, delta: 0.2, mu: 0.0 }) }
    }

    fn gh(lambda: f64) -> ModelParams {
        ModelParams {
            market: market(),
            jump: JumpModel::Gh(GhParams { lambda, alpha: 10.0, beta: -5.7, delta: 0.2, mu: 0.0 }),
        }
    }

    fn meixner() -> ModelParams {
        ModelParams { market: market(), jump: JumpModel::Meixner(MeixnerParams { a: 0.04, b: -0.32754, d: 52.0, m: 0.0 }) }
    }

    fn put(k: f64) -> Payoff {
        Payoff { kind: PayoffKind::Put, strike: k }
    }

    #[test]
    fn cf_is_a_martingale_density() {
        for m in [nig(-5.7), nig(5.7), gh(-1.0), gh(1.0), meixner()] {
            let cf = LogReturnCf::new(&m, 0.01).unwrap();
            assert!((cf.eval(Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
            let fwd = cf.eval(Complex64::new(0.0, -1.0)).unwrap();
            assert!((fwd.re - (0.05f64 * 0.01).exp()).abs() < 1e-12, "{fwd}");
        }
    }

    #[test]
    fn cumulants_of_pure_diffusion() {
        // tiny jump part: close to a Gaussian with variance σ²t
        let mut m = nig(0.0);
        m.jump = JumpModel::Nig(NigParams { alpha: 10.0, beta: 0.0, delta: 1e-9, mu: 0.0 });
        let (c1, c2, c4) = LogReturnCf::new(&m, 1.0).unwrap().cumulants().unwrap();
        assert!((c1 - (0.05 - 0.5 * 0.0225)).abs() < 1e-7, "{c1}");
        assert!((c2 - 0.0225).abs() < 1e-6, "{c2}");
        assert!(c4.abs() < 1e-3, "{c4}");
    }

    #[test]
    fn reduces_to_black_scholes() {
        let mut m = nig(0.0);
        m.jump = JumpModel::Nig(NigParams { alpha: 10.0, beta: 0.0, delta: 1e-12, mu: 0.0 });
        let spec = DiffusionSpec::black_scholes(0.05, 0.0, 0.15);
        for kind in [PayoffKind::Call, PayoffKind::Put, PayoffKind::Digital] {
            for t in [0.01, 0.25, 1.0] {
                let p = Payoff { kind, strike: 100.0 };
                let want = bs_value(&spec, &p, 100.0, t);
                let got = cos_price(&m, &p, t, &CosConfig::default()).unwrap();
                assert!((got - want).abs() < 1e-8, "{kind:?} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn reference_prices() {
        let cfg = CosConfig::default();
        let call = Payoff::call(100.0);
        let cases = [(nig(-5.7), 0.757782), (gh(-1.0), 0.73746), (meixner(), 1.0145), (nig(5.7), 0.76773)];
        for (m, want) in cases {
            let got = cos_price(&m, &call, 0.01, &cfg).unwrap();
            assert!((got / want - 1.0).abs() < 1e-2, "{}: {got} vs {want}", m.jump.name());
        }
    }

    #[test]
    fn term_doubling_converges() {
        let call = Payoff::call(100.0);
        for m in [nig(-5.7), nig(5.7), gh(-1.0), gh(1.0), meixner()] {
            let a = cos_price(&m, &call, 0.01, &CosConfig { terms: 256, ..Default::default() }).unwrap();
            let b = cos_price(&m, &call, 0.01, &CosConfig { terms: 512, ..Default::default() }).unwrap();
            assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", m.jump.name());
        }
    }

    #[test]
    fn strip_violation_is_reported() {
        // −φ(−i) needs |β + 1| < α
        let m = ModelParams { market: market(), jump: JumpModel::Nig(NigParams { alpha: 1.0, beta: 0.5, delta: 0.2, mu: 0.0 }) };
        assert!(matches!(cos_price(&m, &Payoff::call(100.0), 0.01, &CosConfig::default()), Err(Error::Domain(_))));
        let cfg = CosConfig { terms: 3, ..Default::default() };
        assert!(cos_price(&nig(-5.7), &Payoff::call(100.0), 0.01, &cfg).is_err());
    }

    #[test]
    fn direct_call_agrees_up_to_tail_mass() {
        let m = nig(-5.7);
        let cf = LogReturnCf::new(&m, 0.01).unwrap();
        let (a, b) = truncation_interval(&cf, &CosConfig::default()).unwrap();
        let u: Vec<f64> = (0..256).map(|j| j as f64 * PI / (b - a)).collect();
        let direct = expansion(&cf, 0.0, a, b, &u, |u| direct_call_coeffs(u, a, b, 100.0)).unwrap();
        let via_put = cos_price(&m, &Payoff::call(100.0), 0.01, &CosConfig::default()).unwrap();
        assert!((direct - via_put).abs() < 1e-3, "{direct} vs {via_put}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn put_call_parity(k in 80.0f64..125.0, beta in -6.0f64..6.0, t in 0.005f64..0.1) {
            let mut m = nig(beta);
            m.market.maturity = t;
            m.market.dt = t;
            let cfg = CosConfig::default();
            let c = cos_price(&m, &Payoff::call(k), t, &cfg).unwrap();
            let p = cos_price(&m, &put(k), t, &cfg).unwrap();
            let want = 100.0 - k * (-0.05 * t).exp();
            prop_assert!((c - p - want).abs() < 1e-8, "{} vs {}", c - p, want);
        }
    }
}
