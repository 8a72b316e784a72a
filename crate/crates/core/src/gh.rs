//! Generalized hyperbolic jump step.
//!
//! With `z(∇) = δ√(α² − (β+∇)²)` and `z₀ = z(0)`, one step of the jump equation
//! is `(z/z₀)^{-Δτλ} [K_λ(z)/K_λ(z₀)]^{Δτ}`. Keeping the first two terms of the
//! large-argument expansion `K_λ(z) ≈ √(π/2z) e^{-z} (1 + a₁/z)` gives
//!
//! `B = γ^{Δτ} (Z/z₀)^{-Δτ(λ+½)} e^{Δτ(z₀ − Z)} (I + a₁Z⁻¹)^{Δτ}`, `γ = 1/(1 + a₁/z₀)`.
//!
//! For λ ≥ −½ the power of `Z/z₀` is applied as its own factor `B₁`; for λ < −½
//! it is folded into the exponent, which is only safe for `h` below
//! [`max_step_bound`].

use crate::error::{Error, Result};
use crate::grid::CompositeGrid;
use crate::matfun::{self, DenseMatrix};
use crate::model::GhParams;
use crate::nig::{build_z, Branch};
use crate::special::lambert_wm1;

/// Terms of the large-argument expansion kept at operator level.
pub const BESSEL_KMAX: usize = 1;

/// `a_k(ν) = Π_{j=1..k} (4ν² − (2j−1)²) / (k! 8^k)` for `k = 0..=kmax`.
pub fn bessel_asymp_coeffs(nu: f64, kmax: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(kmax + 1);
    a.push(1.0);
    for k in 1..=kmax {
        let j = (2 * k - 1) as f64;
        a.push(a[k - 1] * (4.0 * nu * nu - j * j) / (8.0 * k as f64));
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhRegime {
    /// λ ≥ −½: `B₁` then `B₂`.
    HighLambda,
    /// λ < −½: a single combined operator.
    LowLambda,
}

#[derive(Debug, Clone)]
pub struct GhOperatorSet {
    pub z: DenseMatrix,
    pub branch: Branch,
    pub regime: GhRegime,
    /// Applied in order: `[B₁, B₂]` or `[B]`. Identity factors are omitted.
    pub factors: Vec<DenseMatrix>,
    pub gamma: f64,
    pub kmax: usize,
}

impl GhOperatorSet {
    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The full step operator as one matrix.
    pub fn combined(&self) -> DenseMatrix {
        let mut acc = matfun::identity(self.len());
        for f in &self.factors {
            acc = f * &acc;
        }
        acc
    }
}

fn z0(p: &GhParams) -> f64 {
    p.delta * (p.alpha * p.alpha - p.beta * p.beta).sqrt()
}

pub fn build_gh_operator(params: &GhParams, grid: &CompositeGrid, dt: f64) -> Result<GhOperatorSet> {
    if !(dt >= 0.0) {
        return Err(Error::domain("jump step needs dt >= 0"));
    }
    let regime = if params.lambda >= -0.5 { GhRegime::HighLambda } else { GhRegime::LowLambda };
    if regime == GhRegime::LowLambda {
        let h_max = max_step_bound(params)?;
        if grid.h > h_max {
            return Err(Error::Stability { h: grid.h, h_max });
        }
    }
    let (z, branch) = build_z(params.alpha, params.beta, params.delta, grid)?;
    let z0 = z0(params);
    let a1 = bessel_asymp_coeffs(params.lambda, BESSEL_KMAX)[1];
    let gamma = 1.0 / (1.0 + a1 / z0);
    let tilt = params.lambda + 0.5;

    let log_ratio = if tilt != 0.0 { Some(matfun::logm(&matfun::scaled(&z, 1.0 / z0))?) } else { None };
    let correction = if a1 != 0.0 {
        let zinv = matfun::inverse(&z)?;
        let base = matfun::shift(&matfun::scaled(&zinv, a1), 1.0);
        Some(matfun::scaled(&matfun::powm(&base, dt)?, gamma.powf(dt)))
    } else {
        None
    };
    // z₀I − Z
    let decay = matfun::shift(&matfun::scaled(&z, -1.0), z0);

    let mut factors = Vec::with_capacity(2);
    let exponent = match (regime, &log_ratio) {
        (GhRegime::HighLambda, Some(l)) => {
            factors.push(matfun::expm(&matfun::scaled(l, -dt * tilt))?);
            decay
        }
        (GhRegime::LowLambda, Some(l)) => matfun::lincomb(1.0, &decay, -tilt, l),
        (_, None) => decay,
    };
    let mut b = matfun::expm(&matfun::scaled(&exponent, dt))?;
    if let Some(c) = &correction {
        b = &b * c;
    }
    factors.push(b);
    Ok(GhOperatorSet { z, branch, regime, factors, gamma, kmax: BESSEL_KMAX })
}

pub fn gh_jump_step(ops: &GhOperatorSet, c_in: &[f64]) -> Result<Vec<f64>> {
    if c_in.len() != ops.len() {
        return Err(Error::Grid(format!("vector of length {} on a grid of {} nodes", c_in.len(), ops.len())));
    }
    let mut c = c_in.to_vec();
    for f in &ops.factors {
        c = matfun::matvec(f, &c);
    }
    Ok(c)
}

/// h-free factor of the leading `1/h` term of the eigenvalues of `Z`, taken at the
/// top of the spectrum. Advisory: the bound is asymptotic.
pub fn leading_eigen_factor(params: &GhParams) -> f64 {
    2.0 * params.delta
}

/// Largest `h` for which the combined low-λ exponent keeps eigenvalues with
/// negative real part, from `Λ̄/h − κ ln(Λ̄/h) > −κ min(b, 0)` with
/// `κ = −(λ+½)` and `b = ln(α²−β²)`. Returns `+∞` when the inequality holds for
/// every `h`.
pub fn max_step_bound(params: &GhParams) -> Result<f64> {
    let kappa = -(params.lambda + 0.5);
    if !(kappa > 0.0) {
        return Err(Error::domain(format!("the step bound applies to lambda < -1/2, got {}", params.lambda)));
    }
    let b = (params.alpha * params.alpha - params.beta * params.beta).ln();
    let arg = if b >= 0.0 { -1.0 / kappa } else { -b.exp() / kappa };
    let e_inv = (-1.0f64).exp();
    if arg < -e_inv {
        return Ok(f64::INFINITY);
    }
    let w = lambert_wm1(arg).ok_or_else(|| Error::domain(format!("Lambert W argument {arg} is off the real branch")))?;
    Ok(-leading_eigen_factor(params) / (kappa * w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{bs_closed_form, DiffusionSpec};
    use crate::matfun::{eigenvalues, max_abs_diff, min_entry, spectral_radius};
    use crate::model::{compensator, JumpModel, Payoff};
    use crate::nig::build_nig_generator;

    const WIDTH: f64 = 13.815510557964274;

    fn gh_params(lambda: f64) -> GhParams {
        GhParams { lambda, alpha: 10.0, beta: -5.7, delta: 0.2, mu: 0.0 }
    }

    fn grid(n: usize) -> CompositeGrid {
        CompositeGrid::uniform(n, WIDTH / (n - 1) as f64, 0.0).unwrap()
    }

    fn price(p: &GhParams, n: usize) -> f64 {
        let g = grid(n);
        let spec = DiffusionSpec {
            drift_adjustment: compensator(&JumpModel::Gh(*p)).unwrap(),
            ..DiffusionSpec::black_scholes(0.05, 0.0, 0.15)
        };
        let c = bs_closed_form(&spec, &Payoff::call(100.0), &g, 0.01);
        let ops = build_gh_operator(p, &g, 0.01).unwrap();
        g.interpolate(&gh_jump_step(&ops, &c).unwrap(), 0.0)
    }

    #[test]
    fn asymptotic_coefficients() {
        for nu in [0.0, 0.3, 1.0, 2.5] {
            let a = bessel_asymp_coeffs(nu, 3);
            assert_eq!(a[0], 1.0);
            assert!((a[1] - (4.0 * nu * nu - 1.0) / 8.0).abs() < 1e-15);
            let direct = (4.0 * nu * nu - 1.0) * (4.0 * nu * nu - 9.0) * (4.0 * nu * nu - 25.0) / (6.0 * 512.0);
            assert!((a[3] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
        assert_eq!(bessel_asymp_coeffs(0.5, 1)[1], 0.0);
        assert_eq!(bessel_asymp_coeffs(1.5, 2)[2], 0.0);
    }

    #[test]
    fn asymptotic_series_tracks_bessel_k() {
        // two-term expansion of e^z K_ν(z) √(2z/π) at large z
        use crate::special::bessel_k_scaled;
        use num_complex::Complex64;
        for nu in [-1.0, 0.0, 1.0] {
            let a = bessel_asymp_coeffs(nu, 2);
            for z in [20.0, 40.0] {
                let exact = bessel_k_scaled(nu, Complex64::new(z, 0.0)).re * (2.0 * z / std::f64::consts::PI).sqrt();
                let approx = a[0] + a[1] / z;
                // the dropped tail is dominated by a₂/z²
                assert!((exact - approx).abs() < 1.5 * a[2].abs() / (z * z), "{nu} {z}: {exact} vs {approx}");
            }
        }
    }

    #[test]
    fn minus_half_is_the_nig_step() {
        let p = gh_params(-0.5);
        let g = grid(129);
        let ops = build_gh_operator(&p, &g, 0.01).unwrap();
        assert_eq!(ops.regime, GhRegime::HighLambda);
        assert_eq!(ops.factors.len(), 1);
        let nig = build_nig_generator(&p.as_nig(), &g).unwrap();
        assert!(max_abs_diff(&ops.combined(), &nig.propagator(0.01).unwrap()) < 1e-12);
    }

    #[test]
    fn regimes_agree_across_minus_half() {
        let hi = price(&gh_params(-0.5 + 1e-6), 201);
        let lo = price(&gh_params(-0.5 - 1e-6), 201);
        assert!((hi - lo).abs() < 1e-3, "{hi} vs {lo}");
    }

    #[test]
    fn high_lambda_first_factor_is_a_contraction() {
        let g = CompositeGrid::uniform(200, 0.0690776, 0.0).unwrap();
        let ops = build_gh_operator(&gh_params(1.0), &g, 0.01).unwrap();
        for z in eigenvalues(&ops.factors[0]).unwrap() {
            assert!(z.re > 0.0 && z.norm() < 1.0, "{z}");
        }
    }

    #[test]
    fn combined_operator_is_nonnegative_and_contracting() {
        for lambda in [-1.0, 1.0] {
            let ops = build_gh_operator(&gh_params(lambda), &grid(129), 0.01).unwrap();
            let b = ops.combined();
            assert!(min_entry(&b) >= -1e-12, "{lambda}: {}", min_entry(&b));
            let rho = spectral_radius(&b).unwrap();
            assert!(rho < 1.0, "{lambda}: {rho}");
        }
    }

    #[test]
    fn constants_keep_their_value_in_the_middle() {
        // symbol at ∇ = 0: γ^Δτ (1 + a₁/z₀)^Δτ = 1
        for lambda in [-1.0, 1.0] {
            let ops = build_gh_operator(&gh_params(lambda), &grid(201), 0.01).unwrap();
            let out = gh_jump_step(&ops, &[2.0; 201]).unwrap();
            for v in &out[80..121] {
                assert!((v - 2.0).abs() < 1e-9, "{lambda}: {v}");
            }
            assert!(gh_jump_step(&ops, &[0.0; 201]).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn skew_sign_transposes_the_operator() {
        let g = grid(61);
        for lambda in [-1.0, 1.0] {
            let a = build_gh_operator(&gh_params(lambda), &g, 0.01).unwrap().combined();
            let b = build_gh_operator(&GhParams { beta: 5.7, ..gh_params(lambda) }, &g, 0.01).unwrap().combined();
            assert!(max_abs_diff(&a, &b.transpose().to_owned()) < 1e-12);
        }
    }

    #[test]
    fn step_bound_cases() {
        let p = |lambda: f64, alpha: f64| GhParams { lambda, alpha, beta: 0.0, delta: 0.2, mu: 0.0 };
        assert!(max_step_bound(&p(0.0, 10.0)).is_err());
        assert_eq!(max_step_bound(&p(-1.5, 10.0)).unwrap(), f64::INFINITY);
        let at_e = max_step_bound(&p(-0.5 - std::f64::consts::E, 10.0)).unwrap();
        let lbar = leading_eigen_factor(&p(0.0, 10.0));
        assert!((at_e - lbar / std::f64::consts::E).abs() < 1e-6 * lbar);
        // b < 0 relaxes the bound: with α² = e^{-1}, κ < e^{b+1} = 1 is unconditional
        assert_eq!(max_step_bound(&p(-1.4, (-0.5f64).exp())).unwrap(), f64::INFINITY);
    }

    #[test]
    fn step_bound_matches_bisection() {
        // largest root y of y − κ ln y = −κ min(b, 0), then h = Λ̄/y
        for (lambda, alpha) in [(-5.5, 10.0), (-8.0, 3.0), (-5.5, 0.8)] {
            let p = GhParams { lambda, alpha, beta: 0.0, delta: 0.2, mu: 0.0 };
            let kappa = -(lambda + 0.5);
            let b: f64 = (alpha * alpha).ln();
            let f = |y: f64| y - kappa * y.ln() + kappa * b.min(0.0);
            let (mut lo, mut hi) = (kappa, 1e6);
            assert!(f(lo) < 0.0 && f(hi) > 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            let want = leading_eigen_factor(&p) / lo;
            let got = max_step_bound(&p).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "{lambda}: {got} vs {want}");
        }
    }

    #[test]
    fn coarse_grid_violates_the_bound() {
        let p = GhParams { lambda: -10.0, alpha: 1.1, beta: 0.0, delta: 0.2, mu: 0.0 };
        let h_max = max_step_bound(&p).unwrap();
        assert!(h_max < 0.069);
        match build_gh_operator(&p, &grid(201), 0.01) {
            Err(Error::Stability { h, h_max: m }) => assert!(h > m),
            other => panic!("{other:?}"),
        }
    }
}
