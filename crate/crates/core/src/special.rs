//! Scalar special functions: the modified Bessel function of the third kind for
//! complex argument and both real branches of the Lambert W function.

use num_complex::Complex64;
use std::f64::consts::E;

/// `e^z K_ν(z)` for `Re z > 0`, from `K_ν(z) = ∫_0^∞ exp(-z cosh t) cosh(νt) dt`.
///
/// The trapezoid rule is exponentially accurate on this integrand; the step
/// shrinks like `|z|^{-1/2}` to follow the peak at `t = 0`.
pub fn bessel_k_scaled(nu: f64, z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "bessel_k_scaled needs Re z > 0, got {z}");
    let dt = (0.25 / z.norm().sqrt()).min(0.02);
    let nu = nu.abs();
    let term = |t: f64| (-z * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * term(0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * dt;
        let f = term(t);
        sum += f;
        // envelope is exp(-Re z (cosh t - 1) + νt); stop once it is far below the sum
        let env = -z.re * (t.cosh() - 1.0) + nu * t;
        if env < -40.0 && f.norm() < 1e-18 * sum.norm() {
            break;
        }
        k += 1;
    }
    sum * dt
}

/// `ln K_ν(z)` on the principal branch.
pub fn ln_bessel_k(nu: f64, z: Complex64) -> Complex64 {
    bessel_k_scaled(nu, z).ln() - z
}

/// Principal branch `W_0(x)`, `x ≥ -1/e`.
pub fn lambert_w0(x: f64) -> Option<f64> {
    let branch = -1.0 / E;
    if !(x >= branch) || !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(0.0);
    }
    let w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    } else if x < 3.0 {
        (1.0 + x).ln() * 0.8
    } else {
        let l = x.ln();
        l - l.ln()
    };
    Some(halley(x, w))
}

/// Lower branch `W_{-1}(x)`, `-1/e ≤ x < 0`.
pub fn lambert_wm1(x: f64) -> Option<f64> {
    let branch = -1.0 / E;
    if !(x >= branch && x < 0.0) {
        return None;
    }
    let w = if x < -0.25 {
        let p = -(2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    } else {
        let l = (-x).ln();
        l - (-l).ln()
    };
    Some(halley(x, w))
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-12 {
            // at the branch point Halley's denominator vanishes; W = -1 there
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn k_half_closed_form() {
        // K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}
        for &(re, im) in &[(0.3, 0.0), (1.64, 0.0), (2.0, 1.5), (5.0, -4.0), (40.0, 3.0), (900.0, 60.0)] {
            let z = Complex64::new(re, im);
            let exact = (PI / (2.0 * z)).sqrt();
            let got = bessel_k_scaled(0.5, z);
            assert!((got - exact).norm() < 1e-13 * exact.norm(), "z={z}: {got} vs {exact}");
        }
    }

    #[test]
    fn k_recurrence() {
        // K_{ν+1}(z) = K_{ν-1}(z) + (2ν/z) K_ν(z)
        for &(re, im) in &[(0.7, 0.2), (1.64, 0.0), (3.0, 2.0), (12.0, -5.0)] {
            let z = Complex64::new(re, im);
            for &nu in &[0.0, 1.0, 1.3] {
                let lhs = bessel_k_scaled(nu + 1.0, z);
                let rhs = bessel_k_scaled(nu - 1.0, z) + 2.0 * nu / z * bessel_k_scaled(nu, z);
                assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
            }
        }
    }

    #[test]
    fn k_real_reference_values() {
        // K_0(1) and K_1(1) to 16 digits
        let k0 = (bessel_k_scaled(0.0, Complex64::new(1.0, 0.0)) * (-1.0f64).exp()).re;
        let k1 = (bessel_k_scaled(1.0, Complex64::new(1.0, 0.0)) * (-1.0f64).exp()).re;
        assert!((k0 - 0.42102443824070834).abs() < 1e-14);
        assert!((k1 - 0.6019072301972346).abs() < 1e-14);
    }

    #[test]
    fn lambert_branches() {
        for &x in &[-0.36, -0.3, -0.2, -0.1, -1e-3, -1e-8] {
            let w = lambert_wm1(x).unwrap();
            assert!(w <= -1.0);
            assert!((w * w.exp() - x).abs() < 1e-14 * x.abs().max(1e-3));
        }
        for &x in &[-0.36, -0.2, 0.0, 0.5, 1.0, 10.0, 1e6] {
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0);
            assert!((w * w.exp() - x).abs() < 1e-13 * x.abs().max(1.0));
        }
        assert!((lambert_w0(1.0).unwrap() - 0.5671432904097838).abs() < 1e-15);
        assert!((lambert_wm1(-1.0 / E).unwrap() + 1.0).abs() < 1e-7);
        assert!(lambert_wm1(-0.5).is_none());
        assert!(lambert_wm1(0.1).is_none());
        assert!(lambert_w0(-0.5).is_none());
    }
}
