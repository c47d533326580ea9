//! Gamma, beta and Bessel K0 special functions.
//!
//! Incomplete gamma/beta come from `statrs`; K0 is evaluated from its integral
//! representation since only the order-zero function is needed.

use super::quad::{integrate_with, QuadOptions};
use super::roots::{find_root_with, RootOptions};
use super::Bracket;
use crate::error::{ensure_finite, Error, Result};
use statrs::function::{beta, gamma};

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive and finite, got {x}")))
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check_positive(a, "shape")?;
    if x.is_nan() {
        return Err(Error::NonFinite("gamma_p"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(gamma::gamma_lr(a, x).clamp(0.0, 1.0))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, computed directly.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check_positive(a, "shape")?;
    if x.is_nan() {
        return Err(Error::NonFinite("gamma_q"));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(gamma::gamma_ur(a, x).clamp(0.0, 1.0))
}

/// CDF of the gamma distribution with the given shape and rate.
/// Negative `x` lies outside the support and returns 0.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    check_positive(rate, "rate")?;
    gamma_p(shape, rate * x)
}

pub fn gamma_sf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    check_positive(rate, "rate")?;
    gamma_q(shape, rate * x)
}

/// Inverse of [`gamma_cdf`] in `x`.
pub fn gamma_quantile(p: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    check_positive(shape, "shape")?;
    check_positive(rate, "rate")?;
    // Work on the unit-rate variable; use whichever tail is smaller for accuracy.
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    let resid = |y: f64| {
        if upper {
            target - gamma::gamma_ur(shape, y)
        } else {
            gamma::gamma_lr(shape, y) - target
        }
    };
    let mut hi = shape.max(1.0);
    while resid(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::RootNotConverged { best: hi, iterations: 0 });
        }
    }
    let mut lo = shape.min(1.0);
    while lo > f64::MIN_POSITIVE && resid(lo) > 0.0 {
        lo *= 0.5;
    }
    if resid(lo) > 0.0 {
        return Ok(0.0);
    }
    let opts = RootOptions {
        xtol: 1e-15 * hi,
        ftol: 0.0,
        max_iter: 400,
    };
    let mut y = find_root_with(resid, Bracket { lo, hi }, &opts)?;
    // Newton polish with the gamma density.
    for _ in 0..2 {
        let dens = ((shape - 1.0) * y.ln() - y - ln_gamma(shape)).exp();
        let r = resid(y);
        if dens > 0.0 && r.is_finite() {
            let step = r / dens;
            if step.abs() < 0.1 * y {
                y -= step;
            }
        }
    }
    Ok(y / rate)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    check_positive(a, "a")?;
    check_positive(b, "b")?;
    if x.is_nan() {
        return Err(Error::NonFinite("beta_inc"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    Ok(beta::beta_reg(a, b, x).clamp(0.0, 1.0))
}

/// `e^w K0(w)` from `∫_0^∞ exp(-w (cosh z - 1)) dz`.
pub fn bessel_k0_scaled(w: f64) -> Result<f64> {
    ensure_finite(w, "bessel_k0")?;
    check_positive(w, "Bessel argument")?;
    // Beyond cosh z - 1 = 50/w the integrand is below e^{-50}.
    let zmax = (1.0 + 50.0 / w).acosh();
    let opts = QuadOptions::tol(0.0, 1e-13);
    let mid = (1.0 + 1.0 / w).acosh().min(0.5 * zmax);
    let f = |z: f64| (-w * (z.cosh() - 1.0)).exp();
    let a = integrate_with(f, Bracket { lo: 0.0, hi: mid }, &opts)?;
    let b = integrate_with(f, Bracket { lo: mid, hi: zmax }, &opts)?;
    Ok(a.value + b.value)
}

pub fn bessel_k0(w: f64) -> Result<f64> {
    Ok((-w).exp() * bessel_k0_scaled(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ascending series K0(w) = -(ln(w/2)+γ) I0(w) + Σ (w²/4)^k / (k!)² H_k.
    fn k0_series(w: f64) -> f64 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let q = 0.25 * w * w;
        let mut term = 1.0;
        let mut i0 = 1.0;
        let mut harm = 0.0;
        let mut rest = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= q / (kf * kf);
            harm += 1.0 / kf;
            i0 += term;
            rest += term * harm;
        }
        -((0.5 * w).ln() + EULER) * i0 + rest
    }

    /// Continued fraction for Q(a, x) (Lentz), independent of statrs.
    fn gamma_q_cf(a: f64, x: f64) -> f64 {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }

    #[test]
    fn k0_quadrature_matches_series() {
        for &w in &[0.05, 0.3, 1.0, 1.5, 2.0] {
            let q = bessel_k0(w).unwrap();
            let s = k0_series(w);
            assert!(((q - s) / s).abs() < 1e-9, "w = {w}: {q} vs {s}");
        }
        assert!((bessel_k0(1.0).unwrap() - 0.421_024_44).abs() < 1e-7);
    }

    #[test]
    fn k0_large_argument_asymptotics() {
        let w: f64 = 50.0;
        let asym = (std::f64::consts::PI / (2.0 * w)).sqrt() * (-w).exp();
        let v = bessel_k0(w).unwrap();
        assert!(((v - asym) / asym).abs() < 0.01);
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k0(-1.0).is_err());
        let ks: Vec<f64> = [0.5, 1.0, 2.835, 5.0, 20.0].iter().map(|&w| bessel_k0(w).unwrap()).collect();
        assert!(ks.windows(2).all(|p| p[1] < p[0]));
        assert!((bessel_k0(2.835).unwrap() - k0_series(2.835)).abs() < 1e-9 * ks[2]);
    }

    #[test]
    fn gamma_cdf_values() {
        assert_eq!(gamma_cdf(0.0, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(gamma_cdf(-1.0, 3.0, 1.0).unwrap(), 0.0);
        assert!((gamma_cdf(1.0, 1.0, 1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-14);
        let v = gamma_cdf(1.0, 15.0, 15.0).unwrap();
        assert!((v - (1.0 - gamma_q_cf(15.0, 15.0))).abs() < 1e-12);
        assert!((v - 0.5343).abs() < 1e-3);
        assert!(gamma_cdf(1.0, 0.0, 1.0).is_err());
        assert!(gamma_cdf(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn gamma_quantile_values() {
        assert!((gamma_quantile(0.5, 1.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        let x = gamma_quantile(0.05, 15.0, 1.0).unwrap();
        // independent bisection on the continued-fraction CDF
        let (mut lo, mut hi) = (0.0f64, 50.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if 1.0 - gamma_q_cf(15.0, m) < 0.05 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((x - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!(gamma_quantile(0.0, 1.0, 1.0).is_err());
        assert!(gamma_quantile(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_inc_closed_forms() {
        assert!((beta_inc(1.0, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-14);
        // I_x(2, 1) = x²
        assert!((beta_inc(2.0, 1.0, 0.4).unwrap() - 0.16).abs() < 1e-14);
        assert_eq!(beta_inc(2.0, 3.0, 1.5).unwrap(), 1.0);
    }
}
