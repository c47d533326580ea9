use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    First = 1,
    Second = 2,
    Third = 3,
}

impl TryFrom<u32> for DerivOrder {
    type Error = Error;
    fn try_from(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            3 => Ok(Self::Third),
            _ => Err(Error::InvalidArgument(format!(
                "derivative order must be 1, 2 or 3, got {k}"
            ))),
        }
    }
}

fn stencil<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64, order: DerivOrder) -> f64 {
    match order {
        DerivOrder::First => (f(x + h) - f(x - h)) / (2.0 * h),
        DerivOrder::Second => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        DerivOrder::Third => {
            (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h)
        }
    }
}

/// Central finite difference of order 1–3 at `x`, with two levels of
/// Richardson extrapolation over steps `h, 2h, 4h`.
///
/// `scale` is the length over which `f` changes appreciably (e.g. a standard
/// error); the base step is `scale · eps^{1/(order+6)}`, which balances the
/// O(h⁶) truncation left after extrapolation against rounding.
pub fn differentiate<F: Fn(f64) -> f64>(f: F, x: f64, order: DerivOrder, scale: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("differentiate: x"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step scale must be positive, got {scale}"
        )));
    }
    let k = order as i32;
    let h = scale * f64::EPSILON.powf(1.0 / (k + 6) as f64);
    if x + h == x || x - h == x || !(h > 0.0) {
        return Err(Error::StepUnderflow { x, scale });
    }
    let d1 = stencil(&f, x, h, order);
    let d2 = stencil(&f, x, 2.0 * h, order);
    let d4 = stencil(&f, x, 4.0 * h, order);
    // Error terms go like h², h⁴, ...
    let r1 = (4.0 * d1 - d2) / 3.0;
    let r2 = (4.0 * d2 - d4) / 3.0;
    let value = (16.0 * r1 - r2) / 15.0;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("differentiate: function value"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DerivOrder::*;

    #[test]
    fn exp_at_zero() {
        for o in [First, Second, Third] {
            let d = differentiate(f64::exp, 0.0, o, 1.0).unwrap();
            assert!((d - 1.0).abs() < 1e-5, "{o:?}: {d}");
        }
    }

    #[test]
    fn exponential_loglik_third_derivative() {
        let mu_hat = 1.0;
        let l = |mu: f64| -mu_hat / mu - mu.ln();
        let d3 = differentiate(l, mu_hat, Third, 0.2).unwrap();
        assert!((d3 - 4.0).abs() < 1e-3, "{d3}");
        let d2 = differentiate(l, mu_hat, Second, 0.2).unwrap();
        assert!((d2 + 1.0).abs() < 1e-6);
    }

    #[test]
    fn hyperbola_third_derivative_vanishes() {
        let (s1, s2, n) = (17.321_f64, 0.116_f64, 5.0);
        let eta_hat = 0.5 * (s1 / s2).ln();
        let l = |e: f64| -((-e).exp() * s1 + e.exp() * s2) / n;
        let d3 = differentiate(l, eta_hat, Third, 1.0).unwrap();
        assert!(d3.abs() < 1e-6, "{d3}");
    }

    #[test]
    fn polynomial_degree_five() {
        let p = |x: f64| 0.3 - 1.2 * x + 0.7 * x.powi(2) + 2.0 * x.powi(3) - 0.5 * x.powi(4) + 0.1 * x.powi(5);
        let dp = |x: f64| -1.2 + 1.4 * x + 6.0 * x.powi(2) - 2.0 * x.powi(3) + 0.5 * x.powi(4);
        let ddp = |x: f64| 1.4 + 12.0 * x - 6.0 * x.powi(2) + 2.0 * x.powi(3);
        for &x in &[-1.5, -0.2, 0.0, 0.9, 2.0] {
            let d1 = differentiate(p, x, First, 1.0).unwrap();
            let d2 = differentiate(p, x, Second, 1.0).unwrap();
            assert!((d1 - dp(x)).abs() <= 1e-9 * dp(x).abs().max(1.0), "x={x}: {d1}");
            assert!((d2 - ddp(x)).abs() <= 1e-9 * ddp(x).abs().max(1.0), "x={x}: {d2}");
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            differentiate(f64::sin, 1e300, First, 1e-300),
            Err(Error::StepUnderflow { .. })
        ));
        assert!(differentiate(f64::sin, 0.0, First, 0.0).is_err());
        assert!(DerivOrder::try_from(4).is_err());
    }
}
