//! Gamma hyperbola: `X_i ~ Exp(mean e^η)`, `Y_i ~ Exp(mean e^{-η})`, with
//! sufficient statistics `S1 = ΣX`, `S2 = ΣY` and ancillary `A = √(S1 S2)/n`.

use super::PStarModel;
use crate::error::{Error, Result};
use crate::fiducial::{FidDistribution, Source};
use crate::numerics::{bessel_k0_scaled, integrate_with, Bracket, QuadOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaData {
    pub n: usize,
    pub s1: f64,
    pub s2: f64,
}

impl HyperbolaData {
    pub fn new(n: usize, s1: f64, s2: f64) -> Result<Self> {
        if n == 0 || !(s1 > 0.0 && s1.is_finite()) || !(s2 > 0.0 && s2.is_finite()) {
            return Err(Error::InvalidArgument(format!("hyperbola needs n >= 1 and s1, s2 > 0, got ({n}, {s1}, {s2})")));
        }
        Ok(Self { n, s1, s2 })
    }

    /// Data with given `n`, ancillary `a` and MLE `eta_hat`.
    pub fn from_ancillary(n: usize, a: f64, eta_hat: f64) -> Result<Self> {
        let na = n as f64 * a;
        Self::new(n, na * eta_hat.exp(), na * (-eta_hat).exp())
    }

    pub fn a(&self) -> f64 {
        (self.s1 * self.s2).sqrt() / self.n as f64
    }

    pub fn eta_hat(&self) -> f64 {
        0.5 * (self.s1 / self.s2).ln()
    }

    /// `2na = 2√(S1 S2)`, the argument of K0.
    pub fn w(&self) -> f64 {
        2.0 * (self.s1 * self.s2).sqrt()
    }

    /// `b = -1/ℓ''(η̂)` for the per-observation log-likelihood.
    pub fn b(&self) -> f64 {
        self.n as f64 / self.w()
    }

    /// Per-observation log-likelihood `-(e^{-η} S1 + e^{η} S2)/n`.
    pub fn log_lik_unit(&self, eta: f64) -> f64 {
        -((-eta).exp() * self.s1 + eta.exp() * self.s2) / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolaPStar {
    na: f64,
    eta_hat: f64,
}

impl HyperbolaPStar {
    pub fn new(data: &HyperbolaData) -> Self {
        Self {
            na: data.n as f64 * data.a(),
            eta_hat: data.eta_hat(),
        }
    }
}

impl PStarModel for HyperbolaPStar {
    fn name(&self) -> &str {
        "hyperbola"
    }
    fn log_lik(&self, eta: f64, t: f64) -> f64 {
        -2.0 * self.na * (t - eta).cosh()
    }
    fn obs_info(&self, _t: f64) -> f64 {
        2.0 * self.na
    }
    fn theta_hat(&self) -> f64 {
        self.eta_hat
    }
    fn theta_domain(&self) -> Bracket {
        Bracket::real_line()
    }
    fn mle_domain(&self) -> Bracket {
        Bracket::real_line()
    }
}

/// Exact FD with density `exp{-w cosh(η̂ - η)} / (2 K0(w))`, `w = 2na`.
pub fn hyperbola_exact_fd(data: &HyperbolaData) -> Result<FidDistribution> {
    let w = data.w();
    let eta_hat = data.eta_hat();
    // Work with e^{w} K0(w) and e^{-w(cosh u - 1)} to avoid underflow.
    let k0s = bessel_k0_scaled(w)?;
    let scale = 1.0 / w.sqrt();
    let opts = QuadOptions::tol(0.0, 1e-12).with_tail_scale(scale);
    let tail = move |c: f64| {
        integrate_with(|v: f64| (-w * (v.cosh() - 1.0)).exp(), Bracket { lo: c, hi: f64::INFINITY }, &opts)
            .map(|r| r.value / (2.0 * k0s))
            .unwrap_or(f64::NAN)
    };
    let cdf = move |eta: f64| {
        let u = eta - eta_hat;
        if u <= 0.0 {
            tail(-u)
        } else {
            1.0 - tail(u)
        }
    };
    let fd = FidDistribution::new(cdf, Bracket::real_line(), eta_hat, scale, Source::Exact)?;
    Ok(fd.with_density(move |eta: f64| (-w * ((eta_hat - eta).cosh() - 1.0)).exp() / (2.0 * k0s)))
}
