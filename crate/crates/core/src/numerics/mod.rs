//! Numerical primitives shared by every other module: normal and gamma
//! functions, Bessel K0, adaptive quadrature, bracketed root finding and
//! finite-difference derivatives.
//!
//! Everything here is a pure function of its inputs.

mod diff;
mod normal;
mod quad;
pub(crate) mod roots;
mod special;

pub use diff::{differentiate, DerivOrder};
pub use normal::{
    norm_cdf, norm_pdf, norm_quantile, norm_sf, std_normal_cdf, std_normal_pdf,
    std_normal_quantile,
};
pub use quad::{integrate, integrate_pieces, integrate_with, QuadOptions, QuadratureResult};
pub use roots::{expand_bracket, find_root, find_root_with, RootOptions};
pub use special::{
    bessel_k0, bessel_k0_scaled, beta_inc, gamma_cdf, gamma_p, gamma_q, gamma_quantile, gamma_sf,
    ln_beta, ln_gamma,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An ordered pair `lo < hi`.
///
/// Parameter spaces are often semi-infinite, so either endpoint may be
/// infinite; operations that need a finite interval (root finding) check
/// [`Bracket::is_finite`] themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::NonFinite("bracket endpoint"));
        }
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bracket requires lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn positive() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub(crate) fn check_interior(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}
