//! Second-order asymptotic fiducial distributions.
//!
//! The FD of `Z = √(n/b)(θ - θ̂)` is approximated by
//! `Ψ(z) = Φ(z) - φ(z) g(z) / √n` with `g(z) = b^{3/2} ℓ'''(θ̂) (z² - 1) / 6`.
//! The same machinery, with a model-supplied polynomial, gives the Edgeworth
//! approximation of the standardized MLE `W = √(n/b)(θ̂ - θ)`.

mod condition;
mod likelihood;

pub use condition::{
    nef_condition_statistic, quadratic_variance_check, second_order_condition_check, second_order_condition_mc,
    ConditionReport, ExponentialScore, HyperbolaScore, PoissonScore, ScoreModel, MC_DRAWS, MC_SEED,
};
pub use likelihood::{curvature, jeffreys_posterior, mle_fit, Curvature, LogLikProfile};

use crate::error::{Error, Result};
use crate::fiducial::{FidDistribution, IntervalReport, Source};
use crate::numerics::{find_root_with, norm_cdf, norm_pdf, Bracket, RootOptions};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(vec![0.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// Half-width of the standardized range scanned for turning points; φ
/// underflows beyond it.
const Z_RANGE: f64 = 40.0;
const SCAN_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Turn {
    z: f64,
    value: f64,
}

/// `Ψ(z) = Φ(z) - φ(z) g(z)/√n`, made monotone.
///
/// A truncated Edgeworth series can dip below 0, exceed 1 or decrease in the
/// tails. The monotone version is the running maximum of `Ψ` over `[0, z]` for
/// `z ≥ 0` and the running minimum over `[z, 0]` for `z ≤ 0`, clamped to
/// `[0, 1]`. It coincides with `Ψ` on the monotone range around the centre.
#[derive(Debug, Clone)]
pub struct Expansion {
    g: Poly,
    dg: Poly,
    root_n: f64,
    psi0: f64,
    maxima: Vec<Turn>,
    minima: Vec<Turn>,
    monotone_range: (f64, f64),
}

impl Expansion {
    pub fn new(g: Poly, n: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample size must be >= 1, got {n}")));
        }
        if g.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("correction polynomial"));
        }
        let dg = g.derivative();
        let mut e = Self {
            g,
            dg,
            root_n: n.sqrt(),
            psi0: 0.0,
            maxima: Vec::new(),
            minima: Vec::new(),
            monotone_range: (f64::NEG_INFINITY, f64::INFINITY),
        };
        e.psi0 = e.raw(0.0);
        e.locate_turns()?;
        Ok(e)
    }

    /// `p(z)` with `Ψ'(z) = φ(z) p(z)`.
    fn slope_factor(&self, z: f64) -> f64 {
        1.0 + (z * self.g.eval(z) - self.dg.eval(z)) / self.root_n
    }

    fn locate_turns(&mut self) -> Result<()> {
        let steps = (2.0 * Z_RANGE / SCAN_STEP) as usize;
        let mut prev_z = -Z_RANGE;
        let mut prev = self.slope_factor(prev_z);
        let opts = RootOptions {
            xtol: 1e-14,
            ftol: 0.0,
            max_iter: 200,
        };
        for i in 1..=steps {
            let z = -Z_RANGE + SCAN_STEP * i as f64;
            let cur = self.slope_factor(z);
            if prev != 0.0 && (cur == 0.0 || cur.signum() != prev.signum()) {
                let root = if cur == 0.0 {
                    z
                } else {
                    find_root_with(|t| self.slope_factor(t), Bracket { lo: prev_z, hi: z }, &opts)?
                };
                let turn = Turn {
                    z: root,
                    value: self.raw(root),
                };
                if prev > 0.0 {
                    self.maxima.push(turn);
                } else {
                    self.minima.push(turn);
                }
            }
            prev_z = z;
            if cur != 0.0 {
                prev = cur;
            }
        }
        let upper = self.maxima.iter().map(|t| t.z).filter(|&z| z >= 0.0).fold(f64::INFINITY, f64::min);
        let lower = self.minima.iter().map(|t| t.z).filter(|&z| z <= 0.0).fold(f64::NEG_INFINITY, f64::max);
        self.monotone_range = (lower, upper);
        Ok(())
    }

    pub fn correction(&self) -> &Poly {
        &self.g
    }

    /// The uncorrected series value.
    pub fn raw(&self, z: f64) -> f64 {
        norm_cdf(z) - norm_pdf(z) * self.g.eval(z) / self.root_n
    }

    pub fn raw_density(&self, z: f64) -> f64 {
        norm_pdf(z) * self.slope_factor(z)
    }

    fn envelope(&self, z: f64) -> f64 {
        let r = self.raw(z);
        if z >= 0.0 {
            self.maxima
                .iter()
                .filter(|t| t.z > 0.0 && t.z < z)
                .fold(r.max(self.psi0), |m, t| m.max(t.value))
        } else {
            self.minima
                .iter()
                .filter(|t| t.z < 0.0 && t.z > z)
                .fold(r.min(self.psi0), |m, t| m.min(t.value))
        }
    }

    /// Monotone distribution function in `z`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        self.envelope(z).clamp(0.0, 1.0)
    }

    /// Derivative of [`Expansion::cdf`]; zero on flat stretches.
    pub fn density(&self, z: f64) -> f64 {
        let e = self.envelope(z);
        if e <= 0.0 || e >= 1.0 || e != self.raw(z) {
            0.0
        } else {
            self.raw_density(z).max(0.0)
        }
    }

    /// Largest interval around 0 on which `Ψ` itself is nondecreasing.
    pub fn monotone_range(&self) -> (f64, f64) {
        self.monotone_range
    }

    /// Largest interval around 0 on which the monotone version equals `Ψ` and
    /// lies strictly inside (0, 1).
    pub fn faithful_range(&self) -> (f64, f64) {
        let (mut lo, mut hi) = self.monotone_range;
        let opts = RootOptions::default();
        if lo.is_finite() && self.raw(lo) < 0.0 {
            lo = find_root_with(|z| self.raw(z), Bracket { lo, hi: 0.0 }, &opts).unwrap_or(lo);
        }
        if hi.is_finite() && self.raw(hi) > 1.0 {
            hi = find_root_with(|z| self.raw(z) - 1.0, Bracket { lo: 0.0, hi }, &opts).unwrap_or(hi);
        }
        (lo, hi)
    }

    pub fn describe(&self) -> String {
        let (lo, hi) = self.faithful_range();
        if lo.is_infinite() && hi.is_infinite() {
            "expansion is monotone on the whole line".to_string()
        } else {
            format!("expansion monotonized outside z in ({lo:.4}, {hi:.4})")
        }
    }
}

/// Standardized quantile of an expansion, for `p` in `(0.001, 0.999)`.
pub fn expansion_quantile(expansion: &Expansion, p: f64) -> Result<f64> {
    if !(p > 0.001 && p < 0.999) {
        return Err(Error::InvalidArgument(format!(
            "expansion quantiles are limited to p in (0.001, 0.999), got {p}"
        )));
    }
    let opts = RootOptions {
        xtol: 1e-13,
        ftol: 1e-13,
        max_iter: 300,
    };
    find_root_with(|z| expansion.cdf(z) - p, Bracket { lo: -Z_RANGE, hi: Z_RANGE }, &opts)
}

/// Inputs of the FD expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSpec {
    pub theta_hat: f64,
    pub n: usize,
    pub b: f64,
    pub ell3: f64,
    pub correction: Poly,
}

impl ExpansionSpec {
    /// `g(z) = b^{3/2} ℓ''' (z² - 1) / 6`.
    pub fn fd(theta_hat: f64, n: usize, b: f64, ell3: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("expansion needs n >= 2, got {n}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("b must be positive, got {b}")));
        }
        if !theta_hat.is_finite() || !ell3.is_finite() {
            return Err(Error::NonFinite("expansion inputs"));
        }
        let c = b.powf(1.5) * ell3 / 6.0;
        Ok(Self {
            theta_hat,
            n,
            b,
            ell3,
            correction: Poly(vec![-c, 0.0, c]),
        })
    }

    pub fn from_profile(profile: &LogLikProfile, n: usize) -> Result<Self> {
        let c = curvature(profile)?;
        Self::fd(profile.theta_hat, n, c.b, c.ell3)
    }

    /// `√(b/n)`, the θ-length of one standardized unit.
    pub fn unit(&self) -> f64 {
        (self.b / self.n as f64).sqrt()
    }

    pub fn expansion(&self) -> Result<Expansion> {
        Expansion::new(self.correction.clone(), self.n as f64)
    }
}

/// FD of θ from the expansion, `H(θ) = Ψ(√(n/b)(θ - θ̂))`.
pub fn fd_expansion(spec: &ExpansionSpec) -> Result<FidDistribution> {
    fd_expansion_with(spec, Arc::new(spec.expansion()?))
}

/// As [`fd_expansion`], reusing a precomputed standardized expansion.
pub fn fd_expansion_with(spec: &ExpansionSpec, expansion: Arc<Expansion>) -> Result<FidDistribution> {
    let th = spec.theta_hat;
    let unit = spec.unit();
    let note = expansion.describe();
    let source = if spec.ell3 == 0.0 {
        Source::AsymptoticNormal
    } else {
        Source::Expansion
    };
    let e1 = Arc::clone(&expansion);
    let fd = FidDistribution::new(move |t| e1.cdf((t - th) / unit), Bracket::real_line(), th, unit, source)?;
    Ok(fd.with_density(move |t| expansion.density((t - th) / unit) / unit).with_note(note))
}

/// Edgeworth approximation of `W = √(n/b)(θ̂ - θ)`:
/// `Pr(W ≤ w) ≈ Φ(w) - φ(w) g_mle(w)/√n`.
#[derive(Debug, Clone)]
pub struct MleExpansion {
    pub theta_hat: f64,
    pub n: usize,
    pub b: f64,
    expansion: Arc<Expansion>,
}

pub fn mle_expansion(theta_hat: f64, n: usize, b: f64, g_mle: Poly) -> Result<MleExpansion> {
    if n < 2 || !(b > 0.0 && b.is_finite()) || !theta_hat.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "MLE expansion needs n >= 2, b > 0 and finite theta_hat, got ({n}, {b}, {theta_hat})"
        )));
    }
    Ok(MleExpansion {
        theta_hat,
        n,
        b,
        expansion: Arc::new(Expansion::new(g_mle, n as f64)?),
    })
}

impl MleExpansion {
    pub fn with_expansion(theta_hat: f64, n: usize, b: f64, expansion: Arc<Expansion>) -> Self {
        Self {
            theta_hat,
            n,
            b,
            expansion,
        }
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }

    fn unit(&self) -> f64 {
        (self.b / self.n as f64).sqrt()
    }

    /// Equal-tail interval: `θ = θ̂ - √(b/n) w` at the `(1 ± level)/2` quantiles of `W`.
    pub fn interval(&self, level: f64) -> Result<IntervalReport> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
        }
        let w_lo = expansion_quantile(&self.expansion, 0.5 * (1.0 - level))?;
        let w_hi = expansion_quantile(&self.expansion, 0.5 * (1.0 + level))?;
        let lower = self.theta_hat - self.unit() * w_hi;
        let upper = self.theta_hat - self.unit() * w_lo;
        Ok(IntervalReport {
            level,
            lower,
            upper,
            length: upper - lower,
        })
    }

    /// Confidence distribution induced on θ: `H(θ) = 1 - Pr(W ≤ √(n/b)(θ̂ - θ))`.
    pub fn fd(&self) -> Result<FidDistribution> {
        let th = self.theta_hat;
        let unit = self.unit();
        let e1 = Arc::clone(&self.expansion);
        let e2 = Arc::clone(&self.expansion);
        let fd = FidDistribution::new(move |t| 1.0 - e1.cdf((th - t) / unit), Bracket::real_line(), th, unit, Source::Expansion)?;
        Ok(fd.with_density(move |t| e2.density((th - t) / unit) / unit).with_note(self.expansion.describe()))
    }
}

/// Verified MLE-expansion polynomials per built-in model. There is no generic
/// fallback: the general form needs model expectations at the true parameter.
pub fn mle_polynomial(model: &str) -> Result<Poly> {
    match model {
        // W = √n (μ̂ - μ)/μ̂ for the exponential mean.
        "exponential" => Ok(Poly(vec![-1.0 / 3.0, 0.0, -2.0 / 3.0])),
        other => Err(Error::Unsupported(format!("no MLE expansion polynomial for model '{other}'"))),
    }
}
