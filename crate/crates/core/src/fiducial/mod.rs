//! Real-parameter fiducial / confidence distributions.
//!
//! A [`FidDistribution`] is a distribution function over the parameter plus a
//! few hints (centre and scale) used to bracket quantiles. It is built either by
//! inverting a sampling model ([`fd_from_family`]), from an approximation
//! (expansions, p*), or from an unnormalized log density ([`FidDistribution::from_log_density`]).

mod family;
mod pivot;
mod tabulated;

pub use family::{fd_from_family, Binomial, Direction, GammaMean, NormalMean, ParamFamily};
pub use pivot::{kolmogorov_pvalue, ks_statistic, pivotal_uniformity_check, KsReport};

use crate::error::{Error, Result};
use crate::numerics::{differentiate, norm_cdf, norm_pdf, roots::probe_point, Bracket, DerivOrder};
use crate::numerics::{find_root_with, RootOptions};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use tabulated::Tabulated;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Probability left outside the numeric support on each side.
pub const SUPPORT_TAIL: f64 = 1e-6;
const MONOTONE_PROBES: usize = 64;
const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Exact,
    Expansion,
    PStar,
    AsymptoticNormal,
    Posterior,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::Exact => "exact",
            Source::Expansion => "expansion",
            Source::PStar => "p*",
            Source::AsymptoticNormal => "asymptotic-normal",
            Source::Posterior => "posterior",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub length: f64,
}

#[derive(Clone)]
pub struct FidDistribution {
    cdf: RealFn,
    density: Option<RealFn>,
    domain: Bracket,
    support: Bracket,
    center: f64,
    scale: f64,
    source: Source,
    notes: Vec<String>,
}

impl fmt::Debug for FidDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FidDistribution")
            .field("domain", &self.domain)
            .field("support", &self.support)
            .field("source", &self.source)
            .field("notes", &self.notes)
            .finish_non_exhaustive()
    }
}

impl FidDistribution {
    /// Wrap a distribution function. `center` must be interior to `domain` and
    /// `scale` is a rough spread; both only steer the numeric support search.
    ///
    /// Fails if the CDF does not reach `1e-6` / `1 - 1e-6` inside the domain or
    /// decreases anywhere on a 64-point probe grid across the support.
    pub fn new<F>(cdf: F, domain: Bracket, center: f64, scale: f64, source: Source) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_arc(Arc::new(cdf), domain, center, scale, source)
    }

    pub fn from_arc(cdf: RealFn, domain: Bracket, center: f64, scale: f64, source: Source) -> Result<Self> {
        domain.check_interior(center)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        let lo = search_tail(&*cdf, center, scale, domain.lo, |v| v <= SUPPORT_TAIL)
            .ok_or_else(|| Error::Improper(format!("distribution function stays above {SUPPORT_TAIL} towards {}", domain.lo)))?;
        let hi = search_tail(&*cdf, center, scale, domain.hi, |v| v >= 1.0 - SUPPORT_TAIL)
            .ok_or_else(|| Error::Improper(format!("distribution function stays below 1 - {SUPPORT_TAIL} towards {}", domain.hi)))?;
        let support = Bracket::new(lo, hi)?;
        let fd = Self {
            cdf,
            density: None,
            domain,
            support,
            center,
            scale,
            source,
            notes: Vec::new(),
        };
        fd.check_monotone()?;
        Ok(fd)
    }

    /// `N(mean, sd²)` on the real line.
    pub fn normal(mean: f64, sd: f64, source: Source) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidArgument(format!("normal FD needs finite mean and sd > 0, got ({mean}, {sd})")));
        }
        Ok(Self::new(move |t| norm_cdf((t - mean) / sd), Bracket::real_line(), mean, sd, source)?
            .with_density(move |t| norm_pdf((t - mean) / sd) / sd))
    }

    /// Normalize `exp(log_density)` over `domain` by adaptive quadrature.
    /// Divergent normalization is reported as [`Error::Improper`].
    pub fn from_log_density<F>(
        log_density: F,
        domain: Bracket,
        center: f64,
        scale: f64,
        source: Source,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let tab = Arc::new(Tabulated::build(Arc::new(log_density), domain, center, scale)?);
        let t1 = Arc::clone(&tab);
        let t2 = Arc::clone(&tab);
        let mode = tab.mode();
        Ok(Self::new(move |x| t1.cdf(x), domain, mode, scale, source)?.with_density(move |x| t2.density(x)))
    }

    pub fn with_density<F>(mut self, density: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.density = Some(Arc::new(density));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    fn check_monotone(&self) -> Result<()> {
        let Bracket { lo, hi } = self.support;
        let step = (hi - lo) / (MONOTONE_PROBES - 1) as f64;
        let mut prev_t = lo;
        let mut prev = self.cdf_raw(lo);
        for i in 1..MONOTONE_PROBES {
            let t = if i == MONOTONE_PROBES - 1 { hi } else { lo + step * i as f64 };
            let v = self.cdf_raw(t);
            if v.is_nan() {
                return Err(Error::NonFinite("distribution function on probe grid"));
            }
            if v < prev - MONOTONE_SLACK {
                return Err(Error::NonMonotone { a: prev_t, b: t });
            }
            prev_t = t;
            prev = v;
        }
        Ok(())
    }

    fn cdf_raw(&self, theta: f64) -> f64 {
        (self.cdf)(theta)
    }

    /// Distribution function; 0 at or below the domain, 1 at or above it.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= self.domain.lo {
            0.0
        } else if theta >= self.domain.hi {
            1.0
        } else {
            self.cdf_raw(theta).clamp(0.0, 1.0)
        }
    }

    /// Fiducial density; analytic when the constructor supplied one, otherwise a
    /// Richardson-extrapolated central difference of the CDF.
    pub fn density(&self, theta: f64) -> Result<f64> {
        self.domain.check_interior(theta)?;
        if let Some(d) = &self.density {
            let v = d(theta);
            return if v.is_finite() { Ok(v.max(0.0)) } else { Err(Error::NonFinite("density")) };
        }
        // The stencil reaches about 0.025 scale units; keep it inside the domain.
        let room = (theta - self.domain.lo).min(self.domain.hi - theta);
        let h = self.scale.min(30.0 * room);
        let d = differentiate(|t| self.cdf_raw(t), theta, DerivOrder::First, h)?;
        Ok(d.max(0.0))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
        }
        let bracket = self.bracket_for(p)?;
        let opts = RootOptions {
            xtol: 1e-14 * bracket.width().max(self.scale),
            ftol: 1e-12,
            max_iter: 300,
        };
        find_root_with(|t| self.cdf_raw(t) - p, bracket, &opts)
    }

    fn bracket_for(&self, p: f64) -> Result<Bracket> {
        let mut lo = self.support.lo;
        let mut hi = self.support.hi;
        let mut k = 0;
        while self.cdf_raw(lo) > p {
            k += 1;
            lo = probe_point(self.support.lo, -self.scale * 2f64.powi(k), self.domain.lo);
            if k > 1100 || !self.domain.contains(lo) {
                return Err(Error::Improper(format!("cannot bracket the {p} quantile from below")));
            }
        }
        k = 0;
        while self.cdf_raw(hi) < p {
            k += 1;
            hi = probe_point(self.support.hi, self.scale * 2f64.powi(k), self.domain.hi);
            if k > 1100 || !self.domain.contains(hi) {
                return Err(Error::Improper(format!("cannot bracket the {p} quantile from above")));
            }
        }
        Bracket::new(lo, hi)
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Equal-tail interval `[q((1-level)/2), q((1+level)/2)]`.
    pub fn interval(&self, level: f64) -> Result<IntervalReport> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
        }
        let lower = self.quantile(0.5 * (1.0 - level))?;
        let upper = self.quantile(0.5 * (1.0 + level))?.max(lower);
        Ok(IntervalReport {
            level,
            lower,
            upper,
            length: upper - lower,
        })
    }

    /// `|1 - 2 H(θ)|`.
    pub fn confidence_curve(&self, theta: f64) -> Result<f64> {
        if theta.is_nan() || theta < self.domain.lo || theta > self.domain.hi {
            return Err(Error::OutOfDomain {
                value: theta,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok((1.0 - 2.0 * self.cdf(theta)).abs())
    }

    pub fn domain(&self) -> Bracket {
        self.domain
    }

    /// Interval carrying all but `1e-6` of the mass in each tail.
    pub fn support(&self) -> Bracket {
        self.support
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn has_analytic_density(&self) -> bool {
        self.density.is_some()
    }
}

/// Walk from `start` towards `bound` with doubling steps until `done(cdf)`.
fn search_tail(cdf: &dyn Fn(f64) -> f64, start: f64, scale: f64, bound: f64, done: impl Fn(f64) -> bool) -> Option<f64> {
    let dir = if bound > start { 1.0 } else { -1.0 };
    let mut dist = scale;
    for _ in 0..1100 {
        let x = probe_point(start, dir * dist, bound);
        if x == bound {
            return None;
        }
        let v = cdf(x);
        if done(v) {
            return Some(x);
        }
        dist *= 2.0;
    }
    None
}

/// Largest absolute difference between two CDFs on an evenly spaced grid.
pub fn sup_cdf_distance(a: &dyn Fn(f64) -> f64, b: &dyn Fn(f64) -> f64, range: Bracket, points: usize) -> f64 {
    let points = points.max(2);
    let step = range.width() / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = range.lo + step * i as f64;
            (a(t) - b(t)).abs()
        })
        .fold(0.0, f64::max)
}
