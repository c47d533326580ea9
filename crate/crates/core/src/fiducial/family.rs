use super::{FidDistribution, Source};
use crate::error::{Error, Result};
use crate::numerics::{beta_inc, gamma_p, gamma_q, ln_beta, ln_gamma, norm_cdf, norm_pdf, norm_sf, Bracket};
use crate::rng::Stream;
use rand_distr::{Binomial as BinomialDist, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

/// How `F_θ(s)` moves with `θ` for fixed `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Decreasing,
    Increasing,
}

/// A one-parameter sampling model for a real statistic `S`.
pub trait ParamFamily: Send + Sync {
    fn name(&self) -> &str;

    /// `F_θ(s) = Pr_θ(S ≤ s)`.
    fn cdf(&self, theta: f64, s: f64) -> f64;

    /// `Pr_θ(S > s)`; override when `1 - cdf` loses precision.
    fn sf(&self, theta: f64, s: f64) -> f64 {
        1.0 - self.cdf(theta, s)
    }

    fn log_density(&self, theta: f64, s: f64) -> f64;
    fn theta_domain(&self) -> Bracket;
    fn sample_domain(&self) -> Bracket;
    fn direction(&self) -> Direction;

    /// Typical parameter value for data `s` (usually the MLE) and spread,
    /// used to start bracket searches.
    fn theta_center(&self, s: f64) -> f64;
    fn theta_scale(&self, s: f64) -> f64;

    /// `|∂F_θ(s)/∂θ|` in closed form, if available.
    fn fd_density(&self, _theta: f64, _s: f64) -> Option<f64> {
        None
    }

    /// Draw `S` at `θ`; `None` if the family has no sampler.
    fn sample_statistic(&self, _theta: f64, _rng: &mut Stream) -> Option<f64> {
        None
    }

    fn is_discrete(&self) -> bool {
        false
    }
}

/// Fiducial distribution `H_s(θ)`: `1 - F_θ(s)` when `F` decreases in `θ`,
/// `F_θ(s)` when it increases. Discrete families use `Pr_θ(S > s)` as is.
pub fn fd_from_family<F>(family: &F, s: f64) -> Result<FidDistribution>
where
    F: ParamFamily + Clone + 'static,
{
    family.sample_domain().check_interior(s).or_else(|e| {
        // Closed sample spaces (counts) include their endpoints.
        let d = family.sample_domain();
        if family.is_discrete() && (s == d.lo || s == d.hi) {
            Ok(())
        } else {
            Err(e)
        }
    })?;
    let fam = family.clone();
    let dir = family.direction();
    let cdf = move |theta: f64| match dir {
        Direction::Decreasing => fam.sf(theta, s),
        Direction::Increasing => fam.cdf(theta, s),
    };
    let domain = family.theta_domain();
    let center = family.theta_center(s);
    let scale = family.theta_scale(s);
    let mut fd = FidDistribution::new(cdf, domain, center, scale, Source::Exact)?
        .with_note(format!("{} family, s = {s}", family.name()));
    if family.fd_density(center, s).is_some() {
        let fam = family.clone();
        fd = fd.with_density(move |theta| fam.fd_density(theta, s).unwrap_or(f64::NAN));
    }
    Ok(fd)
}

/// Sample mean of `shape` i.i.d. exponentials with mean `θ`:
/// `S ~ Gamma(shape, rate = shape/θ)`. Its FD is inverse-gamma(shape, shape·s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMean {
    pub shape: f64,
}

impl GammaMean {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma shape must be positive, got {shape}")));
        }
        Ok(Self { shape })
    }

    pub fn exponential_sample_mean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        Self::new(n as f64)
    }
}

impl ParamFamily for GammaMean {
    fn name(&self) -> &str {
        "gamma-mean"
    }

    fn cdf(&self, theta: f64, s: f64) -> f64 {
        gamma_p(self.shape, self.shape * s / theta).unwrap_or(f64::NAN)
    }

    fn sf(&self, theta: f64, s: f64) -> f64 {
        gamma_q(self.shape, self.shape * s / theta).unwrap_or(f64::NAN)
    }

    fn log_density(&self, theta: f64, s: f64) -> f64 {
        let k = self.shape;
        let rate = k / theta;
        k * rate.ln() + (k - 1.0) * s.ln() - rate * s - ln_gamma(k)
    }

    fn theta_domain(&self) -> Bracket {
        Bracket::positive()
    }

    fn sample_domain(&self) -> Bracket {
        Bracket::positive()
    }

    fn direction(&self) -> Direction {
        Direction::Decreasing
    }

    fn theta_center(&self, s: f64) -> f64 {
        s
    }

    fn theta_scale(&self, s: f64) -> f64 {
        s / self.shape.sqrt()
    }

    fn fd_density(&self, theta: f64, s: f64) -> Option<f64> {
        // Inverse-gamma(k, k s) density.
        let k = self.shape;
        let beta = k * s;
        if theta <= 0.0 {
            return Some(0.0);
        }
        Some((k * beta.ln() - ln_gamma(k) - (k + 1.0) * theta.ln() - beta / theta).exp())
    }

    fn sample_statistic(&self, theta: f64, rng: &mut Stream) -> Option<f64> {
        Gamma::new(self.shape, theta / self.shape).ok().map(|g| g.sample(rng))
    }
}

/// Mean of `n` normals with known `sigma`: `S ~ N(θ, σ²/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMean {
    pub n: usize,
    pub sigma: f64,
}

impl NormalMean {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("need n >= 1 and sigma > 0, got ({n}, {sigma})")));
        }
        Ok(Self { n, sigma })
    }

    fn se(&self) -> f64 {
        self.sigma / (self.n as f64).sqrt()
    }
}

impl ParamFamily for NormalMean {
    fn name(&self) -> &str {
        "normal-mean"
    }

    fn cdf(&self, theta: f64, s: f64) -> f64 {
        norm_cdf((s - theta) / self.se())
    }

    fn sf(&self, theta: f64, s: f64) -> f64 {
        norm_sf((s - theta) / self.se())
    }

    fn log_density(&self, theta: f64, s: f64) -> f64 {
        norm_pdf((s - theta) / self.se()).ln() - self.se().ln()
    }

    fn theta_domain(&self) -> Bracket {
        Bracket::real_line()
    }

    fn sample_domain(&self) -> Bracket {
        Bracket::real_line()
    }

    fn direction(&self) -> Direction {
        Direction::Decreasing
    }

    fn theta_center(&self, s: f64) -> f64 {
        s
    }

    fn theta_scale(&self, _s: f64) -> f64 {
        self.se()
    }

    fn fd_density(&self, theta: f64, s: f64) -> Option<f64> {
        Some(norm_pdf((s - theta) / self.se()) / self.se())
    }

    fn sample_statistic(&self, theta: f64, rng: &mut Stream) -> Option<f64> {
        Normal::new(theta, self.se()).ok().map(|d| d.sample(rng))
    }
}

/// `S ~ Binomial(n, p)`. `F_p(s)` decreases in `p`, so `H_s(p) = Pr_p(S > s)`,
/// a Beta(s+1, n-s) distribution function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binomial {
    pub n: u64,
}

impl Binomial {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("binomial needs n >= 1".into()));
        }
        Ok(Self { n })
    }

    fn count(&self, s: f64) -> Option<f64> {
        let k = s.floor();
        if k < 0.0 || k > self.n as f64 {
            None
        } else {
            Some(k)
        }
    }
}

impl ParamFamily for Binomial {
    fn name(&self) -> &str {
        "binomial"
    }

    fn cdf(&self, p: f64, s: f64) -> f64 {
        1.0 - self.sf(p, s)
    }

    fn sf(&self, p: f64, s: f64) -> f64 {
        let n = self.n as f64;
        match self.count(s) {
            None if s < 0.0 => 1.0,
            None => 0.0,
            Some(k) if k >= n => 0.0,
            Some(k) => beta_inc(k + 1.0, n - k, p).unwrap_or(f64::NAN),
        }
    }

    fn log_density(&self, p: f64, s: f64) -> f64 {
        let n = self.n as f64;
        match self.count(s) {
            Some(k) if k == s => {
                ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0) + k * p.ln() + (n - k) * (1.0 - p).ln()
            }
            _ => f64::NEG_INFINITY,
        }
    }

    fn theta_domain(&self) -> Bracket {
        Bracket { lo: 0.0, hi: 1.0 }
    }

    fn sample_domain(&self) -> Bracket {
        Bracket {
            lo: 0.0,
            hi: self.n as f64,
        }
    }

    fn direction(&self) -> Direction {
        Direction::Decreasing
    }

    fn theta_center(&self, s: f64) -> f64 {
        // Mean of Beta(s+1, n-s).
        ((s + 1.0) / (self.n as f64 + 1.0)).clamp(1e-9, 1.0 - 1e-9)
    }

    fn theta_scale(&self, s: f64) -> f64 {
        let p = self.theta_center(s);
        (p * (1.0 - p) / (self.n as f64 + 2.0)).sqrt()
    }

    fn fd_density(&self, p: f64, s: f64) -> Option<f64> {
        let n = self.n as f64;
        let k = self.count(s)?;
        if k >= n || p <= 0.0 || p >= 1.0 {
            return Some(0.0);
        }
        let (a, b) = (k + 1.0, n - k);
        Some(((a - 1.0) * p.ln() + (b - 1.0) * (1.0 - p).ln() - ln_beta(a, b)).exp())
    }

    fn sample_statistic(&self, p: f64, rng: &mut Stream) -> Option<f64> {
        BinomialDist::new(self.n, p).ok().map(|d| d.sample(rng) as f64)
    }

    fn is_discrete(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gamma_quantile, integrate_with, QuadOptions};

    #[test]
    fn exponential_fd_is_inverse_gamma() {
        let n = 15;
        let mu_hat = 1.3;
        let fam = GammaMean::exponential_sample_mean(n).unwrap();
        let fd = fd_from_family(&fam, mu_hat).unwrap();
        for &mu in &[0.6, 1.0, 1.3, 2.2] {
            // Inverse-gamma(n, n μ̂) CDF = Q(n, n μ̂ / μ).
            let exact = gamma_q(n as f64, n as f64 * mu_hat / mu).unwrap();
            assert!((fd.cdf(mu) - exact).abs() < 1e-14);
        }
        let q = fd.quantile(0.5).unwrap();
        let oracle = n as f64 * mu_hat / gamma_quantile(0.5, n as f64, 1.0).unwrap();
        assert!((q - oracle).abs() < 1e-8 * oracle);
    }

    #[test]
    fn spec_gamma_value() {
        let fam = GammaMean::new(15.0).unwrap();
        let fd = fd_from_family(&fam, 1.0).unwrap();
        assert!((fd.cdf(1.0) - 0.4657).abs() < 1e-3);
    }

    #[test]
    fn ninety_percent_interval_from_gamma_quantiles() {
        let fam = GammaMean::exponential_sample_mean(15).unwrap();
        let fd = fd_from_family(&fam, 1.0).unwrap();
        let iv = fd.interval(0.9).unwrap();
        let lo = 15.0 / gamma_quantile(0.95, 15.0, 1.0).unwrap();
        let hi = 15.0 / gamma_quantile(0.05, 15.0, 1.0).unwrap();
        assert!((iv.lower - lo).abs() < 1e-8 && (iv.upper - hi).abs() < 1e-8);
        assert!((fd.cdf(iv.upper) - fd.cdf(iv.lower) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn normal_location_fd() {
        let fd = fd_from_family(&NormalMean::new(1, 1.0).unwrap(), 0.0).unwrap();
        assert!((fd.cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((fd.cdf(1.2) - norm_cdf(1.2)).abs() < 1e-15);
        assert!((fd.density(0.7).unwrap() - norm_pdf(0.7)).abs() < 1e-15);
    }

    #[test]
    fn binomial_fd_increases_and_is_beta() {
        let fam = Binomial::new(20).unwrap();
        let fd = fd_from_family(&fam, 6.0).unwrap();
        let mut prev = 0.0;
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let h = fd.cdf(p);
            assert!(h >= prev);
            assert!((h - beta_inc(7.0, 14.0, p).unwrap()).abs() < 1e-14);
            prev = h;
        }
        assert!(fd_from_family(&fam, 20.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let fams: Vec<(FidDistribution, Bracket)> = vec![
            (fd_from_family(&GammaMean::exponential_sample_mean(5).unwrap(), 2.0).unwrap(), Bracket::positive()),
            (fd_from_family(&NormalMean::new(4, 2.0).unwrap(), 1.0).unwrap(), Bracket::real_line()),
            (fd_from_family(&Binomial::new(12).unwrap(), 3.0).unwrap(), Bracket { lo: 0.0, hi: 1.0 }),
        ];
        for (fd, range) in fams {
            let opts = QuadOptions::tol(1e-10, 1e-10).with_tail_scale(fd.scale());
            let m = integrate_with(|t| fd.density(t).unwrap_or(0.0), range, &opts).unwrap();
            assert!((m.value - 1.0).abs() < 1e-4, "{:?}: {}", fd, m.value);
        }
    }

    #[test]
    fn quantile_round_trip_on_grid() {
        let fd = fd_from_family(&GammaMean::exponential_sample_mean(15).unwrap(), 0.8).unwrap();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let q = fd.quantile(p).unwrap();
            assert!((fd.cdf(q) - p).abs() < 1e-8);
        }
    }
}
