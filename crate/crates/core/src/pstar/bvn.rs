//! Correlation of a standard bivariate normal (unit variances, zero means).
//! Sufficient statistics `S1 = Σ(x² + y²)/2`, `S2 = Σ xy`; the ancillary is
//! `A = (S1 - n)/√(n(1 + ρ̂²))`.

use super::{pstar_fd, PStar, PStarModel};
use crate::error::{Error, Result};
use crate::expansions::{
    curvature, fd_expansion, jeffreys_posterior, ExpansionSpec, LogLikProfile,
};
use crate::fiducial::{FidDistribution, Source};
use crate::numerics::{find_root_with, integrate_with, ln_gamma, norm_cdf, norm_pdf, Bracket, QuadOptions, RootOptions};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const EDGE: f64 = 1e-8;
const CUBIC_GRID: usize = 2000;

/// `log L(ρ) = -(n/2) log(1 - ρ²) - (S1 - ρ S2)/(1 - ρ²)`.
pub fn bvn_log_lik(rho: f64, n: f64, s1: f64, s2: f64) -> f64 {
    let d = 1.0 - rho * rho;
    if !(d > 0.0) {
        return f64::NEG_INFINITY;
    }
    -0.5 * n * d.ln() - (s1 - rho * s2) / d
}

/// `-∂²/∂ρ² log L`.
fn bvn_obs_info(rho: f64, n: f64, s1: f64, s2: f64) -> f64 {
    let d = 1.0 - rho * rho;
    let second = (n * (1.0 + rho * rho) - 2.0 * s1 + 6.0 * rho * s2) / (d * d) - 8.0 * rho * rho * (s1 - rho * s2) / (d * d * d);
    -second
}

fn check_stats(n: usize, s1: f64, s2: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("correlation models need n >= 4, got {n}")));
    }
    if !(s1 > 0.0 && s1.is_finite() && s2.is_finite() && s2.abs() < s1) {
        return Err(Error::InvalidArgument(format!("need s1 > |s2|, got s1 = {s1}, s2 = {s2}")));
    }
    Ok(())
}

/// MLE of ρ: the root of `-nρ³ + S2 ρ² + (n - 2 S1) ρ + S2` in (-1, 1) with
/// the largest likelihood. The cubic is positive at -1 and negative at 1.
pub fn bvn_mle(n: usize, s1: f64, s2: f64) -> Result<f64> {
    check_stats(n, s1, s2)?;
    let nf = n as f64;
    let cubic = |r: f64| ((-nf * r + s2) * r + (nf - 2.0 * s1)) * r + s2;
    let opts = RootOptions {
        xtol: 1e-15,
        ftol: 0.0,
        max_iter: 200,
    };
    let step = 2.0 / CUBIC_GRID as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev = (-1.0, cubic(-1.0));
    for i in 1..=CUBIC_GRID {
        let x = -1.0 + step * i as f64;
        let fx = cubic(x);
        let root = if fx == 0.0 {
            Some(x)
        } else if prev.1 * fx < 0.0 {
            Some(find_root_with(cubic, Bracket { lo: prev.0, hi: x }, &opts)?)
        } else {
            None
        };
        if let Some(r) = root.filter(|r| r.abs() < 1.0) {
            let l = bvn_log_lik(r, nf, s1, s2);
            if best.is_none_or(|(_, lb)| l > lb) {
                best = Some((r, l));
            }
        }
        prev = (x, fx);
    }
    best.map(|(r, _)| r).ok_or(Error::NoStationaryPoint { lo: -1.0, hi: 1.0 })
}

/// Observed data for the correlation problem; `r` is the ordinary (centered)
/// Pearson correlation used by the classical comparators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvnRhoData {
    pub n: usize,
    pub s1: f64,
    pub s2: f64,
    pub r: f64,
}

impl BvnRhoData {
    pub fn from_stats(n: usize, s1: f64, s2: f64, r: f64) -> Result<Self> {
        check_stats(n, s1, s2)?;
        if !(r.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("sample correlation must lie in (-1, 1), got {r}")));
        }
        Ok(Self { n, s1, s2, r })
    }

    pub fn from_sample(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("sample lengths differ: {} vs {}", x.len(), y.len())));
        }
        let n = x.len();
        let s1 = x.iter().zip(y).map(|(a, b)| 0.5 * (a * a + b * b)).sum();
        let s2 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let nf = n as f64;
        let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let (dx, dy) = (a - mx, b - my);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        Self::from_stats(n, s1, s2, sxy / (sxx * syy).sqrt())
    }

    pub fn rho_hat(&self) -> Result<f64> {
        bvn_mle(self.n, self.s1, self.s2)
    }

    pub fn log_lik(&self, rho: f64) -> f64 {
        bvn_log_lik(rho, self.n as f64, self.s1, self.s2)
    }
}

/// p* model for ρ with the ancillary held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnPStar {
    n: f64,
    a: f64,
    rho_hat: f64,
}

impl BvnPStar {
    pub fn new(data: &BvnRhoData) -> Result<Self> {
        let rho_hat = data.rho_hat()?;
        let n = data.n as f64;
        let a = (data.s1 - n) / (n * (1.0 + rho_hat * rho_hat)).sqrt();
        Ok(Self { n, a, rho_hat })
    }

    pub fn ancillary(&self) -> f64 {
        self.a
    }

    /// `(S1, S2)` of the sample with MLE `t` and the observed ancillary.
    pub fn stats_at(&self, t: f64) -> (f64, f64) {
        let s1 = self.n + self.a * (self.n * (1.0 + t * t)).sqrt();
        let s2 = t * (2.0 * s1 - self.n * (1.0 - t * t)) / (1.0 + t * t);
        (s1, s2)
    }

    fn admissible(s1: f64, s2: f64) -> bool {
        s1 > 0.0 && s2.abs() <= s1
    }
}

impl PStarModel for BvnPStar {
    fn name(&self) -> &str {
        "bivariate-normal-correlation"
    }
    fn log_lik(&self, rho: f64, t: f64) -> f64 {
        let (s1, s2) = self.stats_at(t);
        if !Self::admissible(s1, s2) {
            return f64::NEG_INFINITY;
        }
        bvn_log_lik(rho, self.n, s1, s2)
    }
    fn obs_info(&self, t: f64) -> f64 {
        let (s1, s2) = self.stats_at(t);
        if !Self::admissible(s1, s2) {
            return 0.0;
        }
        bvn_obs_info(t, self.n, s1, s2).max(0.0)
    }
    fn theta_hat(&self) -> f64 {
        self.rho_hat
    }
    fn theta_domain(&self) -> Bracket {
        Bracket { lo: -1.0, hi: 1.0 }
    }
    fn mle_domain(&self) -> Bracket {
        Bracket { lo: -1.0 + EDGE, hi: 1.0 - EDGE }
    }
}

/// Gauss hypergeometric `₂F₁(½, ½; c; z)` for `0 <= z < 1`, by its series.
fn hyp2f1_half(c: f64, z: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..100_000 {
        let k = k as f64;
        term *= (0.5 + k) * (0.5 + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Exact density of the sample correlation from `n` pairs when the true
/// correlation is `rho`.
pub fn pearson_r_density(r: f64, rho: f64, n: usize) -> f64 {
    if !(r.abs() < 1.0) || !(rho.abs() < 1.0) || n < 4 {
        return 0.0;
    }
    let nn = n as f64;
    let log_c = (nn - 2.0).ln() + ln_gamma(nn - 1.0) - ln_gamma(nn - 0.5) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let log_f = log_c + 0.5 * (nn - 1.0) * (1.0 - rho * rho).ln() + 0.5 * (nn - 4.0) * (1.0 - r * r).ln()
        - (nn - 1.5) * (1.0 - rho * r).ln();
    log_f.exp() * hyp2f1_half(nn - 0.5, 0.5 * (1.0 + rho * r))
}

fn unit_domain() -> Bracket {
    Bracket { lo: -1.0, hi: 1.0 }
}

/// `H(ρ) = 1 - Φ(√n (r - ρ)/(1 - ρ²))`, the normal approximation to the
/// sampling law of `r`.
pub fn pearson_normal_fd(r: f64, n: usize) -> Result<FidDistribution> {
    let sn = (n as f64).sqrt();
    let arg = move |rho: f64| sn * (r - rho) / (1.0 - rho * rho);
    let fd = FidDistribution::new(move |rho| norm_cdf(-arg(rho)), unit_domain(), r, (1.0 - r * r) / sn, Source::AsymptoticNormal)?;
    Ok(fd
        .with_density(move |rho| {
            let d = 1.0 - rho * rho;
            norm_pdf(arg(rho)) * sn * ((rho - r).powi(2) + 1.0 - r * r) / (d * d)
        })
        .with_note("pearson r, normal approximation with variance (1 - rho^2)^2 / n"))
}

/// `H(ρ) = P_ρ(R > r)` from the exact sampling density of `r`.
pub fn pearson_exact_fd(r: f64, n: usize) -> Result<FidDistribution> {
    let opts = QuadOptions::tol(1e-13, 1e-10);
    let upper = move |rho: f64| {
        integrate_with(|s| pearson_r_density(s, rho, n), Bracket { lo: r, hi: 1.0 }, &opts)
            .map(|q| q.value.clamp(0.0, 1.0))
            .unwrap_or(f64::NAN)
    };
    let scale = (1.0 - r * r) / (n as f64).sqrt();
    Ok(FidDistribution::new(upper, unit_domain(), r, scale, Source::Exact)?.with_note("pearson r, exact sampling density"))
}

/// `C(ρ) = Φ(√(n - 3)(atanh ρ - atanh r))`.
pub fn fisher_z_fd(r: f64, n: usize) -> Result<FidDistribution> {
    let k = (n as f64 - 3.0).sqrt();
    let zr = r.atanh();
    let fd = FidDistribution::new(move |rho: f64| norm_cdf(k * (rho.atanh() - zr)), unit_domain(), r, (1.0 - r * r) / k, Source::AsymptoticNormal)?;
    Ok(fd
        .with_density(move |rho: f64| norm_pdf(k * (rho.atanh() - zr)) * k / (1.0 - rho * rho))
        .with_note("fisher z transform"))
}

/// All fiducial distributions of ρ compared in the correlation example.
#[derive(Debug, Clone)]
pub struct BvnModels {
    pub rho_hat: f64,
    pub ancillary: f64,
    pub pstar: FidDistribution,
    pub pearson_r: FidDistribution,
    pub pearson_r_exact: FidDistribution,
    pub fisher_z: FidDistribution,
    pub jeffreys: FidDistribution,
    pub expansion0: FidDistribution,
    pub expansion1: FidDistribution,
}

/// p* FD of ρ with the ancillary fixed at its observed value.
pub fn bvn_pstar_fd(data: &BvnRhoData) -> Result<FidDistribution> {
    pstar_fd(Arc::new(PStar::new(BvnPStar::new(data)?)?))
}

/// Posterior of ρ under the Jeffreys prior `√(1 + ρ²)/(1 - ρ²)`.
pub fn bvn_jeffreys_fd(data: &BvnRhoData) -> Result<FidDistribution> {
    let rho_hat = data.rho_hat()?;
    let n = data.n as f64;
    let (s1, s2) = (data.s1, data.s2);
    let scale = 1.0 / bvn_obs_info(rho_hat, n, s1, s2).sqrt();
    jeffreys_posterior(
        move |rho| bvn_log_lik(rho, n, s1, s2),
        |rho: f64| 0.5 * (1.0 + rho * rho).ln() - (1.0 - rho * rho).ln(),
        unit_domain(),
        rho_hat,
        scale,
    )
}

/// Expansion FD from the per-pair log-likelihood; `third_order` adds the
/// `ℓ'''` correction, otherwise this is `N(ρ̂, b/n)`.
pub fn bvn_expansion_fd(data: &BvnRhoData, third_order: bool) -> Result<FidDistribution> {
    let rho_hat = data.rho_hat()?;
    let n = data.n as f64;
    let (s1, s2) = (data.s1, data.s2);
    let hint = 0.05 * (1.0 - rho_hat.abs());
    let profile = LogLikProfile::new(move |rho| bvn_log_lik(rho, n, s1, s2) / n, rho_hat, hint)?;
    let c = curvature(&profile)?;
    let ell3 = if third_order { c.ell3 } else { 0.0 };
    fd_expansion(&ExpansionSpec::fd(rho_hat, data.n, c.b, ell3)?)
}

pub fn bvn_models(data: &BvnRhoData) -> Result<BvnModels> {
    let model = BvnPStar::new(data)?;
    Ok(BvnModels {
        rho_hat: model.theta_hat(),
        ancillary: model.ancillary(),
        pstar: pstar_fd(Arc::new(PStar::new(model)?))?,
        pearson_r: pearson_normal_fd(data.r, data.n)?,
        pearson_r_exact: pearson_exact_fd(data.r, data.n)?,
        fisher_z: fisher_z_fd(data.r, data.n)?,
        jeffreys: bvn_jeffreys_fd(data)?,
        expansion0: bvn_expansion_fd(data, false)?,
        expansion1: bvn_expansion_fd(data, true)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{differentiate, ln_beta, DerivOrder};

    fn correlation_curve() -> BvnRhoData {
        BvnRhoData::from_stats(15, 19.248, 4.827, 0.414).unwrap()
    }

    #[test]
    fn mle_is_likelihood_maximum() {
        let d = correlation_curve();
        let rho = d.rho_hat().unwrap();
        assert!((rho - 0.209).abs() < 2e-3, "{rho}");
        let score = differentiate(|r| d.log_lik(r), rho, DerivOrder::First, 0.01).unwrap();
        assert!(score.abs() < 1e-8);
        for i in 1..199 {
            let r = -1.0 + 0.01 * i as f64;
            assert!(d.log_lik(r) <= d.log_lik(rho) + 1e-12);
        }
    }

    #[test]
    fn observed_information_matches_numeric() {
        let (n, s1, s2) = (15.0, 19.248, 4.827);
        for &r in &[-0.6, 0.0, 0.2, 0.7] {
            let num = -differentiate(|x| bvn_log_lik(x, n, s1, s2), r, DerivOrder::Second, 0.05).unwrap();
            let ana = bvn_obs_info(r, n, s1, s2);
            assert!((num - ana).abs() < 1e-6 * ana.abs().max(1.0), "{r}: {num} vs {ana}");
        }
    }

    #[test]
    fn ancillary_reconstruction() {
        let d = correlation_curve();
        let m = BvnPStar::new(&d).unwrap();
        let (s1, s2) = m.stats_at(m.theta_hat());
        assert!((s1 - d.s1).abs() < 1e-9 && (s2 - d.s2).abs() < 1e-9);
        // Each reconstructed sample has MLE t.
        for &t in &[-0.5, 0.1, 0.6] {
            let (a, b) = m.stats_at(t);
            assert!((bvn_mle(15, a, b).unwrap() - t).abs() < 1e-9);
        }
    }

    #[test]
    fn pearson_density_oracles() {
        // Under rho = 0 the density is (1 - r²)^{(n-4)/2} / B(1/2, (n-2)/2).
        let n = 10;
        for &r in &[-0.7_f64, 0.0, 0.3, 0.9] {
            let want = (0.5 * (n as f64 - 4.0) * (1.0 - r * r).ln() - ln_beta(0.5, 0.5 * (n as f64 - 2.0))).exp();
            assert!((pearson_r_density(r, 0.0, n) - want).abs() < 1e-12 * want.max(1.0));
        }
        for &rho in &[-0.8, 0.5, 0.9] {
            let mass = integrate_with(|r| pearson_r_density(r, rho, n), Bracket { lo: -1.0, hi: 1.0 }, &QuadOptions::tol(1e-12, 1e-12))
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-9, "{rho}: {mass}");
        }
    }

    #[test]
    fn comparators_are_proper_and_ordered() {
        let m = bvn_models(&correlation_curve()).unwrap();
        for fd in [&m.pstar, &m.pearson_r, &m.pearson_r_exact, &m.fisher_z, &m.jeffreys] {
            assert!(fd.cdf(-0.99) < 0.01 && fd.cdf(0.99) > 0.99, "{:?}", fd.source());
            let mut last = 0.0;
            for i in 1..40 {
                let c = fd.cdf(-1.0 + 0.05 * i as f64);
                assert!(c + 1e-9 >= last);
                last = c;
            }
        }
        // All centered near the observed values.
        assert!((m.fisher_z.median().unwrap() - 0.414).abs() < 1e-9);
        assert!((m.pstar.median().unwrap() - m.rho_hat).abs() < 0.1);
        let i = m.pstar.interval(0.95).unwrap();
        assert!(i.lower > -0.6 && i.upper < 0.8 && i.lower < m.rho_hat && i.upper > m.rho_hat);
    }

    #[test]
    fn pstar_normalizer_depends_on_rho() {
        let engine = PStar::new(BvnPStar::new(&correlation_curve()).unwrap()).unwrap();
        let v = engine.normalizer_variation(&[-0.3, 0.0, 0.3, 0.6]).unwrap();
        assert!(v > 1e-4 && v.is_finite(), "{v}");
    }

    #[test]
    fn sample_statistics() {
        let x = [0.3, -1.2, 0.8, 1.5, -0.4];
        let y = [0.1, -0.9, 1.1, 0.7, 0.2];
        let d = BvnRhoData::from_sample(&x, &y).unwrap();
        assert!((d.s2 - (0.03 + 1.08 + 0.88 + 1.05 - 0.08)).abs() < 1e-12);
        assert!(d.r > 0.8 && d.r < 1.0);
        assert!(BvnRhoData::from_sample(&x, &y[..4]).is_err());
    }
}
