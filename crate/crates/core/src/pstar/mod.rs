//! Conditional fiducial distributions from the p*-formula
//! `p*_θ(θ̂ | a) = c(a, θ) |j(θ̂)|^{1/2} L(θ) / L(θ̂)`.
//!
//! The normalizer `c(a, θ)` is always found by quadrature over the MLE range,
//! one θ at a time, so any θ-dependence shows up rather than being assumed.

mod bvn;
mod hyperbola;
mod simple;

pub use bvn::{
    bvn_expansion_fd, bvn_jeffreys_fd, bvn_log_lik, bvn_mle, bvn_models, bvn_pstar_fd, fisher_z_fd, pearson_exact_fd,
    pearson_normal_fd, pearson_r_density, BvnModels, BvnPStar, BvnRhoData,
};
pub use hyperbola::{hyperbola_exact_fd, HyperbolaData, HyperbolaPStar};
pub use simple::{ExponentialMeanPStar, NormalLocationPStar};

use crate::error::{Error, Result};
use crate::fiducial::{Direction, FidDistribution, Source};
use crate::numerics::{integrate_with, Bracket, QuadOptions};
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// A model for the MLE `t = θ̂` given an ancillary held at its observed value.
pub trait PStarModel: Send + Sync {
    fn name(&self) -> &str;

    /// Full-sample `log L(θ)` for the data whose MLE is `t` (ancillary fixed).
    fn log_lik(&self, theta: f64, t: f64) -> f64;

    /// Observed information `j(t)` at the MLE.
    fn obs_info(&self, t: f64) -> f64;

    /// Observed MLE.
    fn theta_hat(&self) -> f64;

    fn theta_domain(&self) -> Bracket;

    /// Range of the MLE.
    fn mle_domain(&self) -> Bracket;

    /// How `F*_θ(θ̂ | a)` moves with θ.
    fn direction(&self) -> Direction {
        Direction::Decreasing
    }

    /// `1/√j(θ̂)`, the natural θ-scale.
    fn scale(&self) -> f64 {
        1.0 / self.obs_info(self.theta_hat()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Masses {
    /// Scaled mass below / above the observed MLE.
    below: f64,
    above: f64,
    /// Log of the scaling applied to the integrand.
    offset: f64,
}

const CACHE_LIMIT: usize = 1 << 16;

/// p* engine around a model, caching per-θ normalizations.
pub struct PStar<M: PStarModel> {
    model: M,
    cache: RwLock<HashMap<u64, Masses>>,
    opts: QuadOptions,
}

impl<M: PStarModel> std::fmt::Debug for PStar<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PStar").field("model", &self.model.name()).finish_non_exhaustive()
    }
}

impl<M: PStarModel> PStar<M> {
    pub fn new(model: M) -> Result<Self> {
        let th = model.theta_hat();
        model.theta_domain().check_interior(th)?;
        model.mle_domain().check_interior(th)?;
        let j = model.obs_info(th);
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidArgument(format!("observed information must be positive, got {j}")));
        }
        let scale = model.scale();
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-11,
            max_subdivisions: 2000,
            tail_scale: scale,
        };
        Ok(Self {
            model,
            cache: RwLock::new(HashMap::new()),
            opts,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Unnormalized `log p*`: `½ log j(t) + log L(θ; t) - log L(t; t)`.
    pub fn log_kernel(&self, theta: f64, t: f64) -> f64 {
        let j = self.model.obs_info(t);
        if !(j > 0.0) || !j.is_finite() {
            return f64::NEG_INFINITY;
        }
        let v = 0.5 * j.ln() + self.model.log_lik(theta, t) - self.model.log_lik(t, t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn masses(&self, theta: f64) -> Result<Masses> {
        let key = theta.to_bits();
        if let Some(m) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(m);
        }
        let m = self.compute_masses(theta)?;
        if let Ok(mut c) = self.cache.write() {
            if c.len() >= CACHE_LIMIT {
                c.clear();
            }
            c.entry(key).or_insert(m);
        }
        Ok(m)
    }

    fn compute_masses(&self, theta: f64) -> Result<Masses> {
        let dom = self.model.mle_domain();
        let obs = self.model.theta_hat();
        // The kernel peaks near t = θ; scale by its value there.
        let anchor = theta.clamp(dom.lo, dom.hi);
        let anchor = if dom.contains(anchor) { anchor } else { obs };
        let mut offset = self.log_kernel(theta, anchor);
        if !offset.is_finite() {
            offset = self.log_kernel(theta, obs);
        }
        if !offset.is_finite() {
            offset = 0.0;
        }
        let f = |t: f64| {
            let v = (self.log_kernel(theta, t) - offset).exp();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let integral = |lo: f64, hi: f64| -> Result<f64> {
            if lo >= hi {
                return Ok(0.0);
            }
            integrate_with(f, Bracket { lo, hi }, &self.opts)
                .map(|r| r.value)
                .map_err(|e| Error::Improper(format!("p* normalization at theta = {theta}: {e}")))
        };
        let (below, above) = if dom.contains(theta) && theta < obs {
            (integral(dom.lo, theta)? + integral(theta, obs)?, integral(obs, dom.hi)?)
        } else if dom.contains(theta) && theta > obs {
            (integral(dom.lo, obs)?, integral(obs, theta)? + integral(theta, dom.hi)?)
        } else {
            (integral(dom.lo, obs)?, integral(obs, dom.hi)?)
        };
        let total = below + above;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Improper(format!("p* normalization at theta = {theta} is {total}")));
        }
        Ok(Masses { below, above, offset })
    }

    /// `c(a, θ)`, the reciprocal of `∫ |j(t)|^{1/2} L(θ)/L(t) dt`.
    pub fn normalizer(&self, theta: f64) -> Result<f64> {
        let m = self.masses(theta)?;
        Ok((-m.offset).exp() / (m.below + m.above))
    }

    /// Normalized p* density of the MLE at `θ`.
    pub fn density(&self, theta: f64) -> Result<impl Fn(f64) -> f64 + '_> {
        let c = self.normalizer(theta)?;
        Ok(move |t: f64| c * self.log_kernel(theta, t).exp())
    }

    /// `F*_θ(θ̂_obs | a)`.
    pub fn mle_cdf_at_observed(&self, theta: f64) -> Result<f64> {
        let m = self.masses(theta)?;
        Ok(m.below / (m.below + m.above))
    }

    /// `H*(θ)`: `1 - F*_θ(θ̂ | a)` or `F*_θ(θ̂ | a)` depending on direction.
    pub fn h_star(&self, theta: f64) -> f64 {
        match self.masses(theta) {
            Ok(m) => {
                let total = m.below + m.above;
                match self.model.direction() {
                    Direction::Decreasing => m.above / total,
                    Direction::Increasing => m.below / total,
                }
            }
            Err(_) => f64::NAN,
        }
    }

    /// Relative spread `max c / min c - 1` of the normalizer over `grid`.
    pub fn normalizer_variation(&self, grid: &[f64]) -> Result<f64> {
        let cs = grid.iter().map(|&t| self.normalizer(t)).collect::<Result<Vec<f64>>>()?;
        let max = cs.iter().copied().fold(f64::MIN, f64::max);
        let min = cs.iter().copied().fold(f64::MAX, f64::min);
        Ok(max / min - 1.0)
    }
}

/// Fiducial distribution `H*(θ)` from the p*-formula. Its density is a
/// central difference of `H*` on the scale `1/√j(θ̂)`.
pub fn pstar_fd<M: PStarModel + 'static>(engine: Arc<PStar<M>>) -> Result<FidDistribution> {
    let th = engine.model.theta_hat();
    let scale = engine.model.scale();
    let domain = engine.model.theta_domain();
    let name = engine.model.name().to_string();
    let e = Arc::clone(&engine);
    let fd = FidDistribution::new(move |t| e.h_star(t), domain, th, scale, Source::PStar)?;
    Ok(fd.with_note(format!("p* fiducial distribution for the {name} model")))
}

/// Build the engine and its fiducial distribution in one go.
pub fn pstar_fd_for<M: PStarModel + 'static>(model: M) -> Result<FidDistribution> {
    pstar_fd(Arc::new(PStar::new(model)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiducial::{fd_from_family, sup_cdf_distance, GammaMean, NormalMean};
    use crate::numerics::norm_pdf;

    #[test]
    fn exponential_pstar_is_exact() {
        let (n, mu_hat) = (15, 1.3);
        let engine = Arc::new(PStar::new(ExponentialMeanPStar::new(n, mu_hat).unwrap()).unwrap());
        let fd = pstar_fd(Arc::clone(&engine)).unwrap();
        let exact = fd_from_family(&GammaMean::exponential_sample_mean(n).unwrap(), mu_hat).unwrap();
        let d = sup_cdf_distance(&|t| fd.cdf(t), &|t| exact.cdf(t), Bracket { lo: 0.4, hi: 4.0 }, 400);
        assert!(d < 1e-3, "{d}");
        // The normalizer does not depend on θ here.
        assert!(engine.normalizer_variation(&[0.7, 1.0, 1.3, 2.0]).unwrap() < 1e-8);
    }

    #[test]
    fn normal_location_pstar_is_normal() {
        let engine = PStar::new(NormalLocationPStar::new(4, 2.0, 0.5).unwrap()).unwrap();
        let dens = engine.density(0.2).unwrap();
        for &t in &[-1.0, 0.2, 0.9] {
            assert!((dens(t) - norm_pdf(t - 0.2)).abs() < 1e-9);
        }
        let fd = pstar_fd_for(NormalLocationPStar::new(4, 2.0, 0.5).unwrap()).unwrap();
        let exact = fd_from_family(&NormalMean::new(4, 2.0).unwrap(), 0.5).unwrap();
        assert!(sup_cdf_distance(&|t| fd.cdf(t), &|t| exact.cdf(t), Bracket { lo: -3.0, hi: 4.0 }, 200) < 1e-9);
    }

    #[test]
    fn densities_normalize_on_grid() {
        let engine = PStar::new(ExponentialMeanPStar::new(8, 2.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..21).map(|i| 0.8 + 0.15 * i as f64).collect();
        for &mu in &grid {
            let dens = engine.density(mu).unwrap();
            let opts = QuadOptions::tol(1e-12, 1e-12).with_tail_scale(mu);
            let mass = integrate_with(&dens, Bracket::positive(), &opts).unwrap().value;
            assert!((mass - 1.0).abs() < 1e-6, "mu = {mu}: {mass}");
        }
    }
}
