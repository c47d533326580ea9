use crate::error::{Error, Result};
use crate::fiducial::{FidDistribution, RealFn, Source};
use crate::numerics::{differentiate, find_root_with, Bracket, DerivOrder, RootOptions};
use std::sync::Arc;

const MLE_GRID: usize = 400;

/// Per-observation log-likelihood around its maximum.
#[derive(Clone)]
pub struct LogLikProfile {
    pub ell: RealFn,
    pub theta_hat: f64,
    /// Length scale of `ell` near `theta_hat`, used for finite-difference steps.
    pub scale_hint: f64,
}

impl std::fmt::Debug for LogLikProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogLikProfile")
            .field("theta_hat", &self.theta_hat)
            .field("scale_hint", &self.scale_hint)
            .finish_non_exhaustive()
    }
}

impl LogLikProfile {
    /// Checks that `theta_hat` is stationary: the score times the scale hint is
    /// at most 1e-6.
    pub fn new<F>(ell: F, theta_hat: f64, scale_hint: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(scale_hint > 0.0 && scale_hint.is_finite()) || !theta_hat.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "profile needs finite theta_hat and positive scale, got ({theta_hat}, {scale_hint})"
            )));
        }
        let score = differentiate(&ell, theta_hat, DerivOrder::First, scale_hint)?;
        if (score * scale_hint).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "theta_hat = {theta_hat} is not stationary (score {score})"
            )));
        }
        Ok(Self {
            ell: Arc::new(ell),
            theta_hat,
            scale_hint,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    /// `-1/ℓ''(θ̂)`.
    pub b: f64,
    /// `ℓ'''(θ̂)`.
    pub ell3: f64,
}

pub fn curvature(profile: &LogLikProfile) -> Result<Curvature> {
    let ell = &*profile.ell;
    let th = profile.theta_hat;
    let second = differentiate(ell, th, DerivOrder::Second, profile.scale_hint)?;
    if !(second < 0.0) {
        return Err(Error::NonConcave { theta: th, second });
    }
    let ell3 = differentiate(ell, th, DerivOrder::Third, profile.scale_hint)?;
    Ok(Curvature { b: -1.0 / second, ell3 })
}

/// Maximizer of a smooth unimodal log-likelihood inside a finite bracket,
/// located on a grid and polished as a root of the numerical score.
pub fn mle_fit<F: Fn(f64) -> f64>(log_lik: F, bracket: Bracket) -> Result<f64> {
    if !bracket.is_finite() {
        return Err(Error::InvalidArgument("mle_fit needs a finite bracket".into()));
    }
    let step = bracket.width() / MLE_GRID as f64;
    let grid = |i: usize| bracket.lo + step * i as f64;
    let value = |x: f64| {
        let v = log_lik(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    // Endpoints may be singular, so probe strictly inside.
    let mut best = (1, value(grid(1)));
    for i in 2..MLE_GRID {
        let v = value(grid(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, vmax) = best;
    if i == 1 || i == MLE_GRID - 1 || vmax == f64::NEG_INFINITY {
        return Err(Error::NoStationaryPoint {
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    let (a, b) = (grid(i - 1), grid(i + 1));
    let h = 0.25 * step;
    let score = |x: f64| differentiate(&log_lik, x, DerivOrder::First, h).unwrap_or(f64::NAN);
    let opts = RootOptions {
        xtol: 1e-15 * (a.abs() + b.abs()).max(step),
        ftol: 0.0,
        max_iter: 200,
    };
    let x = match find_root_with(score, Bracket { lo: a, hi: b }, &opts) {
        Ok(x) => x,
        // Flat score at the grid maximum: keep the grid point.
        Err(Error::NotBracketed { .. }) => grid(i),
        Err(e) => return Err(e),
    };
    if value(x) + 1e-12 * vmax.abs().max(1.0) < vmax {
        return Ok(grid(i));
    }
    Ok(x)
}

/// Posterior `∝ L(θ) π(θ)` normalized by quadrature over `domain`.
pub fn jeffreys_posterior<L, P>(
    log_lik: L,
    prior_log: P,
    domain: Bracket,
    center: f64,
    scale: f64,
) -> Result<FidDistribution>
where
    L: Fn(f64) -> f64 + Send + Sync + 'static,
    P: Fn(f64) -> f64 + Send + Sync + 'static,
{
    FidDistribution::from_log_density(move |t| log_lik(t) + prior_log(t), domain, center, scale, Source::Posterior)
}
