use super::PStarModel;
use crate::error::{Error, Result};
use crate::numerics::Bracket;

/// Exponential mean from `n` observations; the sample mean is sufficient, so
/// no ancillary is involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialMeanPStar {
    n: f64,
    mu_hat: f64,
}

impl ExponentialMeanPStar {
    pub fn new(n: usize, mu_hat: f64) -> Result<Self> {
        if n == 0 || !(mu_hat > 0.0 && mu_hat.is_finite()) {
            return Err(Error::InvalidArgument(format!("need n >= 1 and mu_hat > 0, got ({n}, {mu_hat})")));
        }
        Ok(Self { n: n as f64, mu_hat })
    }
}

impl PStarModel for ExponentialMeanPStar {
    fn name(&self) -> &str {
        "exponential"
    }
    fn log_lik(&self, mu: f64, t: f64) -> f64 {
        -self.n * (t / mu + mu.ln())
    }
    fn obs_info(&self, t: f64) -> f64 {
        self.n / (t * t)
    }
    fn theta_hat(&self) -> f64 {
        self.mu_hat
    }
    fn theta_domain(&self) -> Bracket {
        Bracket::positive()
    }
    fn mle_domain(&self) -> Bracket {
        Bracket::positive()
    }
}

/// Normal mean with known `sigma`: p* is exactly `N(θ, σ²/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLocationPStar {
    n: f64,
    sigma: f64,
    theta_hat: f64,
}

impl NormalLocationPStar {
    pub fn new(n: usize, sigma: f64, theta_hat: f64) -> Result<Self> {
        if n == 0 || !(sigma > 0.0 && sigma.is_finite()) || !theta_hat.is_finite() {
            return Err(Error::InvalidArgument(format!("bad normal location inputs ({n}, {sigma}, {theta_hat})")));
        }
        Ok(Self {
            n: n as f64,
            sigma,
            theta_hat,
        })
    }
}

impl PStarModel for NormalLocationPStar {
    fn name(&self) -> &str {
        "normal-location"
    }
    fn log_lik(&self, theta: f64, t: f64) -> f64 {
        -0.5 * self.n * (t - theta).powi(2) / (self.sigma * self.sigma)
    }
    fn obs_info(&self, _t: f64) -> f64 {
        self.n / (self.sigma * self.sigma)
    }
    fn theta_hat(&self) -> f64 {
        self.theta_hat
    }
    fn theta_domain(&self) -> Bracket {
        Bracket::real_line()
    }
    fn mle_domain(&self) -> Bracket {
        Bracket::real_line()
    }
}
