//! Diagnostics for the second-order matching condition
//! `I(θ)^{-3/2} E_θ[(∂ℓ/∂θ)³]` constant in θ.

use crate::error::{Error, Result};
use crate::numerics::Bracket;
use crate::rng::{derive_stream, Stream};
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Draws used by [`second_order_condition_mc`] unless the caller asks otherwise.
pub const MC_DRAWS: usize = 100_000;
/// Seed of the shipped Monte Carlo diagnostics.
pub const MC_SEED: u64 = 20_170_301;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    /// `max |t(θ) - mean t| / (|mean t| + 1)` over the grid.
    pub max_rel_variation: f64,
    pub mean: f64,
    pub values: Vec<f64>,
    /// Monte Carlo standard errors, when `t` was simulated.
    pub std_errors: Option<Vec<f64>>,
}

fn check_grid(grid: &[f64], domain: Bracket) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    grid.iter().try_for_each(|&t| domain.check_interior(t))
}

fn summarize(values: Vec<f64>, std_errors: Option<Vec<f64>>) -> ConditionReport {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_dev = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let max_rel_variation = max_dev / (mean.abs() + 1.0);
    let holds = match &std_errors {
        None => max_rel_variation <= 1e-3,
        Some(se) => values.iter().zip(se).all(|(v, s)| (v - mean).abs() <= 3.0 * s),
    };
    ConditionReport {
        holds,
        max_rel_variation,
        mean,
        values,
        std_errors,
    }
}

/// Evaluate a closed-form diagnostic `t` on `grid`; holds when its relative
/// variation is at most 1e-3.
pub fn second_order_condition_check<T: Fn(f64) -> f64>(t: T, grid: &[f64], domain: Bracket) -> Result<ConditionReport> {
    check_grid(grid, domain)?;
    let values: Vec<f64> = grid.iter().map(|&th| t(th)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("condition statistic"));
    }
    Ok(summarize(values, None))
}

/// For a natural exponential family with variance function `V`, the condition
/// reduces to `2 V'(μ) V(μ)^{-1/2}` being constant.
pub fn nef_condition_statistic<V, D>(v: V, v_prime: D) -> impl Fn(f64) -> f64
where
    V: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    move |mu| 2.0 * v_prime(mu) / v(mu).sqrt()
}

/// True iff `2V'/√V` is constant on the grid to 1e-6 relative, which happens
/// exactly for `V(μ) = (c₁μ + c₂)²`.
pub fn quadratic_variance_check<V, D>(v: V, v_prime: D, grid: &[f64]) -> Result<bool>
where
    V: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty mean grid".into()));
    }
    let mut t = Vec::with_capacity(grid.len());
    for &mu in grid {
        let vm = v(mu);
        if !(vm > 0.0) {
            return Err(Error::InvalidArgument(format!("variance function is {vm} at mu = {mu}")));
        }
        t.push(2.0 * v_prime(mu) / vm.sqrt());
    }
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    Ok(t.iter().all(|x| (x - mean).abs() <= 1e-6 * (mean.abs() + 1.0)))
}

/// A model whose per-observation score can be simulated.
pub trait ScoreModel: Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> Bracket;
    fn fisher_info(&self, theta: f64) -> f64;
    /// Score of one observation drawn at `theta`.
    fn draw_score(&self, theta: f64, rng: &mut Stream) -> f64;
}

/// Monte Carlo version: `t(θ) = mean(U³) / I(θ)^{3/2}` from `draws` scores per
/// grid point, each grid point on its own stream. Holds when every `t(θ)` lies
/// within 3 standard errors of the grid mean.
pub fn second_order_condition_mc(model: &dyn ScoreModel, grid: &[f64], draws: usize, seed: u64) -> Result<ConditionReport> {
    check_grid(grid, model.domain())?;
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let per_point: Vec<(f64, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &th)| {
            let mut rng = derive_stream(seed, i as u64, 0);
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in 0..draws {
                let u3 = model.draw_score(th, &mut rng).powi(3);
                s += u3;
                ss += u3 * u3;
            }
            let m = draws as f64;
            let mean = s / m;
            let var = ((ss - m * mean * mean) / (m - 1.0)).max(0.0);
            let norm = model.fisher_info(th).powf(1.5);
            (mean / norm, (var / m).sqrt() / norm)
        })
        .collect();
    let (values, se): (Vec<f64>, Vec<f64>) = per_point.into_iter().unzip();
    Ok(summarize(values, Some(se)))
}

/// Exponential with mean μ: `U = (x - μ)/μ²`, `I = 1/μ²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExponentialScore;

impl ScoreModel for ExponentialScore {
    fn name(&self) -> &str {
        "exponential"
    }
    fn domain(&self) -> Bracket {
        Bracket::positive()
    }
    fn fisher_info(&self, mu: f64) -> f64 {
        1.0 / (mu * mu)
    }
    fn draw_score(&self, mu: f64, rng: &mut Stream) -> f64 {
        let x: f64 = mu * <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
        (x - mu) / (mu * mu)
    }
}

/// Poisson with mean μ: `U = (x - μ)/μ`, `I = 1/μ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PoissonScore;

impl ScoreModel for PoissonScore {
    fn name(&self) -> &str {
        "poisson"
    }
    fn domain(&self) -> Bracket {
        Bracket::positive()
    }
    fn fisher_info(&self, mu: f64) -> f64 {
        1.0 / mu
    }
    fn draw_score(&self, mu: f64, rng: &mut Stream) -> f64 {
        let x: f64 = Poisson::new(mu).map(|d| d.sample(rng)).unwrap_or(f64::NAN);
        (x - mu) / mu
    }
}

/// Gamma hyperbola: `X ~ Exp(mean e^η)`, `Y ~ Exp(mean e^{-η})`, so
/// `U = X e^{-η} - Y e^{η}` and `I = 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HyperbolaScore;

impl ScoreModel for HyperbolaScore {
    fn name(&self) -> &str {
        "hyperbola"
    }
    fn domain(&self) -> Bracket {
        Bracket::real_line()
    }
    fn fisher_info(&self, _eta: f64) -> f64 {
        2.0
    }
    fn draw_score(&self, eta: f64, rng: &mut Stream) -> f64 {
        let x: f64 = eta.exp() * <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
        let y: f64 = (-eta).exp() * <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
        x * (-eta).exp() - y * eta.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

    #[test]
    fn analytic_nef_statistics() {
        let exp = second_order_condition_check(nef_condition_statistic(|m| m * m, |m| 2.0 * m), &GRID, Bracket::positive()).unwrap();
        assert!(exp.holds && (exp.mean - 4.0).abs() < 1e-12);
        let pois = second_order_condition_check(nef_condition_statistic(|m| m, |_| 1.0), &GRID, Bracket::positive()).unwrap();
        assert!(!pois.holds);
        assert!((pois.values[1] - 2.0).abs() < 1e-12);
        let hyp = second_order_condition_check(|_| 0.0, &[-1.0, 0.0, 2.5], Bracket::real_line()).unwrap();
        assert!(hyp.holds);
        assert!(second_order_condition_check(|_| 0.0, &[-1.0], Bracket::positive()).is_err());
    }

    #[test]
    fn simulated_statistics() {
        let e = second_order_condition_mc(&ExponentialScore, &GRID, MC_DRAWS, MC_SEED).unwrap();
        assert!(e.holds, "{e:?}");
        assert!((e.mean - 2.0).abs() < 0.1);
        let h = second_order_condition_mc(&HyperbolaScore, &[-1.0, 0.0, 1.0, 2.5], MC_DRAWS, MC_SEED).unwrap();
        assert!(h.holds && h.mean.abs() < 0.1, "{h:?}");
        let p = second_order_condition_mc(&PoissonScore, &GRID, MC_DRAWS, MC_SEED).unwrap();
        assert!(!p.holds, "{p:?}");
    }

    #[test]
    fn quadratic_variance_functions() {
        let grid: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
        assert!(quadratic_variance_check(|m| m * m, |m| 2.0 * m, &grid).unwrap());
        assert!(quadratic_variance_check(|_| 1.0, |_| 0.0, &grid).unwrap());
        assert!(quadratic_variance_check(|m| (0.5 * m + 2.0).powi(2), |m| 0.5 * m + 2.0, &grid).unwrap());
        assert!(!quadratic_variance_check(|m| m * (1.0 - m), |m| 1.0 - 2.0 * m, &grid).unwrap());
        assert!(quadratic_variance_check(|m| m - 1.0, |_| 1.0, &[0.5]).is_err());
    }
}
