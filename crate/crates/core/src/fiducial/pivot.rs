use super::ParamFamily;
use crate::error::{Error, Result};
use crate::rng::derive_stream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov–Smirnov distance of a sample from uniform(0, 1).
pub fn ks_statistic(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability with Stephens' finite-sample
/// correction `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Draw `θ̂_i` at `theta_true` and test `F_θ(θ̂_i)` for uniformity, where `θ`
/// is `pivot_theta` (defaults to `theta_true`). A wrong `pivot_theta` gives a
/// negative control.
pub fn pivotal_uniformity_check<F: ParamFamily + ?Sized>(
    family: &F,
    theta_true: f64,
    n_sims: usize,
    seed: u64,
    pivot_theta: Option<f64>,
) -> Result<KsReport> {
    if n_sims == 0 {
        return Err(Error::InvalidArgument("need at least one simulation".into()));
    }
    family.theta_domain().check_interior(theta_true)?;
    let theta = pivot_theta.unwrap_or(theta_true);
    let mut values = Vec::with_capacity(n_sims);
    for i in 0..n_sims {
        let mut rng = derive_stream(seed, 0, i as u64);
        let s = family
            .sample_statistic(theta_true, &mut rng)
            .ok_or_else(|| Error::Unsupported(format!("{} has no sampler", family.name())))?;
        values.push(family.cdf(theta, s));
    }
    let d = ks_statistic(&mut values);
    Ok(KsReport {
        statistic: d,
        p_value: kolmogorov_pvalue(d, n_sims),
        n: n_sims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiducial::GammaMean;

    #[test]
    fn ks_on_perfect_grid() {
        let mut v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&mut v) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn pvalue_reference_points() {
        // Asymptotic 5% critical value of sqrt(n) D is 1.3581.
        let n = 1_000_000;
        let d = 1.358_1 / (n as f64).sqrt();
        assert!((kolmogorov_pvalue(d, n) - 0.05).abs() < 1e-3);
        assert_eq!(kolmogorov_pvalue(0.0, 10), 1.0);
    }

    #[test]
    fn exponential_pivot_is_uniform() {
        let fam = GammaMean::exponential_sample_mean(15).unwrap();
        let r = pivotal_uniformity_check(&fam, 1.0, 5000, 11, None).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
        let bad = pivotal_uniformity_check(&fam, 1.0, 5000, 11, Some(1.2)).unwrap();
        assert!(bad.p_value < 0.01, "{bad:?}");
        let one = pivotal_uniformity_check(&fam, 1.0, 1, 11, None).unwrap();
        assert!(one.statistic >= 0.5 && one.p_value > 0.0);
    }
}
