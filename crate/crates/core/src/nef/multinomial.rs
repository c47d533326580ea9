//! Trinomial (d = 2) fiducial distributions: the φ = (p1/p2, p2) density built
//! from conditional binomials, and the step-by-step FD of (p1, p2) in either
//! order.

use crate::error::{Error, Result};
use crate::fiducial::{fd_from_family, Binomial, FidDistribution, Source};
use crate::numerics::{integrate_pieces, integrate_with, Bracket, QuadOptions};
use std::sync::Arc;

const PROBES: usize = 64;

fn check_counts(s1: u64, s2: u64, n: u64) -> Result<()> {
    if n == 0 || s1 + s2 > n {
        return Err(Error::InvalidArgument(format!("need s1 + s2 <= n and n >= 1, got ({s1}, {s2}, {n})")));
    }
    Ok(())
}

/// `log ∫_lo^hi exp(f)`, scaled by the largest value found on a probe set
/// and split at that point so narrow peaks are not missed.
fn log_integral(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return f64::NEG_INFINITY;
    }
    let w = hi - lo;
    let mut best = (0.5 * (lo + hi), f64::NEG_INFINITY);
    for i in 1..PROBES {
        let u = i as f64 / PROBES as f64;
        for x in [lo + w * u, lo + w * u * u * u] {
            let v = f(x);
            if v > best.1 {
                best = (x, v);
            }
        }
    }
    let (peak, m) = best;
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let g = |x: f64| {
        let v = (f(x) - m).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let breaks = if peak > lo && peak < hi { vec![lo, peak, hi] } else { vec![lo, hi] };
    match integrate_pieces(g, &breaks, &QuadOptions::tol(0.0, 1e-10)) {
        Ok(r) if r.value > 0.0 => r.value.ln() + m,
        Ok(_) => f64::NEG_INFINITY,
        Err(_) => f64::NAN,
    }
}

/// Joint FD of `φ = (p1/p2, p2)` with density proportional to
/// `φ1^{s1-½} (1+φ1)^{-½} φ2^{s1+s2-½} (1 - (1+φ1) φ2)^{n-s1-s2-½}`
/// on `φ1 > 0, 0 < φ2 < 1/(1+φ1)`, normalized by iterated quadrature
/// (inner variable φ2).
#[derive(Debug, Clone)]
pub struct PhiFd {
    pub s1: u64,
    pub s2: u64,
    pub n: u64,
    pub log_normalizer: f64,
    pub phi1: FidDistribution,
    pub phi2: FidDistribution,
}

#[derive(Debug, Clone, Copy)]
struct PhiKernel {
    a1: f64,
    a2: f64,
    b: f64,
}

impl PhiKernel {
    fn log(&self, f1: f64, f2: f64) -> f64 {
        let rest = 1.0 - (1.0 + f1) * f2;
        if !(f1 > 0.0 && f2 > 0.0 && rest > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.a1 * f1.ln() - 0.5 * f1.ln_1p() + self.a2 * f2.ln() + self.b * rest.ln()
    }

    fn log_marginal1(&self, f1: f64) -> f64 {
        log_integral(&|f2| self.log(f1, f2), 0.0, 1.0 / (1.0 + f1))
    }

    fn log_marginal2(&self, f2: f64) -> f64 {
        log_integral(&|f1| self.log(f1, f2), 0.0, 1.0 / f2 - 1.0)
    }
}

impl PhiFd {
    /// Normalized joint density.
    pub fn joint_density(&self, phi1: f64, phi2: f64) -> f64 {
        (self.kernel().log(phi1, phi2) - self.log_normalizer).exp()
    }

    fn kernel(&self) -> PhiKernel {
        let (s1, s2, n) = (self.s1 as f64, self.s2 as f64, self.n as f64);
        PhiKernel {
            a1: s1 - 0.5,
            a2: s1 + s2 - 0.5,
            b: n - s1 - s2 - 0.5,
        }
    }
}

pub fn multinomial_phi_fd(s1: u64, s2: u64, n: u64) -> Result<PhiFd> {
    check_counts(s1, s2, n)?;
    let (f1, f2, nf) = (s1 as f64, s2 as f64, n as f64);
    let kernel = PhiKernel {
        a1: f1 - 0.5,
        a2: f1 + f2 - 0.5,
        b: nf - f1 - f2 - 0.5,
    };
    // Delta-method location and scale, with half counts to stay interior.
    let x1 = (f1 + 0.5) / (nf + 1.0);
    let x2 = (f2 + 0.5) / (nf + 1.0);
    let c1 = x1 / x2;
    let sd1 = (x1 * (x1 + x2) / (nf * x2.powi(3))).sqrt();
    let sd2 = (x2 * (1.0 - x2) / nf).sqrt();

    let m1 = kernel.log_marginal1(c1);
    if !m1.is_finite() {
        return Err(Error::Improper(format!("phi density vanishes at its center for ({s1}, {s2}, {n})")));
    }
    let opts = QuadOptions::tol(0.0, 1e-9).with_tail_scale(sd1.max(c1));
    let z = integrate_pieces(|t| (kernel.log_marginal1(t) - m1).exp(), &[0.0, c1, f64::INFINITY], &opts)
        .map_err(|e| Error::Improper(format!("phi normalization: {e}")))?
        .value;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Improper(format!("phi normalization is {z}")));
    }
    let log_normalizer = z.ln() + m1;

    let phi1 = FidDistribution::from_log_density(move |t| kernel.log_marginal1(t), Bracket::positive(), c1, sd1, Source::Exact)?
        .with_note("phi1 = p1/p2 marginal, iterated quadrature");
    let phi2 = FidDistribution::from_log_density(move |t| kernel.log_marginal2(t), Bracket { lo: 0.0, hi: 1.0 }, x2, sd2, Source::Exact)?
        .with_note("phi2 = p2 marginal, iterated quadrature");
    Ok(PhiFd {
        s1,
        s2,
        n,
        log_normalizer,
        phi1,
        phi2,
    })
}

/// Which probability is fiducially inverted first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    P1First,
    P2First,
}

/// `h(p_a, p_b) = h(p_a) h(ψ) / (1 - p_a)` with `ψ = p_b/(1 - p_a)`, each factor
/// the binomial FD of the corresponding conditional count.
#[derive(Debug, Clone)]
pub struct StepwiseFd {
    pub order: Order,
    first: FidDistribution,
    psi: FidDistribution,
}

pub fn multinomial_fd_d2(s1: u64, s2: u64, n: u64, order: Order) -> Result<StepwiseFd> {
    check_counts(s1, s2, n)?;
    let (sa, sb) = match order {
        Order::P1First => (s1, s2),
        Order::P2First => (s2, s1),
    };
    if sa == n || sa + sb == n {
        return Err(Error::InvalidArgument(format!(
            "counts ({s1}, {s2}) of {n} leave a degenerate conditional binomial"
        )));
    }
    let first = fd_from_family(&Binomial::new(n)?, sa as f64)?;
    let psi = fd_from_family(&Binomial::new(n - sa)?, sb as f64)?;
    Ok(StepwiseFd { order, first, psi })
}

impl StepwiseFd {
    /// `(first, second)` coordinates in this FD's order.
    fn ordered(&self, p1: f64, p2: f64) -> (f64, f64) {
        match self.order {
            Order::P1First => (p1, p2),
            Order::P2First => (p2, p1),
        }
    }

    pub fn joint_density(&self, p1: f64, p2: f64) -> f64 {
        let (a, b) = self.ordered(p1, p2);
        if !(a > 0.0 && b > 0.0 && a + b < 1.0) {
            return 0.0;
        }
        let rest = 1.0 - a;
        match (self.first.density(a), self.psi.density(b / rest)) {
            (Ok(ha), Ok(hb)) => ha * hb / rest,
            _ => f64::NAN,
        }
    }

    /// Total mass of the joint density by iterated quadrature; 1 up to
    /// quadrature error.
    pub fn normalization(&self) -> Result<f64> {
        let opts = QuadOptions::tol(1e-12, 1e-10);
        let outer = |a: f64| {
            integrate_with(|b| self.joint_density_ordered(a, b), Bracket { lo: 0.0, hi: 1.0 - a }, &opts)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        Ok(integrate_with(outer, Bracket { lo: 0.0, hi: 1.0 }, &opts)?.value)
    }

    fn joint_density_ordered(&self, a: f64, b: f64) -> f64 {
        match self.order {
            Order::P1First => self.joint_density(a, b),
            Order::P2First => self.joint_density(b, a),
        }
    }

    /// Marginal FD of `p_k`, `k ∈ {1, 2}`.
    pub fn marginal(&self, k: usize) -> Result<FidDistribution> {
        let first_index = match self.order {
            Order::P1First => 1,
            Order::P2First => 2,
        };
        if k != 1 && k != 2 {
            return Err(Error::InvalidArgument(format!("trinomial marginal index must be 1 or 2, got {k}")));
        }
        if k == first_index {
            return Ok(self.first.clone());
        }
        // P(p_b <= x) = ∫ h(a) Hψ(x/(1-a)) da over a < 1 - x, plus P(p_a >= 1 - x).
        let first = Arc::new(self.first.clone());
        let psi = Arc::new(self.psi.clone());
        let opts = QuadOptions::tol(1e-13, 1e-10);
        let (f1, p1) = (Arc::clone(&first), Arc::clone(&psi));
        let cdf = move |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            if x >= 1.0 {
                return 1.0;
            }
            let body = integrate_with(
                |a| f1.density(a).unwrap_or(0.0) * p1.cdf(x / (1.0 - a)),
                Bracket { lo: 0.0, hi: 1.0 - x },
                &opts,
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
            (body + 1.0 - f1.cdf(1.0 - x)).clamp(0.0, 1.0)
        };
        // Location and scale of p_b = ψ (1 - p_a).
        let center = psi.center() * (1.0 - first.center());
        let scale = (psi.scale() * (1.0 - first.center())).hypot(psi.center() * first.scale());
        Ok(FidDistribution::new(cdf, Bracket { lo: 0.0, hi: 1.0 }, center, scale, Source::Exact)?
            .with_note("stepwise trinomial marginal"))
    }
}
