//! Distribution function of an unnormalized log density, with cumulative
//! masses precomputed on panels so each CDF call costs one short quadrature.

use super::RealFn;
use crate::error::{Error, Result};
use crate::numerics::roots::probe_point;
use crate::numerics::{integrate_with, Bracket, QuadOptions};

/// Log-density drop (in nats) below the mode at which the body ends.
const CUTOFF: f64 = 60.0;
const PANELS: usize = 64;
const MAX_DOUBLINGS: i32 = 62;

pub(crate) struct Tabulated {
    log_density: RealFn,
    domain: Bracket,
    mode: f64,
    peak: f64,
    /// Panel edges spanning the body `[breaks[0], breaks[last]]`.
    breaks: Vec<f64>,
    /// Mass below each edge, including the lower tail.
    cum: Vec<f64>,
    total: f64,
    opts: QuadOptions,
}

impl Tabulated {
    pub(crate) fn build(log_density: RealFn, domain: Bracket, center: f64, scale: f64) -> Result<Self> {
        domain.check_interior(center)?;
        let (mode, peak) = find_mode(&*log_density, domain, center, scale)?;
        let lf = &*log_density;
        let lo = body_edge(lf, mode, peak, scale, domain.lo)?;
        let hi = body_edge(lf, mode, peak, scale, domain.hi)?;
        let mut breaks: Vec<f64> = (0..=PANELS).map(|i| lo + (hi - lo) * i as f64 / PANELS as f64).collect();
        if let Err(pos) = breaks.binary_search_by(|b| b.total_cmp(&mode)) {
            breaks.insert(pos, mode);
        }
        let opts = QuadOptions {
            abs_tol: 1e-15 * (hi - lo),
            rel_tol: 1e-12,
            max_subdivisions: 400,
            tail_scale: scale,
        };
        let f = |t: f64| (lf(t) - peak).exp();
        let improper = |e: Error| Error::Improper(format!("normalizing integral failed: {e}"));
        let lower_tail = if lo > domain.lo {
            integrate_with(f, Bracket { lo: domain.lo, hi: lo }, &opts).map_err(improper)?.value
        } else {
            0.0
        };
        let mut cum = Vec::with_capacity(breaks.len());
        let mut acc = lower_tail;
        cum.push(acc);
        for w in breaks.windows(2) {
            acc += integrate_with(f, Bracket { lo: w[0], hi: w[1] }, &opts).map_err(improper)?.value;
            cum.push(acc);
        }
        let upper_tail = if hi < domain.hi {
            integrate_with(f, Bracket { lo: hi, hi: domain.hi }, &opts).map_err(improper)?.value
        } else {
            0.0
        };
        let total = acc + upper_tail;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Improper(format!("normalizing integral is {total}")));
        }
        Ok(Self {
            log_density,
            domain,
            mode,
            peak,
            breaks,
            cum,
            total,
            opts,
        })
    }

    pub(crate) fn mode(&self) -> f64 {
        self.mode
    }

    fn unnorm(&self, t: f64) -> f64 {
        ((self.log_density)(t) - self.peak).exp()
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        integrate_with(|t| self.unnorm(t), Bracket { lo: a, hi: b }, &self.opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }

    pub(crate) fn cdf(&self, x: f64) -> f64 {
        if x <= self.domain.lo {
            return 0.0;
        }
        if x >= self.domain.hi {
            return 1.0;
        }
        let first = self.breaks[0];
        let last = *self.breaks.last().unwrap();
        let mass = if x <= first {
            self.piece(self.domain.lo, x)
        } else if x >= last {
            self.total - self.piece(x, self.domain.hi)
        } else {
            let i = self.breaks.partition_point(|&b| b <= x) - 1;
            self.cum[i] + self.piece(self.breaks[i], x)
        };
        (mass / self.total).clamp(0.0, 1.0)
    }

    pub(crate) fn density(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        self.unnorm(x) / self.total
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn find_mode(lf: &dyn Fn(f64) -> f64, domain: Bracket, center: f64, scale: f64) -> Result<(f64, f64)> {
    let mut c = center;
    for _ in 0..30 {
        let pts: Vec<f64> = (-320..=320)
            .map(|k| {
                let d = scale * k as f64 / 8.0;
                probe_point(c, d, if d < 0.0 { domain.lo } else { domain.hi })
            })
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&t| finite_or_neg_inf(lf(t))).collect();
        let (imax, &vmax) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if vmax == f64::NEG_INFINITY {
            return Err(Error::Improper("log density is -inf on the whole probe grid".into()));
        }
        if imax == 0 || imax == pts.len() - 1 {
            if pts[imax] == c {
                break;
            }
            c = pts[imax];
            continue;
        }
        let (mut a, mut b) = (pts[imax - 1], pts[imax + 1]);
        // Golden-section refinement.
        let g = 0.618_033_988_749_894_9;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = finite_or_neg_inf(lf(x1));
        let mut f2 = finite_or_neg_inf(lf(x2));
        for _ in 0..80 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = finite_or_neg_inf(lf(x2));
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = finite_or_neg_inf(lf(x1));
            }
        }
        let (m, fm) = if f1 > vmax || f2 > vmax {
            if f1 > f2 { (x1, f1) } else { (x2, f2) }
        } else {
            (pts[imax], vmax)
        };
        return Ok((m, fm));
    }
    Err(Error::Improper("log density has no interior maximum".into()))
}

/// Point beyond which the density is below `e^{-CUTOFF}` of its peak, or the
/// domain bound itself if that is finite and reached first.
fn body_edge(lf: &dyn Fn(f64) -> f64, mode: f64, peak: f64, scale: f64, bound: f64) -> Result<f64> {
    let dir = if bound > mode { 1.0 } else { -1.0 };
    for k in -2..MAX_DOUBLINGS {
        let x = probe_point(mode, dir * scale * 2f64.powi(k), bound);
        if x == bound || (bound.is_finite() && (x - bound).abs() <= 1e-14 * bound.abs().max(1.0)) {
            return Ok(bound);
        }
        if finite_or_neg_inf(lf(x)) < peak - CUTOFF {
            return Ok(x);
        }
    }
    if bound.is_finite() {
        Ok(bound)
    } else {
        Err(Error::Improper(format!("density does not decay towards {bound}")))
    }
}
