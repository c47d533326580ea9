use super::Bracket;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute bracket-width tolerance.
    pub xtol: f64,
    /// Stop as soon as `|f(x)| <= ftol`.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-12,
            ftol: 0.0,
            max_iter: 200,
        }
    }
}

/// Brent's bracketed root finder: inverse quadratic / secant steps guarded by
/// bisection, so it always converges on a sign change.
pub fn find_root<F: FnMut(f64) -> f64>(f: F, bracket: Bracket, tol: f64) -> Result<f64> {
    find_root_with(
        f,
        bracket,
        &RootOptions {
            xtol: tol,
            ..RootOptions::default()
        },
    )
}

pub fn find_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: Bracket,
    opts: &RootOptions,
) -> Result<f64> {
    if !bracket.is_finite() {
        return Err(Error::InvalidArgument(
            "root finding needs a finite bracket".into(),
        ));
    }
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::NonFinite("function value at bracket endpoint"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NotBracketed {
            lo: a,
            hi: b,
            flo: fa,
            fhi: fb,
        });
    }
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= opts.ftol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::NonFinite("function value inside bracket"));
        }
    }
    Err(Error::RootNotConverged {
        best: b,
        iterations: opts.max_iter,
    })
}

/// Grow an interval around `start` until `f` changes sign, staying inside
/// `domain`. Steps grow geometrically; finite domain edges are approached by
/// halving the remaining gap.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    step: f64,
    domain: Bracket,
    max_steps: usize,
) -> Result<Bracket> {
    let f0 = f(start);
    if f0 == 0.0 {
        let w = step.abs().max(f64::EPSILON);
        return Ok(Bracket {
            lo: (start - w).max(domain.lo),
            hi: (start + w).min(domain.hi),
        });
    }
    // f increasing assumed when probing direction is ambiguous: go toward the sign change.
    let mut prev = start;
    for k in 0..max_steps {
        let dist = step * 2f64.powi(k as i32);
        let up = probe_point(start, dist, domain.hi);
        let down = probe_point(start, -dist, domain.lo);
        for x in [up, down] {
            if !domain.contains(x) {
                continue;
            }
            let fx = f(x);
            if fx.is_nan() {
                continue;
            }
            if fx == 0.0 || fx.signum() != f0.signum() {
                let (lo, hi) = if x > start { (prev.max(start), x) } else { (x, start) };
                let _ = &mut prev;
                return Ok(Bracket { lo, hi });
            }
        }
        prev = start;
    }
    Err(Error::InvalidArgument(format!(
        "could not bracket a sign change around {start}"
    )))
}

/// `start + dist`, but never past `bound`: once the geometric step would
/// overshoot, approach the bound by successive halving.
pub(crate) fn probe_point(start: f64, dist: f64, bound: f64) -> f64 {
    if !bound.is_finite() {
        return start + dist;
    }
    let gap = bound - start;
    if dist.abs() < 0.5 * gap.abs() {
        start + dist
    } else {
        // number of halvings past the point where we reached half the gap
        let over = (dist.abs() / (0.5 * gap.abs())).log2().floor();
        bound - gap * 0.5f64.powf(over + 1.0)
    }
}
