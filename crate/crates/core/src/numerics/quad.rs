//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Semi-infinite ranges are mapped onto `[0, 1)` with `x = a + s·t/(1 - t)`;
//! the doubly infinite case is split at zero. Kronrod nodes never touch the
//! interval endpoints, so integrable endpoint singularities are tolerated.

use super::Bracket;
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Length scale `s` of the tangent map used on infinite ranges.
    pub tail_scale: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
            tail_scale: 1.0,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_tail_scale(mut self, scale: f64) -> Self {
        self.tail_scale = scale;
        self
    }
}

/// Integrate `f` over `range` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, range: Bracket, tol: f64) -> Result<QuadratureResult> {
    integrate_with(f, range, &QuadOptions::tol(tol, 0.0))
}

/// Sum of integrals over consecutive pieces `[b_0, b_1], [b_1, b_2], ...`.
/// The tolerance budget applies to the total.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    let mut total = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    let piece_opts = QuadOptions {
        abs_tol: opts.abs_tol / pieces,
        ..*opts
    };
    for w in breaks.windows(2) {
        if !(w[0] < w[1]) {
            continue;
        }
        let r = integrate_with(&f, Bracket { lo: w[0], hi: w[1] }, &piece_opts)?;
        total.value += r.value;
        total.abs_error_estimate += r.abs_error_estimate;
        total.evaluations += r.evaluations;
    }
    Ok(total)
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    range: Bracket,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    integrate_dyn(&f, range, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, range: Bracket, opts: &QuadOptions) -> Result<QuadratureResult> {
    let (lo, hi) = (range.lo, range.hi);
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::NonFinite("integration limit"));
    }
    if lo == hi {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if lo > hi {
        let mut r = integrate_dyn(f, Bracket { lo: hi, hi: lo }, opts)?;
        r.value = -r.value;
        return Ok(r);
    }
    let s = opts.tail_scale;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("tail scale must be positive, got {s}")));
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(f, lo, hi, opts),
        (true, false) => adaptive(
            &|t: f64| {
                let u = 1.0 - t;
                let v = f(lo + s * t / u);
                if v == 0.0 {
                    0.0
                } else {
                    v * s / (u * u)
                }
            },
            0.0,
            1.0,
            opts,
        ),
        (false, true) => adaptive(
            &|t: f64| {
                let u = 1.0 - t;
                let v = f(hi - s * t / u);
                if v == 0.0 {
                    0.0
                } else {
                    v * s / (u * u)
                }
            },
            0.0,
            1.0,
            opts,
        ),
        (false, false) => {
            let half = QuadOptions {
                abs_tol: 0.5 * opts.abs_tol,
                ..*opts
            };
            let a = integrate_dyn(f, Bracket { lo, hi: 0.0 }, &half)?;
            let b = integrate_dyn(f, Bracket { lo: 0.0, hi }, &half)?;
            Ok(QuadratureResult {
                value: a.value + b.value,
                abs_error_estimate: a.abs_error_estimate + b.abs_error_estimate,
                evaluations: a.evaluations + b.evaluations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!(
                "integrand is not finite at x = {x}"
            )))
        }
    };
    let fc = eval(center)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        resabs,
    })
}

fn adaptive<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    let first = kronrod15(f, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    heap.push(first);
    let mut subdivisions = 0usize;

    loop {
        let value: f64 = heap.iter().chain(frozen.iter()).map(|s| s.value).sum();
        let error: f64 = heap.iter().chain(frozen.iter()).map(|s| s.error).sum();
        let resabs: f64 = heap.iter().chain(frozen.iter()).map(|s| s.resabs).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        // Below ~100 ulps of the absolute integral nothing further is resolvable.
        let floor = 100.0 * f64::EPSILON * resabs;
        if error <= target || error <= floor {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                evaluations,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return Err(Error::QuadratureNotConverged {
                    estimate: value,
                    error,
                    evaluations,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        let tiny = 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE);
        if mid - worst.a <= tiny || worst.b - mid <= tiny {
            frozen.push(worst);
            continue;
        }
        if subdivisions >= opts.max_subdivisions {
            heap.push(worst);
            let value: f64 = heap.iter().chain(frozen.iter()).map(|s| s.value).sum();
            return Err(Error::QuadratureNotConverged {
                estimate: value,
                error,
                evaluations,
            });
        }
        heap.push(kronrod15(f, worst.a, mid)?);
        heap.push(kronrod15(f, mid, worst.b)?);
        evaluations += 30;
        subdivisions += 1;
    }
}
