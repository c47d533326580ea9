use crate::error::{ensure_finite, Error, Result};
use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density. NaN propagates.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    (0.5 * libm::erfc(-z * FRAC_1_SQRT_2)).clamp(0.0, 1.0)
}

/// Upper tail `1 - Φ(z)` without cancellation.
#[inline]
pub fn norm_sf(z: f64) -> f64 {
    norm_cdf(-z)
}

pub fn std_normal_pdf(z: f64) -> Result<f64> {
    ensure_finite(z, "std_normal_pdf")?;
    Ok(norm_pdf(z))
}

pub fn std_normal_cdf(z: f64) -> Result<f64> {
    ensure_finite(z, "std_normal_cdf")?;
    Ok(norm_cdf(z))
}

pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(norm_quantile(p))
}

/// Inverse of [`norm_cdf`] (Wichura's AS 241 followed by one Newton step).
/// Returns ±∞ at 0 and 1 and NaN outside [0, 1].
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let x = as241(p);
    // One Newton step on whichever tail is numerically safer.
    let resid = if p < 0.5 {
        norm_cdf(x) - p
    } else {
        (1.0 - p) - norm_sf(x)
    };
    let dens = norm_pdf(x);
    if dens > 0.0 && resid.is_finite() {
        x - resid / dens
    } else {
        x
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Maclaurin series for erf; fine for |x| <= 3 in double precision.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for &z in &[-2.5, -1.0, -0.3, 0.0, 0.7, 1.644_853_6, 2.2] {
            let oracle = 0.5 * (1.0 + erf_series(z * FRAC_1_SQRT_2));
            assert!((norm_cdf(z) - oracle).abs() < 1e-12, "z = {z}");
        }
        assert!((norm_cdf(1.644_853_6) - 0.95).abs() < 1e-7);
        assert_eq!(norm_cdf(0.0), 0.5);
    }

    #[test]
    fn cdf_symmetry_and_tails() {
        for &z in &[0.1, 1.0, 3.0, 8.0] {
            assert!((norm_cdf(-z) - (1.0 - norm_cdf(z))).abs() < 1e-15);
        }
        assert!(norm_cdf(-40.0) >= 0.0);
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn pdf_values() {
        assert!((norm_pdf(0.0) - 0.398_942_3).abs() < 1e-7);
        assert_eq!(norm_pdf(1.3), norm_pdf(-1.3));
        assert_eq!(std_normal_pdf(40.0).unwrap(), 0.0);
        assert!(std_normal_pdf(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let z = norm_quantile(p);
            assert!((norm_cdf(z) - p).abs() <= 1e-8 * p.max(1e-3), "p = {p}");
            p += 0.000_731;
        }
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!(std_normal_quantile(1.0).is_err());
    }
}
