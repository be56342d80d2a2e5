//! Student-t and standard-normal quantiles.
//!
//! The t CDF is evaluated through the regularized incomplete beta function
//! (Lentz continued fraction) and inverted with a bracketed Newton iteration.
//! The normal quantile uses Wichura's AS 241 rational approximation.

use std::f64::consts::PI;

use super::InferenceError;

/// Relative step size at which Newton stops; well inside the 1e-9 target.
const NEWTON_TOL: f64 = 1e-12;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

/// `ln Γ(x)` for `x > 0`, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Continued fraction for `I_x(a, b)`; converges fast for `x < (a+1)/(a+b+2)`.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` where the caller supplies both
/// `x` and `y = 1 - x`, so that `y` keeps full precision when `x ≈ 1`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, y) / b
    }
}

/// `P(T > t)` for Student t with `df` degrees of freedom.
pub fn t_upper_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let t2 = t * t;
    // x = df / (df + t²), y = t² / (df + t²)
    let half_two_tail = if t2.is_infinite() {
        0.0
    } else {
        let denom = df + t2;
        0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / denom, t2 / denom)
    };
    if t >= 0.0 {
        half_two_tail
    } else {
        1.0 - half_two_tail
    }
}

pub fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (t * t / df).ln_1p()).exp()
}

/// Cornish-Fisher expansion of the t quantile around the normal quantile.
fn cornish_fisher_guess(z: f64, df: f64) -> f64 {
    let z2 = z * z;
    let g1 = (z2 + 1.0) * z / 4.0;
    let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    let g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
    let g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92160.0;
    z + g1 / df + g2 / (df * df) + g3 / df.powi(3) + g4 / df.powi(4)
}

fn check_tail(tail_prob: f64) -> Result<(), InferenceError> {
    if tail_prob > 0.0 && tail_prob < 0.5 {
        Ok(())
    } else {
        Err(InferenceError::InvalidArgument(format!(
            "tail probability {tail_prob} outside (0, 0.5)"
        )))
    }
}

/// Upper-tail Student-t quantile: the `t` with `P(T > t) = tail_prob`.
///
/// `df = +∞` returns the normal quantile.
pub fn t_quantile(df: f64, tail_prob: f64) -> Result<f64, InferenceError> {
    check_tail(tail_prob)?;
    if df.is_nan() || df <= 0.0 {
        return Err(InferenceError::InvalidArgument(format!(
            "degrees of freedom {df} must be > 0"
        )));
    }
    let z = z_quantile(tail_prob)?;
    if df.is_infinite() {
        return Ok(z);
    }
    // closed forms
    if df == 1.0 {
        return Ok((PI * (0.5 - tail_prob)).tan());
    }
    if df == 2.0 {
        let p = tail_prob;
        return Ok((1.0 - 2.0 * p) / (2.0 * p * (1.0 - p)).sqrt());
    }

    // Q(t) is strictly decreasing from Q(0) = 0.5, so the root lies in (0, hi).
    let mut lo = 0.0_f64;
    let mut hi = z.max(1.0);
    while t_upper_tail(hi, df) > tail_prob {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(InferenceError::InvalidArgument(format!(
                "t quantile overflow for df {df}, tail {tail_prob}"
            )));
        }
    }

    let guess = cornish_fisher_guess(z, df);
    let mut t = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let excess = t_upper_tail(t, df) - tail_prob;
        if excess > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t + excess / t_pdf(t, df);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= NEWTON_TOL * t.max(1.0) || hi - lo <= NEWTON_TOL {
            break;
        }
    }
    Ok(t)
}

/// Upper-tail standard normal quantile: the `z` with `P(Z > z) = tail_prob`.
pub fn z_quantile(tail_prob: f64) -> Result<f64, InferenceError> {
    check_tail(tail_prob)?;
    Ok(-normal_inverse_cdf(tail_prob))
}

/// AS 241 (PPND16), relative accuracy about 1e-16.
#[allow(clippy::excessive_precision)]
pub fn normal_inverse_cdf(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2_509.080_928_730_122_7 + 33_430.575_583_588_13) * r
            + 67_265.770_927_008_7)
            * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_461)
            * r
            + 1_971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((r * 5_226.495_278_852_546 + 28_729.085_735_721_943) * r
            + 39_307.895_800_092_71)
            * r
            + 21_213.794_301_586_597)
            * r
            + 5_394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    if tail <= 0.0 {
        return if q < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_100_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_888)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
