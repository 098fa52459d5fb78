//! Real-argument error functions.
//!
//! The regularised Weyl integrand only needs `erfi(a_ho * Lambda / sqrt 2)`
//! where `Lambda = sqrt(k^2 - q^2)` is either real (`q < k`) or purely
//! imaginary (`q > k`). For imaginary `Lambda = i kappa`,
//! `erfi(i x) = i erf(x)`, so the complex Faddeeva function is never needed:
//! real `erf`, `erfc` and `erfi` cover every case.

use crate::error::{Error, Result};

const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_6;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `e^{-x^2} * sum 2^n x^{2n+1} / (2n+1)!!`, all terms positive.
fn erf_positive_series(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    TWO_OVER_SQRT_PI * (-x2).exp() * sum
}

/// Continued fraction for `erfc`, valid for `x >= 2`.
fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated with the modified Lentz method.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let an = n as f64 / 2.0;
        d = x + an * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI * (-x * x).exp() / f
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < 3.0 {
        erf_positive_series(ax)
    } else {
        1.0 - erfc_continued_fraction(ax)
    };
    v.copysign(x)
}

/// Complementary error function, accurate in relative terms for large `x`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 2.0 {
        erfc_continued_fraction(x)
    } else if x >= 0.0 {
        1.0 - erf_positive_series(x)
    } else {
        2.0 - erfc(-x)
    }
}

/// `e^{-x^2} erfi(x)`, finite for every real `x`.
pub fn erfi_scaled(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < 6.0 {
        (-ax * ax).exp() * erfi_series(ax)
    } else {
        // asymptotic: erfi(x) ~ e^{x^2}/(x sqrt(pi)) * sum (2n-1)!!/(2x^2)^n
        let inv = 1.0 / (2.0 * ax * ax);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 1.0;
        loop {
            let next = term * (2.0 * n - 1.0) * inv;
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
            n += 1.0;
        }
        FRAC_1_SQRT_PI * sum / ax
    };
    v.copysign(x)
}

/// Power series `2/sqrt(pi) sum x^{2n+1}/(n! (2n+1))`; every term positive.
fn erfi_series(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    let mut power = x; // x^{2n+1}/n!
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        power *= x2 / n;
        let term = power / (2.0 * n + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    TWO_OVER_SQRT_PI * sum
}

/// Imaginary error function `erfi(x) = -i erf(i x)`. Overflows to infinity
/// beyond `|x| ~ 26.6`; use [`erfi_scaled`] there.
pub fn erfi(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 6.0 {
        erfi_series(ax).copysign(x)
    } else {
        let s = erfi_scaled(ax);
        (s * (ax * ax).exp()).copysign(x)
    }
}

/// `(erf(x), erfi(x))` for finite real `x`.
pub fn erf_pair(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "erf_pair needs a finite argument, got {x}"
        )));
    }
    Ok((erf(x), erfi(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Reference values from 40-digit series evaluation.
    const ERF_REF: [(f64, f64); 5] = [
        (0.5, 0.520_499_877_813_046_5),
        (1.0, 0.842_700_792_949_714_9),
        (2.5, 0.999_593_047_982_555_0),
        (4.0, 0.999_999_984_582_742_1),
        (7.0, 1.0),
    ];
    const ERFI_REF: [(f64, f64); 4] = [
        (0.5, 0.614_952_094_696_511_0),
        (1.0, 1.650_425_758_797_542_9),
        (2.5, 130.395_755_013_246_93),
        (4.0, 1_296_959.730_717_639_2),
    ];

    #[test]
    fn odd_functions_vanish_at_origin() {
        assert_eq!(erf_pair(0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn erf_matches_reference() {
        for (x, v) in ERF_REF {
            assert!(rel(erf(x), v) < 1e-14, "erf({x})");
            assert!(rel(erf(-x), -v) < 1e-14);
        }
    }

    #[test]
    fn erfi_matches_reference() {
        for (x, v) in ERFI_REF {
            assert!(rel(erfi(x), v) < 1e-13, "erfi({x}) = {} vs {v}", erfi(x));
        }
        assert!(rel(erfi(7.0), 1.553_486_253_460_504e20) < 1e-12);
    }

    #[test]
    fn erfc_keeps_relative_accuracy_in_tail() {
        assert!(rel(erfc(2.5), 4.069_520_174_449_589_4e-4) < 1e-13);
        assert!(rel(erfc(4.0), 1.541_725_790_028_001_9e-8) < 1e-13);
        assert!(rel(erfc(7.0), 4.183_825_607_779_414_4e-23) < 1e-13);
        assert!(rel(erfc(-1.0), 1.842_700_792_949_715) < 1e-15);
    }

    #[test]
    fn scaled_erfi_is_continuous_at_the_switch() {
        assert!(rel(erfi_scaled(5.999_999_999), 0.095_396_208_985_486_108) < 1e-13);
        assert!(rel(erfi_scaled(6.000_000_001), 0.095_396_208_952_735_424) < 1e-13);
        assert!(rel(erfi_scaled(10.0), 0.056_705_394_232_887_594) < 1e-13);
        assert!(erfi_scaled(1e3).is_finite());
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(erf_pair(f64::NAN).is_err());
        assert!(erf_pair(f64::INFINITY).is_err());
    }
}
