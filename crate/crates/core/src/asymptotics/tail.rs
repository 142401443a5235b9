//! Standard normal tail and its Mills-ratio substitute.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `Psi(x) = P(N(0,1) > x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `exp(-x^2/2) / (x sqrt(2 pi))`, the leading term of `Psi(x)` as `x -> inf`.
pub fn mills_tail(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Mills-ratio tail needs x > 0, got {x}")));
    }
    Ok((-0.5 * x * x).exp() / (x * (2.0 * PI).sqrt()))
}

/// `ln Psi(x)`, finite for every real `x`.
///
/// Beyond the range where `Psi` is a normal double the asymptotic series
/// `1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8` is used for the correction factor.
pub fn ln_normal_tail(x: f64) -> f64 {
    if x < 30.0 {
        return normal_tail(x).ln();
    }
    let y = 1.0 / (x * x);
    let series = 1.0 - y * (1.0 - y * (3.0 - y * (15.0 - 105.0 * y)));
    -0.5 * x * x - x.ln() - LN_SQRT_2PI + series.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed in 50-digit arithmetic.
    const REFERENCE: &[(f64, f64)] = &[
        (-8.0, 0.999_999_999_999_999_377_9),
        (-3.0, 0.998_650_101_968_369_905_47),
        (-1.0, 0.841_344_746_068_542_948_59),
        (0.0, 0.5),
        (0.5, 0.308_537_538_725_986_896_36),
        (1.0, 0.158_655_253_931_457_051_41),
        (1.96, 0.024_997_895_148_220_436_213),
        (3.0, 0.001_349_898_031_630_094_526_7),
        (5.0, 2.866_515_718_791_939_116_7e-7),
        (8.0, 6.220_960_574_271_784_123_5e-16),
        (10.0, 7.619_853_024_160_526_066e-24),
        (20.0, 2.753_624_118_606_233_695_1e-89),
        (30.0, 4.906_713_927_148_187_059_5e-198),
        (37.0, 5.725_571_222_524_576_822_7e-300),
        (37.5, 4.605_353_009_581_954_843_8e-308),
    ];

    #[test]
    fn normal_tail_matches_reference() {
        for &(x, want) in REFERENCE {
            let got = normal_tail(x);
            assert!(((got - want) / want).abs() <= 1e-12, "Psi({x}) = {got:e}, want {want:e}");
        }
    }

    #[test]
    fn log_tail_matches_reference() {
        for &(x, want) in REFERENCE {
            let got = ln_normal_tail(x);
            assert!((got - want.ln()).abs() <= 1e-12 * want.ln().abs().max(1.0), "{x}");
        }
        // beyond double range the series keeps going
        let far = ln_normal_tail(100.0);
        assert!((far - (-5000.0 - 100f64.ln() - LN_SQRT_2PI - 1e-4)).abs() < 1e-6);
    }

    #[test]
    fn mills_ratio_overshoots_tail() {
        let r = mills_tail(10.0).unwrap() / normal_tail(10.0);
        assert!((r - 1.009_809_323_396_251_2).abs() < 1e-12);
        assert!((r - 1.00990).abs() < 1e-4);
        assert!(matches!(mills_tail(0.0), Err(Error::Domain(_))));
        assert!(mills_tail(-1.0).is_err());
    }
}
