//! Scalar solvers: golden-section search and safeguarded bisection.

use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol * max(1, |x|)`. Returns
/// `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (b - a) <= tol * x1.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes `f` over `(0, inf)` starting from the bracket `[guess/10, 10 guess]`.
///
/// When the maximizer lands on a bracket edge the bracket is expanded
/// geometrically (at most 40 times) before giving up.
pub fn bracketed_max(f: impl Fn(f64) -> f64, guess: f64, tol: f64) -> Result<(f64, f64)> {
    if !(guess > 0.0 && guess.is_finite()) {
        return Err(Error::Optimizer(format!("non-positive starting point {guess}")));
    }
    let (mut lo, mut hi) = (guess / 10.0, guess * 10.0);
    let mut probes = Vec::new();
    for _ in 0..40 {
        let (x, fx) = golden_section_max(&f, lo, hi, tol);
        probes.push((x, fx));
        let width = hi - lo;
        let near_lo = x - lo < 1e-6 * width;
        let near_hi = hi - x < 1e-6 * width;
        if !fx.is_finite() {
            break;
        }
        if near_lo {
            lo /= 10.0;
        } else if near_hi {
            hi *= 10.0;
        } else {
            return Ok((x, fx));
        }
    }
    Err(Error::Optimizer(format!("probed (x, f(x)) = {probes:?}")))
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (zero counts as either).
pub fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Optimizer(format!(
            "no sign change on [{lo}, {hi}]: f = ({fa}, {fb})"
        )));
    }
    let sa = fa.signum();
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= xtol {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands_when_max_is_outside() {
        let (x, _) = bracketed_max(|x: f64| -(x.ln() - 8.0f64.ln()).powi(2), 0.01, 1e-12).unwrap();
        assert!((x - 8.0).abs() < 1e-5, "{x}");
    }

    #[test]
    fn bisect_solves_cubic() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
