//! Bracketing solvers shared by the inversion routines.
//!
//! Only continuity and strict monotonicity are available for the maps we
//! invert, so everything here is plain bisection. Iteration stops once the
//! bracket is resolved to a few ulps of its upper end or can no longer be
//! split, which is what keeps ratios like `x / f^k(x)` accurate when the
//! preimage is many orders of magnitude below one.

use crate::error::{Error, Result};

/// Absolute accuracy every inversion must reach.
pub const TOL_INV: f64 = 1e-12;

/// Iteration cap for a single bisection.
pub const MAX_BISECTIONS: usize = 200;

fn resolved(lo: f64, hi: f64) -> bool {
    let mid = 0.5 * (lo + hi);
    mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi.abs()
}

/// Solves `f(x) = target` for an increasing `f` on `[lo, hi]`.
///
/// `f` is only evaluated strictly inside the bracket, so an endpoint where
/// `f` is undefined (such as `x / f(x)` at zero) is fine as long as the
/// caller knows the target lies between the endpoint limits.
pub fn bisect_increasing<F>(mut f: F, target: f64, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= hi) {
        return Err(Error::Numeric(format!("empty bracket [{lo}, {hi}]")));
    }
    for _ in 0..MAX_BISECTIONS {
        if resolved(lo, hi) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let value = f(mid)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite value {value} at x = {mid}")));
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= TOL_INV {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::Numeric(format!(
            "bisection did not converge within {MAX_BISECTIONS} steps, bracket [{lo}, {hi}]"
        )))
    }
}

/// Locates a sign change of `h` inside `[lo, hi]`, given `h(lo)` and `h(hi)`
/// of opposite signs (zero counts as either). Returns the end of the final
/// bracket on the `lo` side, so that `h` keeps the sign it had at `lo`.
pub fn bisect_sign_change<F>(mut h: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo_nonneg = h(lo)? >= 0.0;
    for _ in 0..MAX_BISECTIONS {
        if resolved(lo.min(hi), lo.max(hi)) {
            return Ok(lo);
        }
        let mid = 0.5 * (lo + hi);
        if (h(mid)? >= 0.0) == lo_nonneg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (hi - lo).abs() <= TOL_INV {
        Ok(lo)
    } else {
        Err(Error::Numeric("sign-change bisection did not converge".into()))
    }
}

/// Golden-section search for the maximum of a unimodal `h` on `[lo, hi]`.
pub fn golden_max<F>(mut h: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut hc = h(c)?;
    let mut hd = h(d)?;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if hc >= hd {
            hi = d;
            d = c;
            hd = hc;
            c = hi - INV_PHI * (hi - lo);
            hc = h(c)?;
        } else {
            lo = c;
            c = d;
            hc = hd;
            d = lo + INV_PHI * (hi - lo);
            hd = h(d)?;
        }
    }
    Ok(if hc >= hd { (c, hc) } else { (d, hd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_square_root() {
        let x = bisect_increasing(|x| Ok(x * x), 2.0, 0.0, 2.0).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_keeps_relative_accuracy_near_zero() {
        let target = 3e-9;
        let x = bisect_increasing(|x| Ok(x), target, 0.0, 1.0).unwrap();
        assert!(((x - target) / target).abs() < 1e-14);
    }

    #[test]
    fn sign_change_returns_lo_side() {
        let x = bisect_sign_change(|x| Ok(0.5 - x), 0.0, 1.0).unwrap();
        assert!(x <= 0.5 && 0.5 - x < 1e-15);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| Ok(-(x - 0.3) * (x - 0.3)), 0.0, 1.0).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!(v <= 0.0);
    }
}
