//! Exponent of the left tail of a proper fixed point.

use crate::error::{Error, Result};
use crate::model::{marginal_h, SystemConfig};

/// Solves `alpha * Lbar(beta) = v` for the selection-weighted marginal `H`,
/// where `Lbar(beta) = int_0^inf e^{-beta z} (1 - H(z)) dz`.
///
/// `Lbar` decreases from the mean of `H` to zero, so a root exists exactly
/// when `alpha * mean(H) > v`.
pub fn beta_solve(cfg: &SystemConfig, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::ParamRange(format!(
            "speed must be positive, got {v}"
        )));
    }
    let h = marginal_h(cfg)?;
    let alpha = cfg.alpha();
    let g = |b: f64| alpha * h.lbar(b) - v;
    if g(0.0) <= 0.0 {
        return Err(Error::NoRoot(format!(
            "alpha * mean(H) = {} does not exceed v = {v}",
            alpha * h.mean()
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoRoot("left-tail exponent is unbounded".into()));
        }
    }
    // bisection to a tight bracket, then secant steps kept inside it
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (g(a), g(b));
    for _ in 0..50 {
        if ga == gb || b - a <= 1e-15 * b {
            break;
        }
        let s = b - gb * (b - a) / (gb - ga);
        let s = if s > lo && s < hi { s } else { 0.5 * (lo + hi) };
        let gs = g(s);
        if gs > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        (a, ga, b, gb) = (b, gb, s, gs);
        if gs.abs() < 1e-15 * v {
            return Ok(s);
        }
    }
    Ok(0.5 * (lo + hi))
}
