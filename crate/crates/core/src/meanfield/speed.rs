//! Range of traveling-wave speeds and the proper free fixed point.

use serde::{Deserialize, Serialize};

use super::defp::{defp_integrate, DefpOptions};
use super::kernel::HOperator;
use super::result::{Classification, FixedPointResult};
use crate::error::{Error, Result};
use crate::model::{marginal_h, SystemConfig};
use crate::numeric::integrate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProbe {
    pub v: f64,
    /// Classification label, or the error code of a probe without a proper
    /// left tail.
    pub outcome: String,
}

/// Bracketed speed range. `min_bracket` holds the largest speed whose
/// shooting solution hits the axis and the smallest one that does not;
/// `max_bracket` the largest speed that is not improper and the smallest
/// that is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRange {
    pub v_min: f64,
    pub v_max: f64,
    pub tol_v: f64,
    pub min_bracket: (f64, f64),
    pub max_bracket: (f64, f64),
    pub probes: Vec<SpeedProbe>,
    /// Every class completes only when all components do, so the system is
    /// work conserving and `v_min = v_max = sum_j sigma_j d_j E xi_j`.
    pub analytic_fallback: bool,
}

impl SpeedRange {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.v_min + self.v_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Hit,
    Proper,
    Improper,
}

fn probe(
    cfg: &SystemConfig,
    v: f64,
    opts: &DefpOptions,
    log: &mut Vec<SpeedProbe>,
) -> Result<Kind> {
    let (kind, label) = match defp_integrate(cfg, v, opts) {
        Ok(r) => {
            let k = match r.classification {
                Classification::HitAxis { .. } => Kind::Hit,
                Classification::ProperFree => Kind::Proper,
                _ => Kind::Improper,
            };
            (k, r.classification.label().to_string())
        }
        Err(Error::NoRoot(_)) => (Kind::Improper, "NO_ROOT".to_string()),
        // a plateau too low to separate from zero: within the range up to
        // the grid resolution
        Err(Error::ClassificationAmbiguous(_)) => {
            (Kind::Proper, "CLASSIFICATION_AMBIGUOUS".to_string())
        }
        Err(e) => return Err(e),
    };
    log.push(SpeedProbe { v, outcome: label });
    Ok(kind)
}

/// Lower and upper bounds on wave speeds from the smallest and largest
/// possible expected displacement per job: `sum_j sigma_j k_j E min(xi)`
/// and `sum_j sigma_j d_j E xi`.
pub(crate) fn displacement_bounds(cfg: &SystemConfig) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    for c in cfg.classes.iter().filter(|c| c.sigma > 0.0) {
        let dist = c
            .sizes
            .iid_dist()
            .ok_or_else(|| Error::UnknownFamily("speed range needs iid component sizes".into()))?;
        let top = dist
            .support_max()
            .unwrap_or_else(|| dist.effective_max(1e-14));
        let emin = integrate(|z| dist.tail(z).powi(c.d as i32), 0.0, top, 1e-12);
        lo += c.sigma * c.k as f64 * emin;
    }
    let hi = cfg.alpha() * marginal_h(cfg)?.mean();
    Ok((lo, hi))
}

/// Brackets `[v_min, v_max]` to `tol_v` by bisection over the shooting
/// classification.
pub fn speed_range(cfg: &SystemConfig, tol_v: f64, opts: &DefpOptions) -> Result<SpeedRange> {
    if !(tol_v > 0.0) {
        return Err(Error::ParamRange(format!(
            "tol_v must be positive, got {tol_v}"
        )));
    }
    let (lo, hi) = displacement_bounds(cfg)?;
    if cfg
        .classes
        .iter()
        .filter(|c| c.sigma > 0.0)
        .all(|c| c.k == c.d)
    {
        return Ok(SpeedRange {
            v_min: hi,
            v_max: hi,
            tol_v,
            min_bracket: (hi, hi),
            max_bracket: (hi, hi),
            probes: Vec::new(),
            analytic_fallback: true,
        });
    }
    let mut probes = Vec::new();
    let mut found = Vec::new();
    // v_min: boundary of the hitting speeds
    let (mut a, mut b) = (lo, hi);
    while b - a > tol_v {
        let m = 0.5 * (a + b);
        let k = probe(cfg, m, opts, &mut probes)?;
        found.push((m, k));
        if k == Kind::Hit {
            a = m;
        } else {
            b = m;
        }
    }
    let min_bracket = (a, b);
    // v_max: boundary of the improper speeds, reusing earlier probes
    let mut c = found
        .iter()
        .filter(|(_, k)| *k != Kind::Improper)
        .map(|p| p.0)
        .fold(lo, f64::max);
    let mut d = found
        .iter()
        .filter(|(_, k)| *k == Kind::Improper)
        .map(|p| p.0)
        .fold(hi, f64::min);
    while d - c > tol_v {
        let m = 0.5 * (c + d);
        if probe(cfg, m, opts, &mut probes)? == Kind::Improper {
            d = m;
        } else {
            c = m;
        }
    }
    Ok(SpeedRange {
        v_min: 0.5 * (a + b),
        v_max: 0.5 * (c + d),
        tol_v,
        min_bracket,
        max_bracket: (c, d),
        probes,
        analytic_fallback: false,
    })
}

/// Proper free fixed point: bisects the lower end of the speed range to
/// `1e-12` relative and returns the first solution that is not hitting
/// the axis there, which is proper up to the grid resolution.
pub fn free_fp(cfg: &SystemConfig, opts: &DefpOptions) -> Result<FixedPointResult> {
    let opts = &DefpOptions {
        refine: false,
        ..*opts
    };
    let range = speed_range(cfg, 1e-3, opts)?;
    if range.analytic_fallback {
        return Err(Error::ClassificationAmbiguous(
            "every class is work conserving; the wave shape is not classified".into(),
        ));
    }
    let (mut a, mut b) = range.min_bracket;
    let mut above: Option<FixedPointResult> = None;
    while b - a > 1e-12 * b {
        let m = 0.5 * (a + b);
        match defp_integrate(cfg, m, opts) {
            Ok(r) if matches!(r.classification, Classification::HitAxis { .. }) => a = m,
            Ok(r) => {
                b = m;
                above = Some(r);
            }
            Err(Error::NoRoot(_)) | Err(Error::ClassificationAmbiguous(_)) => {
                b = m;
                above = None;
            }
            Err(e) => return Err(e),
        }
    }
    let r = match above {
        Some(r) => r,
        None => defp_integrate(cfg, b, opts)?,
    };
    match r.classification {
        Classification::ProperFree => Ok(r),
        other => Err(Error::ClassificationAmbiguous(format!(
            "solution at v = {b} is {}, not proper",
            other.label()
        ))),
    }
}

/// `|v / lambda - int h| / (v / lambda)` for a proper free fixed point.
///
/// The field is resampled at half its grid step, `lambda h` is evaluated
/// there and past the right end until it vanishes, and integrated with
/// Simpson's rule; the flux left of the grid is `v (1 - x_first)`.
pub fn wave_flux_identity(fp: &FixedPointResult, cfg: &SystemConfig) -> Result<f64> {
    if fp.classification != Classification::ProperFree {
        return Err(Error::NotFreeFp(fp.classification.label().into()));
    }
    let v = fp.v;
    let lambda = cfg.lambda();
    let grid = fp.field.grid();
    let step = 0.5 * fp.grid.dx;
    let (w0, w1) = (grid[0], *grid.last().expect("non-empty"));
    let body = ((w1 - w0) / step).round() as usize;
    let mut x: Vec<f64> = (0..=body)
        .map(|i| fp.field.eval(w0 + i as f64 * step))
        .collect();
    let op = HOperator::new(cfg, step)?;
    let mut sweep = op.sweep();
    let mut f = Vec::with_capacity(x.len());
    for n in 0..x.len() {
        f.push(sweep.commit(&x[..=n]));
    }
    let peak = f.iter().copied().fold(0.0, f64::max);
    let max_extra = (200.0 / step) as usize;
    for _ in 0..max_extra {
        if *f.last().expect("non-empty") <= 1e-16 * peak {
            break;
        }
        x.push(0.0);
        f.push(sweep.commit(&x));
    }
    let mut total = 0.0;
    let pairs = (f.len() - 1) / 2;
    for p in 0..pairs {
        total += step / 3.0 * (f[2 * p] + 4.0 * f[2 * p + 1] + f[2 * p + 2]);
    }
    if (f.len() - 1) % 2 == 1 {
        let n = f.len();
        total += 0.5 * step * (f[n - 2] + f[n - 1]);
    }
    total += v * (1.0 - x[0]);
    let target = v / lambda;
    Ok((target - total / lambda).abs() / target)
}
