//! Shooting for the fixed-point equation `-v x' = lambda h` from its
//! exponential left tail.

use super::beta::beta_solve;
use super::kernel::HOperator;
use super::result::{Classification, FixedPointResult, GridSpec};
use crate::error::{Error, Result};
use crate::field::{Mode, TailField};
use crate::model::SystemConfig;

/// Level of `1 - x` at the first grid point.
const TAIL_FLOOR: f64 = 1e-13;
const CORRECTOR_ITERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefpOptions {
    /// `x` at the anchor `w_0 = 0` of the exponential tail.
    pub eps0: f64,
    /// Grid step for `beta = 1`; the step used is `dx * min(1, 1/beta)`.
    pub dx: f64,
    /// Integration range to the right of the anchor, in units of `1/beta`.
    pub span: f64,
    pub tol_zero: f64,
    pub slope_tol: f64,
    /// Length of the zero/plateau confirmation window, in units of `1/beta`.
    pub confirm: f64,
    /// Refine once before reporting an ambiguous classification.
    pub refine: bool,
}

impl Default for DefpOptions {
    fn default() -> Self {
        DefpOptions {
            eps0: 0.999,
            dx: 0.01,
            span: 200.0,
            tol_zero: 1e-6,
            slope_tol: 1e-8,
            confirm: 5.0,
            refine: true,
        }
    }
}

pub fn defp_integrate(cfg: &SystemConfig, v: f64, opts: &DefpOptions) -> Result<FixedPointResult> {
    if !(opts.eps0 > 0.0 && opts.eps0 < 1.0 - TAIL_FLOOR) {
        return Err(Error::ParamRange(format!(
            "eps0 must lie in (0, 1), got {}",
            opts.eps0
        )));
    }
    if !(opts.dx > 0.0 && opts.span > 0.0 && opts.tol_zero > 0.0) {
        return Err(Error::ParamRange(
            "grid step, span and tol_zero must be positive".into(),
        ));
    }
    let beta = beta_solve(cfg, v)?;
    match shoot(cfg, v, beta, opts) {
        Ok(r) => Ok(r),
        Err(Error::ClassificationAmbiguous(_)) if opts.refine => {
            let fine = DefpOptions {
                dx: 0.5 * opts.dx,
                span: 2.0 * opts.span,
                refine: false,
                ..*opts
            };
            shoot(cfg, v, beta, &fine)
        }
        Err(e) => Err(e),
    }
}

fn shoot(cfg: &SystemConfig, v: f64, beta: f64, opts: &DefpOptions) -> Result<FixedPointResult> {
    let dx = opts.dx * (1.0 / beta).min(1.0);
    let op = HOperator::new(cfg, dx)?;
    let tail_len = ((1.0 - opts.eps0) / TAIL_FLOOR).ln() / beta;
    let n_tail = (tail_len / dx).ceil() as usize;
    let start = -(n_tail as f64) * dx;
    let x0: Vec<f64> = (0..=n_tail)
        .map(|i| 1.0 - (1.0 - opts.eps0) * (beta * (start + i as f64 * dx)).exp())
        .collect();
    let limits = MarchLimits {
        max_points: n_tail + 1 + (opts.span / beta / dx).ceil() as usize,
        tol_zero: opts.tol_zero,
        slope_tol: opts.slope_tol,
        confirm: opts.confirm / beta,
    };
    let (x, outcome) = march(&op, v, start, x0, &limits);
    let Some(class) = outcome else {
        return Err(Error::ClassificationAmbiguous(format!(
            "neither zero nor plateau within {} of the anchor at dx = {dx} (x = {:.3e})",
            opts.span / beta,
            x.last().copied().unwrap_or(f64::NAN)
        )));
    };
    let residual = trapezoid_residual(&op, &x, v, n_tail);
    let (field, grid) = finish(x, start, dx, class)?;
    Ok(FixedPointResult {
        field,
        v,
        classification: class,
        load: None,
        residual,
        beta_used: Some(beta),
        grid,
    })
}

pub(crate) struct MarchLimits {
    pub max_points: usize,
    pub tol_zero: f64,
    pub slope_tol: f64,
    pub confirm: f64,
}

/// Integrates `-v x' = lambda h` forward from the prescribed values `x`
/// on the uniform grid starting at `start`, with a trapezoidal
/// predictor-corrector. Stops on a zero crossing (`HitAxis`, the crossing
/// point itself is not stored), on a confirmed approach to zero
/// (`ProperFree`) or on a confirmed plateau (`ImproperRight`); `None` when
/// the grid budget runs out first.
pub(crate) fn march(
    op: &HOperator,
    v: f64,
    start: f64,
    mut x: Vec<f64>,
    lim: &MarchLimits,
) -> (Vec<f64>, Option<Classification>) {
    let dx = op.dx();
    let mut f = Vec::with_capacity(x.len());
    let mut sweep = op.sweep();
    for n in 0..x.len() {
        f.push(sweep.commit(&x[..=n]));
    }
    let tau = dx / v;
    let mut zero_at: Option<f64> = None;
    let mut flat_since: Option<f64> = None;
    while x.len() < lim.max_points {
        let n = x.len();
        let w = start + n as f64 * dx;
        let (xp, fp) = (x[n - 1], f[n - 1]);
        x.push(xp - tau * fp);
        for _ in 0..CORRECTOR_ITERS {
            let fn_ = sweep.trial(&x);
            let next = xp - 0.5 * tau * (fp + fn_);
            let done = (next - x[n]).abs() <= 1e-15;
            x[n] = next;
            if done {
                break;
            }
        }
        if x[n] <= 0.0 {
            let w_star = w - dx * x[n] / (x[n] - xp);
            x.pop();
            return (x, Some(Classification::HitAxis { w_star }));
        }
        f.push(sweep.commit(&x));
        let xn = x[n];
        if xn <= lim.tol_zero {
            let z = *zero_at.get_or_insert(w);
            if w - z >= lim.confirm {
                return (x, Some(Classification::ProperFree));
            }
            continue;
        }
        let slope = (xp - xn) / dx;
        if xn > 10.0 * lim.tol_zero && slope.abs() < lim.slope_tol {
            let s = *flat_since.get_or_insert(w);
            if w - s >= lim.confirm {
                return (x, Some(Classification::ImproperRight { eps_star: xn }));
            }
        } else {
            flat_since = None;
        }
    }
    (x, None)
}

/// Builds the output field of a march: appends the crossing point of a
/// hit, and zeroes the last value of a proper tail.
pub(crate) fn finish(
    mut x: Vec<f64>,
    start: f64,
    dx: f64,
    class: Classification,
) -> Result<(TailField, GridSpec)> {
    let mut grid: Vec<f64> = (0..x.len()).map(|i| start + i as f64 * dx).collect();
    let end = match class {
        Classification::HitAxis { w_star } => {
            let last = *grid.last().expect("non-empty");
            if w_star - last > 1e-9 * dx {
                grid.push(w_star);
                x.push(0.0);
            } else {
                *x.last_mut().expect("non-empty") = 0.0;
            }
            w_star
        }
        Classification::ProperFree => {
            // the march ran a confirmation window past tol_zero, so what is
            // dropped here is far below it
            *x.last_mut().expect("non-empty") = 0.0;
            *grid.last().expect("non-empty")
        }
        _ => *grid.last().expect("non-empty"),
    };
    let points = grid.len();
    let field = TailField::from_numeric(grid, x, Mode::Linear)?;
    Ok((
        field,
        GridSpec {
            dx,
            start,
            end,
            points,
        },
    ))
}

/// `sup_n |v (x_n - x_{n-1}) / dx + (F_{n-1} + F_n) / 2|` over `n > from`,
/// with `F = lambda h` recomputed from scratch.
pub(crate) fn trapezoid_residual(op: &HOperator, x: &[f64], v: f64, from: usize) -> f64 {
    let f = op.eval_all(x);
    let dx = op.dx();
    (from + 1..x.len())
        .map(|n| (v * (x[n] - x[n - 1]) / dx + 0.5 * (f[n - 1] + f[n])).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Frame, JobClass, ScalarDist};

    fn exp_pair() -> SystemConfig {
        SystemConfig::new(
            vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::FREE,
            0.0,
        )
    }

    #[test]
    fn artificial_system_is_exact_exponential() {
        let cfg = SystemConfig::new(
            vec![JobClass::iid(1, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::FREE,
            0.0,
        );
        let r = defp_integrate(&cfg, 0.5, &DefpOptions::default()).unwrap();
        let Classification::HitAxis { w_star } = r.classification else {
            panic!("{:?}", r.classification);
        };
        let fp = r.field.shifted(-w_star);
        let err = fp
            .grid()
            .iter()
            .zip(fp.values())
            .map(|(w, x)| (x - (1.0 - w.exp())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "sup error {err}");
        assert!(r.residual < 1e-9);
    }

    #[test]
    fn slow_wave_hits_axis() {
        let r = defp_integrate(&exp_pair(), 0.5, &DefpOptions::default()).unwrap();
        assert!(matches!(r.classification, Classification::HitAxis { .. }));
    }

    #[test]
    fn fast_wave_levels_off() {
        let r = defp_integrate(&exp_pair(), 1.5, &DefpOptions::default()).unwrap();
        let Classification::ImproperRight { eps_star } = r.classification else {
            panic!("{:?}", r.classification);
        };
        assert!(eps_star > 1e-3);
        let fine = DefpOptions {
            dx: 0.005,
            ..Default::default()
        };
        let r2 = defp_integrate(&exp_pair(), 1.5, &fine).unwrap();
        let Classification::ImproperRight { eps_star: e2 } = r2.classification else {
            panic!("{:?}", r2.classification);
        };
        assert!((eps_star - e2).abs() < 1e-4, "{eps_star} vs {e2}");
    }

    fn hit_at_zero(v: f64, eps0: f64) -> TailField {
        let r = defp_integrate(
            &exp_pair(),
            v,
            &DefpOptions {
                eps0,
                ..Default::default()
            },
        )
        .unwrap();
        let Classification::HitAxis { w_star } = r.classification else {
            panic!("{:?}", r.classification);
        };
        r.field.shifted(-w_star)
    }

    #[test]
    fn left_tail_level_does_not_matter() {
        for v in [0.5, 0.8] {
            let a = hit_at_zero(v, 0.995);
            let b = hit_at_zero(v, 0.999);
            assert!(a.sup_distance(&b) < 1e-4, "v={v}: {}", a.sup_distance(&b));
        }
    }

    #[test]
    fn inverse_difference_is_non_increasing() {
        let (slow, fast) = (hit_at_zero(0.5, 0.999), hit_at_zero(0.8, 0.999));
        let psi: Vec<f64> = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .map(|u| fast.inverse(u) - slow.inverse(u))
            .collect();
        let worst = psi.windows(2).map(|p| p[1] - p[0]).fold(f64::MIN, f64::max);
        assert!(worst <= 1e-3, "largest increase {worst}");
        assert!(psi[0] > psi[psi.len() - 1]);
    }

    #[test]
    fn fields_are_strictly_decreasing_before_the_hit() {
        let x = hit_at_zero(0.5, 0.999);
        assert!(x.values().windows(2).all(|p| p[1] < p[0]));
    }
}
