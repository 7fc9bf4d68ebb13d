//! Fixed points of systems regulated on one side.

use super::defp::{defp_integrate, finish, march, trapezoid_residual, DefpOptions, MarchLimits};
use super::kernel::HOperator;
use super::result::{Classification, FixedPointResult};
use super::speed::{speed_range, SpeedRange};
use crate::error::{Error, Result};
use crate::field::TailField;
use crate::model::{marginal_h, Frame, SystemConfig};

/// Speed-range tolerance used by the regulated solvers' guards.
const GUARD_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Default)]
pub struct RegulatedOptions {
    pub defp: DefpOptions,
    /// Precomputed speed range for the guards; computed when absent.
    pub range: Option<SpeedRange>,
}

fn range_for(cfg: &SystemConfig, opts: &RegulatedOptions) -> Result<SpeedRange> {
    match &opts.range {
        Some(r) => Ok(r.clone()),
        None => speed_range(
            &cfg.with_frame(Default::default()),
            GUARD_TOL,
            &DefpOptions {
                refine: false,
                ..opts.defp
            },
        ),
    }
}

/// Unique proper fixed point of the system regulated at `frame.left` for
/// `v > v_max`, found by shooting on the load: the solution started from
/// `x_A = rho` hits the axis for loads below the fixed point's and levels
/// off above it.
pub fn left_regulated_fp(
    cfg: &SystemConfig,
    v: f64,
    opts: &RegulatedOptions,
) -> Result<FixedPointResult> {
    let a = match (cfg.frame.left, cfg.frame.right) {
        (Some(a), None) => a,
        _ => {
            return Err(Error::ParamRange(
                "left-regulated solver needs frame [A, inf)".into(),
            ))
        }
    };
    let range = range_for(cfg, opts)?;
    if !(v > range.v_max) {
        return Err(Error::SpeedInWaveRange {
            v,
            bound: format!("v_max = {}", range.v_max),
        });
    }
    let d = &opts.defp;
    let scale = marginal_h(cfg)?.mean();
    let dx = d.dx * scale.min(1.0);
    let op = HOperator::new(cfg, dx)?;
    let lim = MarchLimits {
        max_points: 1 + (d.span * scale / dx).ceil() as usize,
        tol_zero: d.tol_zero,
        slope_tol: d.slope_tol,
        confirm: d.confirm * scale,
    };
    let shoot = |rho: f64| march(&op, v, a, vec![rho], &lim);
    let hits = |o: &Option<Classification>| matches!(o, Some(Classification::HitAxis { .. }));

    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = None;
    while hi - lo > 1e-13 {
        let m = 0.5 * (lo + hi);
        let (x, o) = shoot(m);
        if hits(&o) {
            lo = m;
        } else {
            hi = m;
            best = Some((m, x, o));
        }
    }
    let (rho, x, outcome) = match best {
        Some(b) => b,
        None => {
            let (x, o) = shoot(hi);
            (hi, x, o)
        }
    };
    if outcome != Some(Classification::ProperFree) {
        return Err(Error::NoProperFp(format!(
            "shooting from the boundary ends {} at load {rho}",
            outcome.map_or("unclassified", |c| c.label())
        )));
    }
    let residual = trapezoid_residual(&op, &x, v, 0);
    let (field, grid) = finish(x, a, dx, Classification::ProperFree)?;
    Ok(FixedPointResult {
        field,
        v,
        classification: Classification::LeftRegulated { load: rho },
        load: Some(rho),
        residual,
        beta_used: None,
        grid,
    })
}

/// Loads of the left-regulated fixed points at each speed.
pub fn load_curve(
    cfg: &SystemConfig,
    v_list: &[f64],
    opts: &RegulatedOptions,
) -> Result<Vec<(f64, f64)>> {
    let opts = RegulatedOptions {
        range: Some(range_for(cfg, opts)?),
        ..opts.clone()
    };
    v_list
        .iter()
        .map(|&v| {
            let fp = left_regulated_fp(cfg, v, &opts)?;
            Ok((v, fp.load.expect("left-regulated load")))
        })
        .collect()
}

/// Fixed point of the system regulated at `frame.right = B` for
/// `v < v_min`: the shooting solution shifted so that it reaches zero at
/// `B`.
pub fn right_regulated_fp(
    cfg: &SystemConfig,
    v: f64,
    opts: &RegulatedOptions,
) -> Result<FixedPointResult> {
    let b = match (cfg.frame.left, cfg.frame.right) {
        (None, Some(b)) => b,
        _ => {
            return Err(Error::ParamRange(
                "right-regulated solver needs frame (-inf, B]".into(),
            ))
        }
    };
    let range = range_for(cfg, opts)?;
    if !(v < range.v_min) {
        return Err(Error::SpeedInWaveRange {
            v,
            bound: format!("v_min = {}", range.v_min),
        });
    }
    let r = defp_integrate(cfg, v, &opts.defp)?;
    let Classification::HitAxis { w_star } = r.classification else {
        return Err(Error::SpeedInWaveRange {
            v,
            bound: format!("solution is {}", r.classification.label()),
        });
    };
    let shift = b - w_star;
    Ok(FixedPointResult {
        field: r.field.shifted(shift),
        classification: Classification::HitAxis { w_star: b },
        grid: super::result::GridSpec {
            start: r.grid.start + shift,
            end: b,
            ..r.grid
        },
        ..r
    })
}

/// Fixed point on the finite frame `[a, b]` by shooting on the load: the
/// solution from `x_a = rho` must reach zero exactly at `b`. `None` when
/// even the largest representable load reaches zero before `b`.
pub(crate) fn two_sided_shoot(
    cfg: &SystemConfig,
    v: f64,
    a: f64,
    b: f64,
    opts: &DefpOptions,
) -> Result<Option<FixedPointResult>> {
    let scale = marginal_h(cfg)?.mean();
    let dx = opts.dx * scale.min(1.0).min((b - a) / 100.0);
    let op = HOperator::new(cfg, dx)?;
    let lim = MarchLimits {
        max_points: 2 + ((b - a) / dx).ceil() as usize,
        tol_zero: 0.0,
        slope_tol: 0.0,
        confirm: f64::INFINITY,
    };
    let hit_at = |rho: f64| -> Option<f64> {
        match march(&op, v, a, vec![rho], &lim).1 {
            Some(Classification::HitAxis { w_star }) => Some(w_star),
            _ => None,
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if hit_at(1.0 - f64::EPSILON).is_some_and(|w| w < b) {
        return Ok(None);
    }
    while hi - lo > 4.0 * f64::EPSILON {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        match hit_at(m) {
            Some(w) if w <= b => lo = m,
            _ => hi = m,
        }
    }
    let (mut x, outcome) = march(&op, v, a, vec![lo], &lim);
    let Some(Classification::HitAxis { .. }) = outcome else {
        return Ok(None);
    };
    let residual = trapezoid_residual(&op, &x, v, 0);
    // the crossing sits within rounding of b; place it there
    let mut grid: Vec<f64> = (0..x.len()).map(|i| a + i as f64 * dx).collect();
    while grid.last().is_some_and(|w| *w >= b - 1e-9 * dx) {
        grid.pop();
        x.pop();
    }
    grid.push(b);
    x.push(0.0);
    let points = grid.len();
    Ok(Some(FixedPointResult {
        field: TailField::from_numeric(grid, x, crate::field::Mode::Linear)?,
        v,
        classification: Classification::TwoSided,
        load: Some(lo),
        residual,
        beta_used: None,
        grid: super::result::GridSpec {
            dx,
            start: a,
            end: b,
            points,
        },
    }))
}

/// Speed at which the two-sided fixed point on `[0, B]` has its median at
/// `B / 2`, for each width `B`; the last value estimates the wave speed.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSpeedEstimate {
    pub per_width: Vec<(f64, f64)>,
    pub v: f64,
}

/// Bisects the speed on the median of the two-sided fixed point, which
/// decreases as faster drift pushes mass towards the left boundary.
pub fn median_speed_estimate(
    cfg: &SystemConfig,
    widths: &[f64],
    tol_v: f64,
    opts: &DefpOptions,
) -> Result<MedianSpeedEstimate> {
    let (lo, hi) = super::speed::displacement_bounds(cfg)?;
    let mut per_width = Vec::with_capacity(widths.len());
    for &b in widths {
        let c = cfg.with_frame(Frame::both(0.0, b));
        let (mut a, mut z) = (lo.max(1e-3 * hi), hi);
        while z - a > tol_v {
            let m = 0.5 * (a + z);
            let right_heavy = match two_sided_shoot(&c, m, 0.0, b, opts)? {
                Some(fp) => fp.field.inverse(0.5) > 0.5 * b,
                None => true,
            };
            if right_heavy {
                a = m;
            } else {
                z = m;
            }
        }
        per_width.push((b, 0.5 * (a + z)));
    }
    let v = per_width.last().map(|p| p.1).ok_or(Error::EmptyInput)?;
    Ok(MedianSpeedEstimate { per_width, v })
}

/// Restriction of a field to `(-inf, w*]` where `x_{w*} = eps`,
/// renormalized to `(x - eps) / (1 - eps - delta)` with
/// `delta = 1 - x_{-inf}`: the fixed point of the `(eps, delta)`-reduced
/// system regulated on the right at `w*`. Returns `(w*, field)`.
pub fn truncate_fixed_point(x: &TailField, eps: f64) -> Result<(f64, TailField)> {
    let delta = 1.0 - x.x_neg_inf();
    if !(eps > x.x_pos_inf() && eps < 1.0 - delta) {
        return Err(Error::ParamRange(format!(
            "level {eps} outside ({}, {})",
            x.x_pos_inf(),
            1.0 - delta
        )));
    }
    let w_star = x.inverse(eps);
    let scale = 1.0 - eps - delta;
    let mut grid: Vec<f64> = x.grid().iter().copied().filter(|w| *w < w_star).collect();
    let mut values: Vec<f64> = grid
        .iter()
        .map(|w| ((x.eval(*w) - eps) / scale).clamp(0.0, 1.0))
        .collect();
    grid.push(w_star);
    values.push(0.0);
    let field = TailField::new(grid, values, x.mode(), 1.0)?;
    Ok((w_star, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::levy_distance;
    use crate::meanfield::relax::{ml_mfp, two_sided_fp, RelaxOptions};
    use crate::meanfield::speed::free_fp;
    use crate::model::{JobClass, ScalarDist};

    fn exp_cfg(frame: Frame) -> SystemConfig {
        SystemConfig::new(
            vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
            frame,
            0.0,
        )
    }

    fn centered_free() -> TailField {
        let fp = free_fp(&exp_cfg(Frame::FREE), &DefpOptions::default()).unwrap();
        fp.field.center().unwrap()
    }

    #[test]
    fn loads_follow_flow_balance_and_decrease() {
        let curve = load_curve(
            &exp_cfg(Frame::left(0.0)),
            &[1.25, 2.0, 4.0],
            &RegulatedOptions::default(),
        )
        .unwrap();
        for (v, rho) in &curve {
            assert!((rho - 1.0 / v).abs() < 1e-3, "v={v} rho={rho}");
        }
        assert!(curve.windows(2).all(|p| p[1].1 < p[0].1));
    }

    #[test]
    fn shooting_agrees_with_relaxation_on_the_left() {
        let cfg = exp_cfg(Frame::left(0.0));
        let shot = left_regulated_fp(&cfg, 2.0, &RegulatedOptions::default()).unwrap();
        let relaxed = ml_mfp(&cfg, 2.0, &RelaxOptions::default()).unwrap();
        assert!((shot.load.unwrap() - relaxed.load.unwrap()).abs() < 1e-3);
        assert!(levy_distance(&shot.field, &relaxed.field) < 1e-2);
    }

    #[test]
    fn left_fp_tends_to_free_wave_near_critical_speed() {
        let cfg = exp_cfg(Frame::left(0.0));
        let free = centered_free();
        let mut last = f64::INFINITY;
        for v in [1.2, 1.05, 1.01] {
            let fp = left_regulated_fp(&cfg, v, &RegulatedOptions::default()).unwrap();
            let d = levy_distance(&fp.field.center().unwrap(), &free);
            assert!(d < last, "v={v}: {d} after {last}");
            last = d;
            if v == 1.01 {
                assert!((fp.load.unwrap() - 0.99).abs() < 1e-3);
            }
        }
        assert!(last < 0.02);
    }

    #[test]
    fn frame_and_speed_guards() {
        let o = RegulatedOptions::default();
        let e = left_regulated_fp(&exp_cfg(Frame::left(0.0)), 0.9, &o).unwrap_err();
        assert_eq!(e.code().as_str(), "SPEED_IN_WAVE_RANGE");
        let e = right_regulated_fp(&exp_cfg(Frame::right(0.0)), 1.1, &o).unwrap_err();
        assert_eq!(e.code().as_str(), "SPEED_IN_WAVE_RANGE");
        let e = left_regulated_fp(&exp_cfg(Frame::right(0.0)), 2.0, &o).unwrap_err();
        assert_eq!(e.code().as_str(), "PARAM_RANGE");
    }

    #[test]
    fn right_fp_is_exact_for_artificial_system() {
        let cfg = SystemConfig::new(
            vec![JobClass::iid(1, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::right(0.0),
            0.0,
        );
        let o = RegulatedOptions {
            range: Some(super::super::speed::SpeedRange {
                v_min: 1.0,
                v_max: 1.0,
                tol_v: 0.0,
                min_bracket: (1.0, 1.0),
                max_bracket: (1.0, 1.0),
                probes: Vec::new(),
                analytic_fallback: true,
            }),
            ..Default::default()
        };
        let fp = right_regulated_fp(&cfg, 0.5, &o).unwrap();
        let err = fp
            .field
            .grid()
            .iter()
            .map(|w| (fp.field.eval(*w) - (1.0 - w.exp())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "sup error {err}");
        assert_eq!(fp.classification, Classification::HitAxis { w_star: 0.0 });
    }

    #[test]
    fn right_fp_spreads_towards_free_wave() {
        let cfg = exp_cfg(Frame::right(0.0));
        let free = centered_free();
        let phi_free = free.phi_moment(1).unwrap();
        let mut last = (0.0, f64::INFINITY);
        for v in [0.8, 0.95, 0.99, 0.999] {
            let fp = right_regulated_fp(&cfg, v, &RegulatedOptions::default()).unwrap();
            let c = fp.field.center().unwrap();
            let (phi, d) = (c.phi_moment(1).unwrap(), levy_distance(&c, &free));
            assert!(phi > last.0 && d < last.1, "v={v}");
            assert!(phi < phi_free * 1.01);
            last = (phi, d);
        }
        assert!(last.1 < 0.01);
    }

    #[test]
    fn two_sided_shooting_agrees_with_relaxation() {
        let cfg = exp_cfg(Frame::both(0.0, 8.0));
        let opts = RelaxOptions {
            dx: 0.05,
            tol: 1e-6,
            ..Default::default()
        };
        for v in [0.9, 1.5] {
            let relaxed = two_sided_fp(&cfg, v, &opts).unwrap();
            let shot = two_sided_shoot(&cfg, v, 0.0, 8.0, &DefpOptions::default())
                .unwrap()
                .unwrap();
            assert!(levy_distance(&relaxed.field, &shot.field) < 1e-2, "v={v}");
            assert!((relaxed.load.unwrap() - shot.load.unwrap()).abs() < 1e-2);
        }
    }

    #[test]
    fn median_centering_recovers_wave_speed() {
        let est = median_speed_estimate(
            &exp_cfg(Frame::FREE),
            &[8.0, 16.0, 32.0],
            1e-4,
            &DefpOptions::default(),
        )
        .unwrap();
        assert_eq!(est.per_width.len(), 3);
        assert!((est.v - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn truncated_free_wave_solves_reduced_system() {
        let base = exp_cfg(Frame::FREE);
        let free = free_fp(&base, &DefpOptions::default()).unwrap();
        for eps in [0.2, 0.5] {
            let (w_star, cut) = truncate_fixed_point(&free.field, eps).unwrap();
            assert!((free.field.eval(w_star) - eps).abs() < 1e-9);
            let reduced = crate::model::reduce_system(&base, eps, 0.0)
                .unwrap()
                .with_frame(Frame::right(w_star));
            let fp = right_regulated_fp(&reduced, free.v, &RegulatedOptions::default()).unwrap();
            assert!(levy_distance(&cut, &fp.field) < 1e-3, "eps={eps}");
        }
        assert!(truncate_fixed_point(&free.field, 1.0).is_err());
    }
}
