//! Time integration of the mean-field dynamics and relaxation to the
//! minimum / maximum fixed points.
//!
//! Everything runs in the anchored frame, where particles drift left at
//! speed `v` and `d/dt x_w = v dx_w/dw + lambda h`. With `v > 0` one time
//! step of `tau = dx / v` moves every characteristic exactly one grid cell,
//! and the step is the trapezoidal rule along it,
//! `x'_i = x_{i+1} + tau (F_{i+1} + F'_i) / 2` with `F = lambda h`. `F'_i`
//! only depends on the new field at and left of `w_i`, so the implicit step
//! is solved point by point in one left-to-right sweep. Fixed points satisfy
//! the same trapezoidal relation as the shooting integrator. With `v = 0`
//! the grid stays put and Heun's method is used.

use super::defp::trapezoid_residual;
use super::kernel::HOperator;
use super::result::{Classification, FixedPointResult, GridSpec};
use crate::error::{Error, Result};
use crate::field::{levy_distance, Mode, TailField};
use crate::model::{marginal_h, Frame, SystemConfig};

const CORRECTOR_ITERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    pub dx: f64,
    /// Lévy distance between consecutive checks that counts as converged.
    pub tol: f64,
    /// Time between convergence checks.
    pub check_every: f64,
    /// Consecutive converged checks required.
    pub patience: usize,
    pub max_time: f64,
    /// Mass allowed beyond the grid before it is extended.
    pub tail_tol: f64,
    /// Longest grid, in units of the mean component size.
    pub max_len: f64,
    pub monotone_tol: f64,
    /// Stability factor: time steps are at most `cfl / (lambda dbar^2)`.
    pub cfl: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            dx: 0.02,
            tol: 1e-7,
            check_every: 1.0,
            patience: 3,
            max_time: 1e4,
            tail_tol: 1e-10,
            max_len: 400.0,
            monotone_tol: 1e-9,
            cfl: 0.25,
        }
    }
}

/// Fields of a mean-field trajectory at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<TailField>,
}

struct Relax {
    op: HOperator,
    v: f64,
    dt: f64,
    frame: Frame,
    start: f64,
    x: Vec<f64>,
    /// Mass parked at `+inf` by the initial state.
    top: f64,
    tail_tol: f64,
    max_points: usize,
    time: f64,
}

impl Relax {
    /// Grid step and time step: `dt = dx / v` for `v > 0`, both limited by
    /// the stability bound.
    fn steps(cfg: &SystemConfig, v: f64, dx: f64, cfl: f64) -> (f64, f64) {
        let lambda = cfg.lambda();
        let dbar = cfg.dbar() as f64;
        let dt_max = cfl / (lambda * dbar * dbar);
        if v > 0.0 {
            let dx = dx.min(v * dt_max);
            (dx, dx / v)
        } else {
            (dx, dt_max.min(dx))
        }
    }

    fn new(
        cfg: &SystemConfig,
        v: f64,
        dx: f64,
        dt: f64,
        start: f64,
        x: Vec<f64>,
        opts: &RelaxOptions,
    ) -> Result<Self> {
        let scale = marginal_h(cfg)?.mean();
        let top = *x.last().expect("non-empty");
        let max_points = ((opts.max_len * scale / dx).ceil() as usize).max(x.len() + 1);
        Ok(Relax {
            op: HOperator::new(cfg, dx)?,
            v,
            dt,
            frame: cfg.frame,
            start,
            x,
            top: if cfg.frame.right.is_some() { 0.0 } else { top },
            tail_tol: opts.tail_tol,
            max_points,
            time: 0.0,
        })
    }

    fn dx(&self) -> f64 {
        self.op.dx()
    }

    fn step(&mut self) -> Result<()> {
        let n = self.x.len() - 1;
        let right = self.frame.right.is_some();
        if self.v > 0.0 {
            let f = self.op.eval_all(&self.x);
            let tau = self.dt;
            let mut sweep = self.op.sweep();
            let mut y = Vec::with_capacity(n + 1);
            for i in 0..n {
                let base = self.x[i + 1] + 0.5 * tau * f[i + 1];
                y.push(self.x[i + 1] + tau * f[i + 1]);
                for _ in 0..CORRECTOR_ITERS {
                    let next = base + 0.5 * tau * sweep.trial(&y);
                    let done = (next - y[i]).abs() <= 1e-15;
                    y[i] = next;
                    if done {
                        break;
                    }
                }
                sweep.commit(&y);
            }
            y.push(if right {
                0.0
            } else {
                (self.x[n] + tau * f[n]).min(1.0)
            });
            self.x = y;
        } else {
            let dt = self.dt;
            let f1 = self.op.eval_all(&self.x);
            let mut y: Vec<f64> = self.x.iter().zip(&f1).map(|(x, f)| x + dt * f).collect();
            tidy(&mut y, right);
            let f2 = self.op.eval_all(&y);
            for i in 0..=n {
                self.x[i] += 0.5 * dt * (f1[i] + f2[i]);
            }
        }
        tidy(&mut self.x, right);
        self.time += self.dt;
        self.extend()
    }

    fn extend(&mut self) -> Result<()> {
        let n = self.x.len();
        let more = (n / 4).max(16);
        if self.frame.right.is_none() && self.x[n - 1] > self.top + self.tail_tol {
            let fill = self.top;
            self.x.extend(std::iter::repeat_n(fill, more));
        }
        if self.v > 0.0 && self.frame.left.is_none() && 1.0 - self.x[0] > self.tail_tol {
            self.x.splice(0..0, std::iter::repeat_n(1.0, more));
            self.start -= more as f64 * self.dx();
        }
        if self.x.len() > self.max_points {
            let (w, mass) = if self.x[self.x.len() - 1] > self.top + self.tail_tol {
                (self.end(), self.x[self.x.len() - 1] - self.top)
            } else {
                (self.start, 1.0 - self.x[0])
            };
            return Err(Error::GridExhausted { w, mass });
        }
        Ok(())
    }

    fn end(&self) -> f64 {
        self.start + (self.x.len() - 1) as f64 * self.dx()
    }

    fn advance(&mut self, duration: f64) -> Result<()> {
        let steps = (duration / self.dt - 1e-9).ceil().max(0.0) as usize;
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn field(&self) -> Result<TailField> {
        let grid = (0..self.x.len())
            .map(|i| self.start + i as f64 * self.dx())
            .collect();
        TailField::from_numeric(grid, self.x.clone(), Mode::Linear)
    }

    fn grid_spec(&self) -> GridSpec {
        GridSpec {
            dx: self.dx(),
            start: self.start,
            end: self.end(),
            points: self.x.len(),
        }
    }
}

/// Clamps to `[0, 1]`, restores monotonicity and pins the right boundary.
fn tidy(x: &mut [f64], right: bool) {
    let mut prev: f64 = 1.0;
    for v in x.iter_mut() {
        *v = v.clamp(0.0, prev);
        prev = *v;
    }
    if right {
        *x.last_mut().expect("non-empty") = 0.0;
    }
}

/// Resamples `x0` onto a uniform grid adapted to the frame.
/// Without drift nothing moves left, and the grid starts at the support so
/// that an atom there stays an atom.
fn initial_grid(x0: &TailField, frame: Frame, dx: f64, pad: f64, drift: bool) -> (f64, Vec<f64>) {
    let g = x0.grid();
    let lo = g[0].max(frame.lower());
    let hi = g[g.len() - 1].min(frame.upper());
    let left_pad = if drift { pad } else { 0.0 };
    let (start, end) = match (frame.left, frame.right) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, hi.max(a) + pad),
        (None, Some(b)) => (lo.min(b) - left_pad, b),
        (None, None) => (lo - left_pad, hi + pad),
    };
    let n = ((end - start) / dx).ceil().max(1.0) as usize;
    let start = if frame.right.is_some() && frame.left.is_none() {
        end - n as f64 * dx
    } else {
        start
    };
    let mut x: Vec<f64> = (0..=n).map(|i| x0.eval(start + i as f64 * dx)).collect();
    tidy(&mut x, frame.right.is_some());
    (start, x)
}

/// Mean-field trajectory from `x0` under `cfg.frame` and `cfg.speed`,
/// recorded every `record_every` time units (only at the horizon when
/// `None`). Fields are in the anchored frame, i.e. already shifted by the
/// drift.
pub fn ml_integrate(
    x0: &TailField,
    cfg: &SystemConfig,
    horizon: f64,
    record_every: Option<f64>,
    opts: &RelaxOptions,
) -> Result<Trajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::ParamRange(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    if x0.x_neg_inf() != 1.0 {
        return Err(Error::ParamRange("initial field with mass at -inf".into()));
    }
    cfg.frame.validate()?;
    let v = cfg.speed;
    if !(v >= 0.0) {
        return Err(Error::ParamRange(format!("speed must be >= 0, got {v}")));
    }
    let every = record_every.unwrap_or(horizon);
    let (dx, dt) = Relax::steps(cfg, v, opts.dx, opts.cfl);
    // time step dividing the recording period exactly
    let per = if every > 0.0 {
        (every / dt).ceil().max(1.0)
    } else {
        1.0
    };
    let dt = if every > 0.0 { every / per } else { dt };
    let dx = if v > 0.0 { v * dt } else { dx };
    let pad = 10.0 * marginal_h(cfg)?.mean();
    let (start, x) = initial_grid(x0, cfg.frame, dx, pad, v > 0.0);
    let mut r = Relax::new(cfg, v, dx, dt, start, x, opts)?;
    let mut times = vec![0.0];
    let mut fields = vec![r.field()?];
    if every > 0.0 {
        let records = (horizon / every - 1e-9).ceil() as usize;
        for k in 1..=records {
            for _ in 0..per as usize {
                r.step()?;
            }
            times.push((k as f64 * every).min(horizon));
            fields.push(r.field()?);
        }
    }
    Ok(Trajectory { times, fields })
}

/// Relaxation from the empty state of a one-sided frame to its minimum
/// (left-regulated) or maximum (right-regulated) fixed point.
pub fn ml_mfp(cfg: &SystemConfig, v: f64, opts: &RelaxOptions) -> Result<FixedPointResult> {
    if !(v > 0.0) {
        return Err(Error::ParamRange(format!(
            "speed must be positive, got {v}"
        )));
    }
    let left = match (cfg.frame.left, cfg.frame.right) {
        (Some(_), None) => true,
        (None, Some(_)) => false,
        _ => {
            return Err(Error::ParamRange(
                "relaxation to an extreme fixed point needs a one-sided frame".into(),
            ))
        }
    };
    let boundary = if left {
        cfg.frame.lower()
    } else {
        cfg.frame.upper()
    };
    let (dx, dt) = Relax::steps(cfg, v, opts.dx, opts.cfl);
    let pad = 10.0 * marginal_h(cfg)?.mean();
    let (start, x) = initial_grid(&TailField::point_mass(boundary), cfg.frame, dx, pad, true);
    let mut r = Relax::new(cfg, v, dx, dt, start, x, opts)?;
    let escape = |e: Error| match e {
        Error::GridExhausted { w, mass } => {
            Error::NoProperFp(format!("mass {mass:.2e} keeps escaping past w = {w:.1}"))
        }
        e => e,
    };
    let outcome = converge(&mut r, opts, Some(left), |r| {
        if left && 1.0 - r.x[0] < r.tail_tol {
            return Err(Error::NoProperFp(
                "the boundary atom emptied: mass escapes to +inf".into(),
            ));
        }
        if !left && r.x.len() > 1 && r.x[r.x.len() - 2] < r.tail_tol {
            return Err(Error::NoProperFp("mass escapes to -inf".into()));
        }
        Ok(())
    });
    outcome.map_err(escape)?;
    let residual = trapezoid_residual(&r.op, &r.x, v, 0);
    let (classification, load) = if left {
        (Classification::LeftRegulated { load: r.x[0] }, Some(r.x[0]))
    } else {
        (Classification::HitAxis { w_star: boundary }, None)
    };
    Ok(FixedPointResult {
        field: r.field()?,
        v,
        classification,
        load,
        residual,
        beta_used: None,
        grid: r.grid_spec(),
    })
}

/// Runs until the Lévy distance between checks stays below `tol` for
/// `patience` checks. `monotone` asks for a non-decreasing (`Some(true)`)
/// or non-increasing (`Some(false)`) sweep.
fn converge(
    r: &mut Relax,
    opts: &RelaxOptions,
    monotone: Option<bool>,
    guard: impl Fn(&Relax) -> Result<()>,
) -> Result<()> {
    let mut prev = r.field()?;
    let mut prev_x = r.x.clone();
    let mut prev_start = r.start;
    let mut calm = 0;
    while calm < opts.patience {
        if r.time > opts.max_time {
            return Err(Error::MaxIters((r.time / r.dt).round() as usize));
        }
        r.advance(opts.check_every)?;
        guard(r)?;
        if let Some(up) = monotone {
            check_monotone(
                &prev_x,
                prev_start,
                &r.x,
                r.start,
                r.dx(),
                up,
                opts.monotone_tol,
            )?;
        }
        let cur = r.field()?;
        let d = levy_distance(&prev, &cur);
        calm = if d < opts.tol { calm + 1 } else { 0 };
        prev = cur;
        prev_x.clone_from(&r.x);
        prev_start = r.start;
    }
    Ok(())
}

fn check_monotone(
    old: &[f64],
    old_start: f64,
    new: &[f64],
    new_start: f64,
    dx: f64,
    up: bool,
    tol: f64,
) -> Result<()> {
    let offset = ((old_start - new_start) / dx).round() as isize;
    for (i, o) in old.iter().enumerate() {
        let j = i as isize + offset;
        if j < 0 || j as usize >= new.len() {
            continue;
        }
        let n = new[j as usize];
        let bad = if up { n < o - tol } else { n > o + tol };
        if bad {
            return Err(Error::MonotonicityViolated(format!(
                "x at w = {:.4} moved from {o:.12} to {n:.12}",
                new_start + j as f64 * dx
            )));
        }
    }
    Ok(())
}

/// Unique fixed point of the system regulated on both sides of the finite
/// frame, relaxed from the empty state.
pub fn two_sided_fp(cfg: &SystemConfig, v: f64, opts: &RelaxOptions) -> Result<FixedPointResult> {
    two_sided_from(cfg, v, opts, None)
}

pub(crate) fn two_sided_from(
    cfg: &SystemConfig,
    v: f64,
    opts: &RelaxOptions,
    warm: Option<&TailField>,
) -> Result<FixedPointResult> {
    let (a, b) = match (cfg.frame.left, cfg.frame.right) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => {
            return Err(Error::ParamRange(
                "two-sided solver needs a finite frame".into(),
            ))
        }
    };
    if !(v > 0.0) {
        return Err(Error::ParamRange(format!(
            "speed must be positive, got {v}"
        )));
    }
    let (dx, _) = Relax::steps(cfg, v, opts.dx.min((b - a) / 100.0), opts.cfl);
    let n = ((b - a) / dx).ceil() as usize;
    let dx = (b - a) / n as f64;
    let init = warm.cloned().unwrap_or_else(|| TailField::point_mass(a));
    let (start, x) = initial_grid(&init, cfg.frame, dx, 0.0, true);
    let mut r = Relax::new(cfg, v, dx, dx / v, start, x, opts)?;
    converge(&mut r, opts, None, |_| Ok(()))?;
    let residual = trapezoid_residual(&r.op, &r.x, v, 0);
    Ok(FixedPointResult {
        field: r.field()?,
        v,
        classification: Classification::TwoSided,
        load: Some(r.x[0]),
        residual,
        beta_used: None,
        grid: r.grid_spec(),
    })
}
