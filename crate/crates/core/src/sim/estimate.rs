//! Long-run estimators built on the simulator: advance velocity and
//! stationary snapshots.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TailField;
use crate::model::ValidatedConfig;

use super::state::{Event, EventStream, SimState};
use super::stats::{batch_means, linear_trend, Estimate};

/// Runs the system up to clock time `t`; an arrival that would land after
/// `t` is kept (with its remaining waiting time) for the next call.
fn run_to<R: Rng + ?Sized>(
    state: &mut SimState,
    stream: &mut EventStream,
    rng: &mut R,
    pending: &mut Option<Event>,
    t: f64,
) -> Result<()> {
    loop {
        let ev = pending.take().unwrap_or_else(|| stream.draw(rng));
        let at = state.clock() + ev.dt;
        if at > t {
            state.advance(t - state.clock());
            *pending = Some(Event { dt: at - t, ..ev });
            return Ok(());
        }
        state.apply(&ev)?;
    }
}

fn quantile(positions: &mut [f64], nu: f64) -> f64 {
    let idx = ((nu * (positions.len() - 1) as f64).floor() as usize).min(positions.len() - 1);
    *positions.select_nth_unstable_by(idx, f64::total_cmp).1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub estimate: f64,
    pub half_width: f64,
}

impl From<Estimate> for RateEstimate {
    fn from(e: Estimate) -> Self {
        RateEstimate {
            estimate: e.mean,
            half_width: e.half_width,
        }
    }
}

/// Advance velocity of the free system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    /// Mean displacement rate of all particles.
    pub mean_based: RateEstimate,
    /// Displacement rate of the `nu`-quantile location.
    pub quantile_based: RateEstimate,
    pub nu: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub n: usize,
}

pub const DEFAULT_BATCHES: usize = 20;

/// Estimates `v_n` over `[burn_in, horizon]` from a free, driftless run
/// started with every particle at the origin.
pub fn estimate_vn<R: Rng + ?Sized>(
    cfg: &ValidatedConfig,
    n: usize,
    horizon: f64,
    burn_in: f64,
    nu: f64,
    rng: &mut R,
) -> Result<VelocityEstimate> {
    if !cfg.frame.is_free() || cfg.speed != 0.0 {
        return Err(Error::FrameNotFree);
    }
    if !(0.0 <= burn_in && burn_in < horizon) || !(0.0 < nu && nu < 1.0) {
        return Err(Error::ParamRange(format!(
            "need 0 <= burn_in < horizon and 0 < nu < 1, got {burn_in}, {horizon}, {nu}"
        )));
    }
    let mut stream = EventStream::new(cfg, n)?;
    let mut state = SimState::uniform(cfg, n, 0.0)?;
    let mut pending = None;
    run_to(&mut state, &mut stream, rng, &mut pending, burn_in)?;

    let b = DEFAULT_BATCHES;
    let len = (horizon - burn_in) / b as f64;
    let mut mean_rates = Vec::with_capacity(b);
    let mut q_rates = Vec::with_capacity(b);
    let mut last_disp = state.displacement();
    let mut last_q = quantile(&mut state.positions(), nu);
    for i in 1..=b {
        run_to(
            &mut state,
            &mut stream,
            rng,
            &mut pending,
            burn_in + i as f64 * len,
        )?;
        let disp = state.displacement();
        let q = quantile(&mut state.positions(), nu);
        mean_rates.push((disp - last_disp) / (n as f64 * len));
        q_rates.push((q - last_q) / len);
        last_disp = disp;
        last_q = q;
    }
    Ok(VelocityEstimate {
        mean_based: batch_means(&mean_rates).into(),
        quantile_based: batch_means(&q_rates).into(),
        nu,
        horizon,
        burn_in,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub n: usize,
    pub burn_in: f64,
    pub window: f64,
    pub stride: f64,
    pub keep_snapshots: bool,
    /// Initial locations; defaults to the left boundary (right boundary
    /// for right-regulated frames, origin for the free frame).
    pub initial: Option<Vec<f64>>,
}

impl StationaryOptions {
    /// Burn-in heuristic `10 n / lambda`; there are no mixing-time bounds,
    /// so callers should check sensitivity to it.
    pub fn with_defaults(cfg: &ValidatedConfig, n: usize, window: f64, stride: f64) -> Self {
        StationaryOptions {
            n,
            burn_in: 10.0 * n as f64 / cfg.lambda(),
            window,
            stride,
            keep_snapshots: false,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    /// Time-averaged empirical field (pooled snapshots; centered for the
    /// free frame).
    pub pooled: TailField,
    pub snapshots: Vec<TailField>,
    pub times: Vec<f64>,
    pub phi1_series: Vec<f64>,
    pub phi1: Estimate,
    /// Fraction of particles strictly right of the left boundary.
    pub busy_fraction: Option<Estimate>,
    pub unstable_suspected: bool,
}

pub fn stationary_sample<R: Rng + ?Sized>(
    cfg: &ValidatedConfig,
    opts: &StationaryOptions,
    rng: &mut R,
) -> Result<StationarySample> {
    if !(opts.window > 0.0 && opts.stride > 0.0 && opts.burn_in >= 0.0) {
        return Err(Error::ParamRange(
            "window and stride must be positive".into(),
        ));
    }
    let n = opts.n;
    let frame = cfg.frame;
    let start = match (&opts.initial, frame.left, frame.right) {
        (Some(v), _, _) => v.clone(),
        (None, Some(a), _) => vec![a; n],
        (None, None, Some(b)) => vec![b; n],
        (None, None, None) => vec![0.0; n],
    };
    let mut stream = EventStream::new(cfg, n)?;
    let mut state = SimState::new(cfg, start)?;
    let mut pending = None;
    run_to(&mut state, &mut stream, rng, &mut pending, opts.burn_in)?;

    let free = frame.is_free();
    let left = frame.left.is_some();
    let b = DEFAULT_BATCHES;
    let batch_len = opts.window / b as f64;
    let snaps_total = (opts.window / opts.stride).floor() as usize;
    let t0 = opts.burn_in;

    // merge snapshot times with busy-batch boundaries
    let mut checkpoints: Vec<(f64, bool)> = (0..snaps_total)
        .map(|i| (t0 + (i as f64 + 0.5) * opts.stride, true))
        .chain((1..=b).map(|i| (t0 + i as f64 * batch_len, false)))
        .collect();
    checkpoints.sort_by(|x, y| x.0.total_cmp(&y.0));

    state.start_busy_window();
    let mut pooled = Vec::with_capacity(snaps_total * n);
    let mut snapshots = Vec::new();
    let mut times = Vec::with_capacity(snaps_total);
    let mut phi1_series = Vec::with_capacity(snaps_total);
    let mut busy_batches = Vec::with_capacity(b);
    let mut last_busy = 0.0;
    for (t, is_snapshot) in checkpoints {
        run_to(&mut state, &mut stream, rng, &mut pending, t)?;
        if is_snapshot {
            let mut pos = state.positions();
            if free {
                let m = pos.iter().sum::<f64>() / n as f64;
                pos.iter_mut().for_each(|w| *w -= m);
            }
            let field = TailField::from_samples(&pos)?;
            phi1_series.push(field.phi_moment(1)?);
            times.push(t);
            pooled.extend_from_slice(&pos);
            if opts.keep_snapshots {
                snapshots.push(field);
            }
        } else if left {
            let busy = state.busy_time();
            busy_batches.push((busy - last_busy) / (n as f64 * batch_len));
            last_busy = busy;
        }
    }
    if times.is_empty() {
        return Err(Error::ParamRange("window shorter than one stride".into()));
    }
    let groups = b.min(phi1_series.len());
    let per = phi1_series.len() / groups;
    let group_means: Vec<f64> = (0..groups)
        .map(|g| phi1_series[g * per..(g + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let phi1 = batch_means(&group_means);
    let finite_frame = frame.left.is_some() && frame.right.is_some();
    let unstable_suspected = !finite_frame && times.len() > 2 && {
        let trend = linear_trend(&times, &phi1_series);
        trend.significantly_positive()
            && trend.slope * opts.window > 0.25 * phi1.mean.abs().max(1e-12)
    };
    Ok(StationarySample {
        pooled: TailField::from_samples(&pooled)?,
        snapshots,
        times,
        phi1_series,
        phi1,
        busy_fraction: left.then(|| batch_means(&busy_batches)),
        unstable_suspected,
    })
}

/// One row of a recorded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub t: f64,
    pub quantile_05: f64,
    pub quantile_50: f64,
    pub quantile_95: f64,
    pub mean: f64,
    pub phi1: f64,
    /// Fraction of particles strictly right of the left boundary at `t`;
    /// empty without one.
    pub busy_fraction: Option<f64>,
}

/// Runs `n` particles from the default start to `horizon`, recording a row
/// every `every` time units (and at `horizon`). Snapshots are returned
/// alongside when `keep_snapshots` is set.
pub fn simulate_path<R: Rng + ?Sized>(
    cfg: &ValidatedConfig,
    n: usize,
    horizon: f64,
    every: f64,
    keep_snapshots: bool,
    rng: &mut R,
) -> Result<(Vec<PathRow>, Vec<TailField>)> {
    if !(horizon > 0.0 && horizon.is_finite() && every > 0.0) {
        return Err(Error::ParamRange(
            "horizon and recording interval must be positive".into(),
        ));
    }
    let frame = cfg.frame;
    let w0 = frame.left.or(frame.right).unwrap_or(0.0);
    let mut stream = EventStream::new(cfg, n)?;
    let mut state = SimState::uniform(cfg, n, w0)?;
    let mut pending = None;
    let steps = (horizon / every).ceil() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snaps = Vec::new();
    for k in 0..=steps {
        let t = (k as f64 * every).min(horizon);
        run_to(&mut state, &mut stream, rng, &mut pending, t)?;
        let mut pos = state.positions();
        let field = TailField::from_samples(&pos)?;
        rows.push(PathRow {
            t,
            quantile_05: quantile(&mut pos, 0.05),
            quantile_50: quantile(&mut pos, 0.5),
            quantile_95: quantile(&mut pos, 0.95),
            mean: pos.iter().sum::<f64>() / n as f64,
            phi1: field.phi_moment(1)?,
            busy_fraction: frame
                .left
                .map(|a| pos.iter().filter(|w| **w > a).count() as f64 / n as f64),
        });
        if keep_snapshots {
            snaps.push(field);
        }
    }
    Ok((rows, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_config, Frame, JobClass, ScalarDist, SystemConfig};
    use crate::sim::replica_rng;

    fn cfg(d: usize, k: usize, dist: ScalarDist, frame: Frame, v: f64) -> ValidatedConfig {
        validate_config(&SystemConfig::new(
            vec![JobClass::iid(d, k, 1.0, dist)],
            frame,
            v,
        ))
        .unwrap()
    }

    #[test]
    fn recorded_path_is_consistent() {
        let c = cfg(2, 1, ScalarDist::exp(1.0), Frame::left(0.0), 2.0);
        let (rows, snaps) =
            simulate_path(&c, 200, 50.0, 7.0, true, &mut replica_rng(4, 0)).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(snaps.len(), 9);
        assert_eq!(rows[8].t, 50.0);
        // everyone starts on the boundary
        assert_eq!(rows[0].busy_fraction, Some(0.0));
        for r in &rows {
            assert!(r.quantile_05 <= r.quantile_50 && r.quantile_50 <= r.quantile_95);
            assert!(r.quantile_05 >= 0.0 && r.phi1 >= 0.0);
        }
        let late: f64 = rows[4..]
            .iter()
            .map(|r| r.busy_fraction.unwrap())
            .sum::<f64>()
            / 5.0;
        assert!((late - 0.5).abs() < 0.1, "{late}");
        let free = cfg(2, 1, ScalarDist::exp(1.0), Frame::FREE, 0.0);
        let (rows, _) = simulate_path(&free, 20, 5.0, 1.0, false, &mut replica_rng(4, 0)).unwrap();
        assert!(rows.iter().all(|r| r.busy_fraction.is_none()));
    }

    #[test]
    fn regulated_frame_rejected() {
        let c = cfg(2, 1, ScalarDist::exp(1.0), Frame::left(0.0), 1.0);
        let err = estimate_vn(&c, 10, 10.0, 1.0, 0.5, &mut replica_rng(0, 0)).unwrap_err();
        assert_eq!(err.code().as_str(), "FRAME_NOT_FREE");
    }

    #[test]
    fn no_cancellation_velocity_is_total_work() {
        let c = cfg(2, 2, ScalarDist::exp(1.0), Frame::FREE, 0.0);
        let est = estimate_vn(&c, 50, 2000.0, 100.0, 0.5, &mut replica_rng(8, 0)).unwrap();
        let m = est.mean_based;
        assert!((m.estimate - 2.0).abs() <= m.half_width.max(0.02), "{m:?}");
    }

    #[test]
    fn work_conserving_velocity() {
        let c = cfg(2, 1, ScalarDist::exp(1.0), Frame::FREE, 0.0);
        let est = estimate_vn(&c, 100, 2000.0, 100.0, 0.5, &mut replica_rng(9, 0)).unwrap();
        let m = est.mean_based;
        assert!((m.estimate - 1.0).abs() <= m.half_width, "{m:?}");
    }

    #[test]
    fn finite_frame_never_unstable() {
        let c = cfg(2, 1, ScalarDist::exp(1.0), Frame::both(0.0, 1.0), 0.3);
        let opts = StationaryOptions {
            n: 50,
            burn_in: 50.0,
            window: 100.0,
            stride: 1.0,
            keep_snapshots: true,
            initial: None,
        };
        let s = stationary_sample(&c, &opts, &mut replica_rng(2, 0)).unwrap();
        assert!(!s.unstable_suspected);
        assert_eq!(s.snapshots.len(), 100);
        for f in &s.snapshots {
            assert!(f.grid()[0] >= 0.0 && *f.grid().last().unwrap() <= 1.0);
        }
    }

    #[test]
    fn busy_fraction_flow_balance() {
        let c = cfg(2, 1, ScalarDist::exp(1.0), Frame::left(0.0), 2.0);
        let opts = StationaryOptions {
            n: 200,
            burn_in: 50.0,
            window: 400.0,
            stride: 2.0,
            keep_snapshots: false,
            initial: None,
        };
        let s = stationary_sample(&c, &opts, &mut replica_rng(4, 0)).unwrap();
        let b = s.busy_fraction.unwrap();
        assert!((b.mean - 0.5).abs() < 0.02, "{b:?}");
    }
}
