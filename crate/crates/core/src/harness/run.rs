//! Theory-vs-simulation experiments.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::spec::{
    config_hash, Cell, ExperimentKind, ExperimentReport, ExperimentSpec, NamedField, Provenance,
};
use crate::error::{Error, Result};
use crate::field::{levy_distance, Mode, TailField};
use crate::meanfield::{
    free_fp, left_regulated_fp, load_curve, right_regulated_fp, speed_range, wave_flux_identity,
    DefpOptions, FixedPointResult, RegulatedOptions, SpeedRange,
};
use crate::model::{validate_config, Frame, SystemConfig, ValidatedConfig};
use crate::sim::{
    batch_means, estimate_vn, replica_rng, stationary_sample, Estimate, StationaryOptions,
    DEFAULT_BATCHES,
};

/// Flux identity residual accepted for the solver's free wave.
const FLUX_TOL: f64 = 1e-2;

/// Runs the experiment named by `spec.kind` on the worker pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.kind {
        ExperimentKind::VnConvergence => run_vn_convergence(spec),
        ExperimentKind::SsaiLeft => run_ssai_left(spec),
        ExperimentKind::SsaiRight => run_ssai_right(spec),
        ExperimentKind::Phi1Bound => run_phi1_bound(spec),
        ExperimentKind::LoadCurve => run_load_curve(spec),
        ExperimentKind::SpeedRangeReport => run_speed_range_report(spec),
    }
}

fn in_pool<T: Send>(spec: &ExperimentSpec, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    spec.validate()?;
    match spec.workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::ParamRange(format!("worker pool: {e}")))?
            .install(f),
    }
}

/// Replica results of one cell, in replica order. Every (cell, replica)
/// pair has its own stream, so adding replicas or cells leaves the others
/// untouched.
fn replicate<T: Send>(
    spec: &ExperimentSpec,
    cell: u64,
    f: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..spec.replicas as u64)
        .into_par_iter()
        .map(|r| f(&mut replica_rng(spec.seed, (cell << 32) | r)))
        .collect()
}

/// Interval across replicas, or the single replica's own interval.
fn combine(ests: &[Estimate]) -> Estimate {
    if ests.len() == 1 {
        return ests[0];
    }
    batch_means(&ests.iter().map(|e| e.mean).collect::<Vec<_>>())
}

/// Pointwise average of fields.
fn average_fields(fields: &[TailField]) -> Result<TailField> {
    if fields.len() == 1 {
        return Ok(fields[0].clone());
    }
    let mut grid: Vec<f64> = fields
        .iter()
        .flat_map(|f| f.grid().iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let k = fields.len() as f64;
    let values = grid
        .iter()
        .map(|w| fields.iter().map(|f| f.eval(*w)).sum::<f64>() / k)
        .collect();
    let neg = fields.iter().map(|f| f.x_neg_inf()).sum::<f64>() / k;
    TailField::new(grid, values, Mode::Step, neg)
}

fn report(spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        experiment: spec.kind,
        config: cfg.clone(),
        provenance: Provenance {
            seed: spec.seed,
            replicas: spec.replicas,
            config_hash: config_hash(cfg)?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            grid: None,
        },
        cells: Vec::new(),
        assertions: Vec::new(),
        fields: Vec::new(),
    })
}

fn free_range(cfg: &SystemConfig, tol_v: f64) -> Result<SpeedRange> {
    speed_range(&cfg.with_frame(Frame::FREE), tol_v, &DefpOptions::default())
}

fn range_cells(rep: &mut ExperimentReport, range: &SpeedRange) {
    rep.cells.push(Cell::value("v_min", range.v_min));
    rep.cells.push(Cell::value("v_max", range.v_max));
}

/// Advance velocity against `n`, next to the solver's speed range.
pub fn run_vn_convergence(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    in_pool(spec, || {
        let cfg = validate_config(&spec.config.load()?)?;
        if !cfg.frame.is_free() || cfg.speed != 0.0 {
            return Err(Error::FrameNotFree);
        }
        let mut rep = report(spec, &cfg)?;
        let range = if cfg.all_iid() {
            Some(free_range(&cfg, spec.tol_v)?)
        } else {
            None
        };
        if let Some(r) = &range {
            range_cells(&mut rep, r);
        }
        let mut quantile = Vec::new();
        let mut halves_ok = true;
        for (i, &n) in spec.n_list.iter().enumerate() {
            let horizon = spec.horizon(i)?;
            let burn_in = spec.burn_in_share * horizon;
            let runs = replicate(spec, i as u64, |rng| {
                estimate_vn(&cfg, n, horizon, burn_in, spec.nu, rng)
            })?;
            let to_est = |f: &dyn Fn(&crate::sim::VelocityEstimate) -> crate::sim::RateEstimate| -> Vec<Estimate> {
                runs.iter()
                    .map(|r| {
                        let e = f(r);
                        Estimate {
                            mean: e.estimate,
                            half_width: e.half_width,
                            batches: 0,
                        }
                    })
                    .collect()
            };
            let mean = combine(&to_est(&|r| r.mean_based));
            let q = combine(&to_est(&|r| r.quantile_based));
            let mut c = Cell::estimate("v_mean", mean).at(Some(n), None);
            let mut cq = Cell::estimate("v_quantile", q).at(Some(n), None);
            if let Some(r) = &range {
                c = c.against(r.midpoint());
                cq = cq.against(r.midpoint());
            }
            rep.cells.push(c);
            rep.cells.push(cq);
            quantile.push(q);
            if runs.len() >= 4 {
                let ests = to_est(&|r| r.mean_based);
                let (a, b) = ests.split_at(ests.len() / 2);
                let (a, b) = (combine(a), combine(b));
                halves_ok &= (a.mean - b.mean).abs() <= a.half_width + b.half_width;
            }
        }
        if spec.replicas >= 4 {
            rep.assert(
                "replica_halves_agree",
                halves_ok,
                "mean-based estimates of the two replica halves".into(),
            );
        }
        if let (Some(r), true) = (&range, cfg.flags.all_iid_ihr) {
            // distance to the solver bracket may only shrink, up to the intervals
            let dist = |e: &Estimate| (r.v_min - e.mean).max(e.mean - r.v_max).max(0.0);
            let bad: Vec<usize> = quantile
                .windows(2)
                .enumerate()
                .filter(|(_, w)| dist(&w[1]) > dist(&w[0]) + w[0].half_width + w[1].half_width)
                .map(|(i, _)| spec.n_list[i + 1])
                .collect();
            rep.assert(
                "monotone_approach",
                bad.is_empty(),
                format!(
                    "n where the quantile velocity moves away from [{}, {}]: {bad:?}",
                    r.v_min, r.v_max
                ),
            );
        }
        Ok(rep)
    })
}

struct StationaryCell {
    pooled: TailField,
    /// Mean Lévy distance of single snapshots to the reference field.
    snapshot_levy: Option<Estimate>,
    phi1: Estimate,
    busy: Option<Estimate>,
    unstable: bool,
}

fn stationary_cell(
    spec: &ExperimentSpec,
    cfg: &ValidatedConfig,
    i: usize,
    cell: u64,
    reference: Option<&TailField>,
) -> Result<StationaryCell> {
    let n = spec.n_list[i];
    let mut opts = StationaryOptions::with_defaults(cfg, n, spec.horizon(i)?, spec.stride);
    if let Some(b) = spec.burn_in {
        opts.burn_in = b;
    }
    opts.keep_snapshots = reference.is_some();
    let runs = replicate(spec, cell, |rng| {
        let mut s = stationary_sample(cfg, &opts, rng)?;
        let levy = reference.map(|x| {
            let d: Vec<f64> = s.snapshots.iter().map(|f| levy_distance(f, x)).collect();
            let groups = DEFAULT_BATCHES.min(d.len());
            let per = d.len() / groups;
            let means: Vec<f64> = d
                .chunks_exact(per)
                .take(groups)
                .map(|c| c.iter().sum::<f64>() / per as f64)
                .collect();
            batch_means(&means)
        });
        s.snapshots = Vec::new();
        Ok((s, levy))
    })?;
    let snapshot_levy = runs
        .iter()
        .map(|r| r.1)
        .collect::<Option<Vec<_>>>()
        .map(|l| combine(&l));
    let runs: Vec<_> = runs.into_iter().map(|r| r.0).collect();
    let pooled = average_fields(&runs.iter().map(|r| r.pooled.clone()).collect::<Vec<_>>())?;
    let phi1 = combine(&runs.iter().map(|r| r.phi1).collect::<Vec<_>>());
    let busy = runs
        .iter()
        .map(|r| r.busy_fraction)
        .collect::<Option<Vec<_>>>()
        .map(|b| combine(&b));
    Ok(StationaryCell {
        pooled,
        snapshot_levy,
        phi1,
        busy,
        unstable: runs.iter().any(|r| r.unstable_suspected),
    })
}

fn speeds(spec: &ExperimentSpec, cfg: &SystemConfig) -> Vec<f64> {
    if spec.speeds.is_empty() {
        vec![cfg.speed]
    } else {
        spec.speeds.clone()
    }
}

/// Stationary empirical fields against a regulated fixed point per speed.
fn run_ssai(
    spec: &ExperimentSpec,
    left: bool,
    solve: impl Fn(&SystemConfig, f64, &RegulatedOptions) -> Result<FixedPointResult> + Sync,
) -> Result<ExperimentReport> {
    in_pool(spec, || {
        let base = spec.config.load()?;
        let ok_frame = if left {
            matches!((base.frame.left, base.frame.right), (Some(_), None))
        } else {
            matches!((base.frame.left, base.frame.right), (None, Some(_)))
        };
        if !ok_frame {
            return Err(Error::ParamRange(format!(
                "{} needs a {} frame",
                spec.kind.as_str(),
                if left { "[A, inf)" } else { "(-inf, B]" }
            )));
        }
        let mut rep = report(spec, &base)?;
        let range = free_range(&base, spec.tol_v)?;
        range_cells(&mut rep, &range);
        let opts = RegulatedOptions {
            range: Some(range),
            ..Default::default()
        };
        for (vi, v) in speeds(spec, &base).into_iter().enumerate() {
            let fp = solve(&base, v, &opts)?;
            let cfg = validate_config(&base.with_speed(v))?;
            rep.provenance.grid = Some(fp.grid);
            if let Some(load) = fp.load {
                rep.cells.push(Cell::value("load", load).at(None, Some(v)));
            }
            let mut levy = Vec::new();
            let mut last_busy = None;
            for i in 0..spec.n_list.len() {
                let n = spec.n_list[i];
                let tag = ((vi as u64) << 16) | i as u64;
                let cell = stationary_cell(spec, &cfg, i, tag, Some(&fp.field))?;
                let pooled = levy_distance(&cell.pooled, &fp.field);
                rep.cells
                    .push(Cell::value("levy_pooled_to_fp", pooled).at(Some(n), Some(v)));
                let snap = cell.snapshot_levy.expect("snapshots kept");
                rep.cells
                    .push(Cell::estimate("levy_to_fp", snap).at(Some(n), Some(v)));
                let d = snap.mean;
                if let Some(b) = cell.busy {
                    let mut c = Cell::estimate("busy_fraction", b).at(Some(n), Some(v));
                    if let Some(load) = fp.load {
                        c = c.against(load);
                    }
                    rep.cells.push(c);
                    last_busy = Some(b);
                }
                if cell.unstable {
                    rep.cells
                        .push(Cell::value("unstable_suspected", 1.0).at(Some(n), Some(v)));
                }
                levy.push(d);
            }
            rep.assert(
                &format!("levy_decreasing_v{v}"),
                levy.windows(2).all(|w| w[1] < w[0]),
                format!("Lévy distances {levy:?} over n = {:?}", spec.n_list),
            );
            if let (Some(tol), Some(last)) = (spec.levy_tol, levy.last()) {
                rep.assert(
                    &format!("levy_final_v{v}"),
                    *last <= tol,
                    format!("{last} against {tol}"),
                );
            }
            if let (Some(b), Some(load)) = (last_busy, fp.load) {
                rep.assert(
                    &format!("busy_fraction_v{v}"),
                    (b.mean - load).abs() <= spec.busy_tol,
                    format!(
                        "busy fraction {} against load {load} +- {}",
                        b.mean, spec.busy_tol
                    ),
                );
            }
            rep.fields.push(NamedField {
                name: format!("fp_v{v}"),
                field: fp.field,
            });
        }
        Ok(rep)
    })
}

/// Left-regulated stationary fields against the unique proper fixed
/// point, for speeds above the wave range.
pub fn run_ssai_left(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_ssai(spec, true, left_regulated_fp)
}

/// Right-regulated stationary fields against the maximum fixed point, for
/// speeds below the wave range.
pub fn run_ssai_right(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_ssai(spec, false, right_regulated_fp)
}

/// Weighted least-squares slope of `y` on `x` with weights `1 / se^2`,
/// tested one-sided at 95%.
fn significant_upward(x: &[f64], y: &[Estimate]) -> (f64, bool) {
    let w: Vec<f64> = y
        .iter()
        .map(|e| (e.half_width / 1.96).max(1e-12).powi(-2))
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a.mean * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, e), b)| b * (a - mx) * (e.mean - my))
        .sum();
    let slope = sxy / sxx;
    (slope, slope > 1.645 / sxx.sqrt())
}

fn mean_field_phi1(cfg: &SystemConfig, v: f64) -> Option<f64> {
    let opts = RegulatedOptions::default();
    let fp = match (cfg.frame.left, cfg.frame.right) {
        (Some(_), None) => left_regulated_fp(&cfg.with_speed(v), v, &opts),
        (None, Some(_)) => right_regulated_fp(&cfg.with_speed(v), v, &opts),
        _ => return None,
    };
    fp.ok()?.field.phi_moment(1).ok()
}

/// Centered first moment of the stationary field over the `(n, v)` grid.
pub fn run_phi1_bound(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    in_pool(spec, || {
        let base = spec.config.load()?;
        let mut rep = report(spec, &base)?;
        for (vi, v) in speeds(spec, &base).into_iter().enumerate() {
            let cfg = validate_config(&base.with_speed(v))?;
            // the mean-field value the finite-n moments approach, where one exists
            let limit = mean_field_phi1(&base, v);
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (i, &n) in spec.n_list.iter().enumerate() {
                let tag = ((vi as u64) << 16) | i as u64;
                let cell = stationary_cell(spec, &cfg, i, tag, None)?;
                let mut c = Cell::estimate("phi1", cell.phi1).at(Some(n), Some(v));
                c.reference = limit;
                if cell.unstable {
                    c.flag = Some("UNSTABLE_SUSPECTED".into());
                } else {
                    xs.push((n as f64).ln());
                    ys.push(cell.phi1);
                }
                rep.cells.push(c);
            }
            if xs.len() >= 2 {
                let (slope, up) = significant_upward(&xs, &ys);
                rep.cells
                    .push(Cell::value("phi1_slope_per_log_n", slope).at(None, Some(v)));
                rep.assert(
                    &format!("no_phi1_upward_trend_v{v}"),
                    !up,
                    format!(
                        "slope {slope} per unit log n over {} stable cells",
                        xs.len()
                    ),
                );
            }
        }
        Ok(rep)
    })
}

/// Solver loads of the left-regulated fixed points against simulated busy
/// fractions.
pub fn run_load_curve(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    in_pool(spec, || {
        let base = spec.config.load()?;
        if !matches!((base.frame.left, base.frame.right), (Some(_), None)) {
            return Err(Error::ParamRange(
                "load curve needs a [A, inf) frame".into(),
            ));
        }
        let mut rep = report(spec, &base)?;
        let range = free_range(&base, spec.tol_v)?;
        range_cells(&mut rep, &range);
        let vs = speeds(spec, &base);
        let opts = RegulatedOptions {
            range: Some(range),
            ..Default::default()
        };
        let curve = load_curve(&base, &vs, &opts)?;
        for (v, rho) in &curve {
            rep.cells.push(Cell::value("load", *rho).at(None, Some(*v)));
        }
        let mut ordered: Vec<(f64, f64)> = curve.clone();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        rep.assert(
            "load_strictly_decreasing",
            ordered.windows(2).all(|w| w[1].1 < w[0].1),
            format!("{ordered:?}"),
        );
        for (vi, (v, rho)) in curve.iter().enumerate() {
            let cfg = validate_config(&base.with_speed(*v))?;
            let mut last = None;
            for (i, &n) in spec.n_list.iter().enumerate() {
                let tag = ((vi as u64) << 16) | i as u64;
                let cell = stationary_cell(spec, &cfg, i, tag, None)?;
                if let Some(b) = cell.busy {
                    rep.cells.push(
                        Cell::estimate("busy_fraction", b)
                            .at(Some(n), Some(*v))
                            .against(*rho),
                    );
                    last = Some(b);
                }
            }
            if let Some(b) = last {
                rep.assert(
                    &format!("busy_fraction_v{v}"),
                    (b.mean - rho).abs() <= spec.busy_tol,
                    format!(
                        "busy fraction {} against load {rho} +- {}",
                        b.mean, spec.busy_tol
                    ),
                );
            }
        }
        Ok(rep)
    })
}

/// Speed range with its probes, and the free wave at its lower end.
pub fn run_speed_range_report(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    in_pool(spec, || {
        let base = spec.config.load()?;
        let mut rep = report(spec, &base)?;
        let range = free_range(&base, spec.tol_v)?;
        range_cells(&mut rep, &range);
        for p in &range.probes {
            let mut c = Cell::value("probe", p.v).at(None, Some(p.v));
            c.flag = Some(p.outcome.clone());
            rep.cells.push(c);
        }
        rep.assert(
            "bracket_ordered",
            range.v_min <= range.v_max + range.tol_v,
            format!(
                "[{}, {}] at tolerance {}",
                range.v_min, range.v_max, range.tol_v
            ),
        );
        if range.analytic_fallback {
            rep.cells.push(Cell::value("analytic_fallback", 1.0));
            return Ok(rep);
        }
        let free = base.with_frame(Frame::FREE);
        let fp = free_fp(&free, &DefpOptions::default())?;
        let flux = wave_flux_identity(&fp, &free)?;
        rep.cells
            .push(Cell::value("flux_residual", flux).at(None, Some(fp.v)));
        rep.assert(
            "flux_identity",
            flux <= FLUX_TOL,
            format!("residual {flux} against {FLUX_TOL}"),
        );
        rep.provenance.grid = Some(fp.grid);
        rep.fields.push(NamedField {
            name: "free_fp".into(),
            field: fp.field,
        });
        Ok(rep)
    })
}
