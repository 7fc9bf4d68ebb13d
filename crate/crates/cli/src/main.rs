use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cocwave::field::{read_csv, write_csv};
use cocwave::harness::{emit, run_experiment, ConfigSource, ExperimentKind, ExperimentSpec};
use cocwave::meanfield::{
    compute_h, compute_h_mc, d_monotonicity_check, defp_integrate, free_fp, left_regulated_fp,
    right_regulated_fp, speed_range, two_sided_fp, DefpOptions, RegulatedOptions, RelaxOptions,
};
use cocwave::sim::{replica_rng, simulate_path};
use cocwave::{validate_config, SystemConfig};

#[derive(Parser)]
#[command(
    name = "cocwave",
    version,
    about = "Cancel-on-completion particle systems: simulation, traveling-wave fixed points and experiments"
)]
struct Cli {
    /// System config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file, or output directory for experiments.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replica fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the n-particle system and record quantiles over time.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        horizon: f64,
        /// Recording interval; horizon / 1000 by default.
        #[arg(long)]
        every: Option<f64>,
        /// Directory for per-row snapshot fields.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Solve for the fixed point of the configured frame at speed v.
    FixedPoint {
        /// Speed; the config's speed when absent, the wave speed for a free
        /// frame without either.
        #[arg(long)]
        v: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
    },
    /// Bracket the traveling-wave speed range.
    SpeedRange {
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    VnConvergence(ExperimentArgs),
    SsaiLeft(ExperimentArgs),
    SsaiRight(ExperimentArgs),
    Phi1Bound(ExperimentArgs),
    LoadCurve(ExperimentArgs),
    /// Expected displaced work of one class at the given gap vectors.
    DmonoCheck {
        #[arg(long, default_value_t = 0)]
        class: usize,
        /// Gap vectors separated by ';', entries by ','.
        #[arg(long)]
        gaps: String,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
    /// Evaluate h at levels w for particle locations drawn from a field.
    HEval {
        /// Field CSV.
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        w: Vec<f64>,
        /// Monte Carlo draws instead of the exact form.
        #[arg(long)]
        mc: Option<usize>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Full experiment spec (JSON); the flags below are ignored with it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    horizon: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    v: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Largest allowed Lévy distance at the largest n.
    #[arg(long)]
    levy_tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn config(cli: &Cli) -> Result<SystemConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SystemConfig::from_json(&text)?)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Simulate {
            n,
            horizon,
            every,
            snapshots,
        } => simulate(
            cli,
            *n,
            *horizon,
            every.unwrap_or(horizon / 1000.0),
            snapshots.as_deref(),
        ),
        Cmd::FixedPoint { v, dx } => fixed_point(cli, *v, *dx),
        Cmd::SpeedRange { tol } => {
            let cfg = config(cli)?;
            let r = speed_range(&cfg, *tol, &DefpOptions::default())?;
            let mut out = output(cli)?;
            serde_json::to_writer_pretty(&mut out, &r)?;
            writeln!(out)?;
            Ok(true)
        }
        Cmd::VnConvergence(a) => experiment(cli, ExperimentKind::VnConvergence, a),
        Cmd::SsaiLeft(a) => experiment(cli, ExperimentKind::SsaiLeft, a),
        Cmd::SsaiRight(a) => experiment(cli, ExperimentKind::SsaiRight, a),
        Cmd::Phi1Bound(a) => experiment(cli, ExperimentKind::Phi1Bound, a),
        Cmd::LoadCurve(a) => experiment(cli, ExperimentKind::LoadCurve, a),
        Cmd::DmonoCheck {
            class,
            gaps,
            samples,
        } => dmono(cli, *class, gaps, *samples),
        Cmd::HEval { field, w, mc } => h_eval(cli, field, w, *mc),
    }
}

fn simulate(
    cli: &Cli,
    n: usize,
    horizon: f64,
    every: f64,
    snapshots: Option<&Path>,
) -> Result<bool> {
    let cfg = validate_config(&config(cli)?)?;
    let mut rng = replica_rng(cli.seed, 0);
    let (rows, snaps) = simulate_path(&cfg, n, horizon, every, snapshots.is_some(), &mut rng)?;
    let mut w = csv::Writer::from_writer(output(cli)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    if let Some(dir) = snapshots {
        fs::create_dir_all(dir)?;
        for (i, f) in snaps.iter().enumerate() {
            let path = dir.join(format!("snapshot_{i:06}.csv"));
            write_csv(f, BufWriter::new(File::create(path)?))?;
        }
    }
    Ok(true)
}

fn fixed_point(cli: &Cli, v: Option<f64>, dx: f64) -> Result<bool> {
    let cfg = config(cli)?;
    let defp = DefpOptions {
        dx,
        ..Default::default()
    };
    let reg = RegulatedOptions { defp, range: None };
    let speed = v.unwrap_or(cfg.speed);
    let fp = match (cfg.frame.left, cfg.frame.right) {
        (None, None) if v.is_none() && cfg.speed == 0.0 => free_fp(&cfg, &defp)?,
        (None, None) => defp_integrate(&cfg, speed, &defp)?,
        (Some(_), None) => left_regulated_fp(&cfg, speed, &reg)?,
        (None, Some(_)) => right_regulated_fp(&cfg, speed, &reg)?,
        (Some(_), Some(_)) => two_sided_fp(&cfg, speed, &RelaxOptions::default())?,
    };
    let out = cli.out.as_ref().context("--out is required")?;
    write_csv(&fp.field, BufWriter::new(File::create(out)?))?;
    let sidecar = out.with_extension("json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&sidecar)?), &fp.summary())?;
    eprintln!(
        "{} at v = {}; wrote {} and {}",
        fp.classification.label(),
        fp.v,
        out.display(),
        sidecar.display()
    );
    Ok(true)
}

fn experiment(cli: &Cli, kind: ExperimentKind, a: &ExperimentArgs) -> Result<bool> {
    let mut spec = match &a.spec {
        Some(p) => {
            let mut s = ExperimentSpec::from_path(p)?;
            if s.kind != kind {
                bail!("spec is for {}, not {}", s.kind.as_str(), kind.as_str());
            }
            if let Some(c) = &cli.config {
                s.config = ConfigSource::Path(c.clone());
            }
            s
        }
        None => {
            let mut s = ExperimentSpec::new(kind, config(cli)?);
            s.n_list = a.n.clone();
            s.horizons = a.horizon.clone();
            s.speeds = a.v.clone();
            s.replicas = a.replicas;
            s.seed = cli.seed;
            s.levy_tol = a.levy_tol;
            s
        }
    };
    if cli.workers.is_some() {
        spec.workers = cli.workers;
    }
    let report = run_experiment(&spec)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| spec.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    for p in emit(&report, &dir)? {
        eprintln!("wrote {}", p.display());
    }
    for a in &report.assertions {
        println!(
            "{} {}: {}",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
    Ok(report.passed())
}

fn parse_gaps(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|g| {
            g.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad gap {x:?}"))
                })
                .collect()
        })
        .collect()
}

fn dmono(cli: &Cli, class: usize, gaps: &str, samples: usize) -> Result<bool> {
    let cfg = config(cli)?;
    let Some(c) = cfg.classes.get(class) else {
        bail!("config has {} classes", cfg.classes.len());
    };
    let mut rng = replica_rng(cli.seed, 0);
    let rep = d_monotonicity_check(c, &parse_gaps(gaps)?, samples, &mut rng)?;
    let mut out = output(cli)?;
    serde_json::to_writer_pretty(&mut out, &rep)?;
    writeln!(out)?;
    println!(
        "{} d_monotone: {} violations{}",
        if rep.monotone() { "PASS" } else { "FAIL" },
        rep.violations.len(),
        if rep.constant { ", constant" } else { "" }
    );
    Ok(rep.monotone())
}

fn h_eval(cli: &Cli, field: &Path, ws: &[f64], mc: Option<usize>) -> Result<bool> {
    let cfg = config(cli)?;
    let x = read_csv(File::open(field).with_context(|| format!("opening {}", field.display()))?)?;
    let mut rng = replica_rng(cli.seed, 0);
    let mut w = csv::Writer::from_writer(output(cli)?);
    w.write_record(["w", "h", "half_width"])?;
    for &at in ws {
        let (h, hw) = match mc {
            Some(m) => {
                let e = compute_h_mc(&x, at, &cfg, m, &mut rng)?;
                (e.mean, e.half_width.to_string())
            }
            None => (compute_h(&x, at, &cfg)?, String::new()),
        };
        w.write_record([at.to_string(), h.to_string(), hw])?;
    }
    w.flush()?;
    Ok(true)
}
