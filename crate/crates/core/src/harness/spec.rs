use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::TailField;
use crate::meanfield::GridSpec;
use crate::model::SystemConfig;
use crate::sim::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VnConvergence,
    SsaiLeft,
    SsaiRight,
    Phi1Bound,
    LoadCurve,
    SpeedRangeReport,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::VnConvergence => "vn_convergence",
            ExperimentKind::SsaiLeft => "ssai_left",
            ExperimentKind::SsaiRight => "ssai_right",
            ExperimentKind::Phi1Bound => "phi1_bound",
            ExperimentKind::LoadCurve => "load_curve",
            ExperimentKind::SpeedRangeReport => "speed_range_report",
        }
    }
}

/// A config file path, or the config itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigSource {
    Path(PathBuf),
    Inline(SystemConfig),
}

impl ConfigSource {
    pub fn load(&self) -> Result<SystemConfig> {
        match self {
            ConfigSource::Inline(c) => Ok(c.clone()),
            ConfigSource::Path(p) => SystemConfig::from_json(&std::fs::read_to_string(p)?),
        }
    }
}

fn default_nu() -> f64 {
    0.5
}

fn default_stride() -> f64 {
    1.0
}

fn default_burn_in_share() -> f64 {
    0.2
}

fn default_tol_v() -> f64 {
    1e-3
}

fn default_busy_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: ConfigSource,
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Run length per entry of `n_list`; a single value applies to all.
    #[serde(default)]
    pub horizons: Vec<f64>,
    /// Drift speeds for the regulated experiments; the config's speed when
    /// empty.
    #[serde(default)]
    pub speeds: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the replica fan-out; rayon's default when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Quantile followed by the velocity estimate.
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Burn-in of stationary runs; `10 n / lambda` when unset.
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Share of a velocity run discarded as burn-in.
    #[serde(default = "default_burn_in_share")]
    pub burn_in_share: f64,
    #[serde(default = "default_stride")]
    pub stride: f64,
    /// Bracket tolerance of the solver's speed range.
    #[serde(default = "default_tol_v")]
    pub tol_v: f64,
    /// Allowed gap between simulated busy fractions and solver loads.
    #[serde(default = "default_busy_tol")]
    pub busy_tol: f64,
    /// When set, the largest `n` must be this close to the fixed point.
    #[serde(default)]
    pub levy_tol: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: SystemConfig) -> Self {
        ExperimentSpec {
            kind,
            config: ConfigSource::Inline(config),
            n_list: Vec::new(),
            horizons: Vec::new(),
            speeds: Vec::new(),
            replicas: 1,
            seed: 0,
            out_dir: None,
            workers: None,
            nu: default_nu(),
            burn_in: None,
            burn_in_share: default_burn_in_share(),
            stride: default_stride(),
            tol_v: default_tol_v(),
            busy_tol: default_busy_tol(),
            levy_tol: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ExperimentSpec = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::ParamRange("replica count must be at least 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ParamRange(format!(
                "n-list must increase, got {:?}",
                self.n_list
            )));
        }
        if !(self.horizons.len() <= 1 || self.horizons.len() == self.n_list.len()) {
            return Err(Error::ParamRange(format!(
                "{} horizons for {} values of n",
                self.horizons.len(),
                self.n_list.len()
            )));
        }
        if self.horizons.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::ParamRange("horizons must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_share) || !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::ParamRange(
                "burn-in share and nu must lie in [0, 1)".into(),
            ));
        }
        if !(self.stride > 0.0 && self.tol_v > 0.0 && self.busy_tol >= 0.0) {
            return Err(Error::ParamRange(
                "stride and tol_v must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn horizon(&self, i: usize) -> Result<f64> {
        match self.horizons.len() {
            0 => Err(Error::ParamRange("no horizon given".into())),
            1 => Ok(self.horizons[0]),
            _ => Ok(self.horizons[i]),
        }
    }
}

/// One estimate in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: Option<usize>,
    pub v: Option<f64>,
    pub metric: String,
    pub estimate: f64,
    pub half_width: Option<f64>,
    pub reference: Option<f64>,
    pub flag: Option<String>,
}

impl Cell {
    pub fn value(metric: &str, estimate: f64) -> Self {
        Cell {
            n: None,
            v: None,
            metric: metric.to_string(),
            estimate,
            half_width: None,
            reference: None,
            flag: None,
        }
    }

    pub fn estimate(metric: &str, e: Estimate) -> Self {
        Cell {
            half_width: Some(e.half_width),
            ..Cell::value(metric, e.mean)
        }
    }

    pub fn at(mut self, n: Option<usize>, v: Option<f64>) -> Self {
        self.n = n;
        self.v = v;
        self
    }

    pub fn against(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedField {
    pub name: String,
    pub field: TailField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub replicas: usize,
    pub config_hash: String,
    pub version: String,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: SystemConfig,
    pub provenance: Provenance,
    pub cells: Vec<Cell>,
    pub assertions: Vec<Assertion>,
    /// Solver fields the cells were judged against.
    pub fields: Vec<NamedField>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub(crate) fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// `{experiment}_{hash(config)}_{seed}`.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{}",
            self.experiment.as_str(),
            self.provenance.config_hash,
            self.provenance.seed
        )
    }
}

/// First 16 hex digits of the SHA-256 of the config's JSON.
pub fn config_hash(cfg: &SystemConfig) -> Result<String> {
    let digest = Sha256::digest(cfg.to_json()?.as_bytes());
    Ok(hex::encode(&digest[..8]))
}
