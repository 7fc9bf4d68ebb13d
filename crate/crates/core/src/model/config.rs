//! System configuration, validation and the reduced-system transformation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::component::ComponentModel;
use super::dist::ScalarDist;
use crate::error::{Error, Result};

pub const SPEC_VERSION: u32 = 1;

/// Draws used to certify the nondegeneracy assumptions when no analytic
/// rule applies.
const DEGENERACY_DRAWS: usize = 100_000;
const DEGENERACY_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub sizes: ComponentModel,
}

impl JobClass {
    pub fn iid(d: usize, k: usize, sigma: f64, dist: ScalarDist) -> Self {
        JobClass {
            d,
            k,
            sigma,
            sizes: ComponentModel::iid(dist),
        }
    }
}

/// Regulation boundaries; `None` is an unbounded side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Frame {
    #[serde(default)]
    pub left: Option<f64>,
    #[serde(default)]
    pub right: Option<f64>,
}

impl Frame {
    pub const FREE: Frame = Frame {
        left: None,
        right: None,
    };

    pub fn left(a: f64) -> Self {
        Frame {
            left: Some(a),
            right: None,
        }
    }

    pub fn right(b: f64) -> Self {
        Frame {
            left: None,
            right: Some(b),
        }
    }

    pub fn both(a: f64, b: f64) -> Self {
        Frame {
            left: Some(a),
            right: Some(b),
        }
    }

    pub fn is_free(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    pub fn lower(&self) -> f64 {
        self.left.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.right.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.lower(), self.upper());
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(Error::EmptyFrame { left: a, right: b });
        }
        Ok(())
    }
}

fn default_version() -> u32 {
    SPEC_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(default = "default_version")]
    pub spec_version: u32,
    pub classes: Vec<JobClass>,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default)]
    pub speed: f64,
}

impl SystemConfig {
    pub fn new(classes: Vec<JobClass>, frame: Frame, speed: f64) -> Self {
        SystemConfig {
            spec_version: SPEC_VERSION,
            classes,
            frame,
            speed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_frame(&self, frame: Frame) -> Self {
        SystemConfig {
            frame,
            ..self.clone()
        }
    }

    pub fn with_speed(&self, speed: f64) -> Self {
        SystemConfig {
            speed,
            ..self.clone()
        }
    }

    /// Total arrival rate per particle.
    pub fn lambda(&self) -> f64 {
        self.classes.iter().map(|c| c.sigma).sum()
    }

    pub fn pi(&self, j: usize) -> f64 {
        self.classes[j].sigma / self.lambda()
    }

    /// Rate at which a given particle is selected.
    pub fn alpha(&self) -> f64 {
        self.classes.iter().map(|c| c.sigma * c.d as f64).sum()
    }

    pub fn dbar(&self) -> usize {
        self.classes.iter().map(|c| c.d).max().unwrap_or(0)
    }

    /// Every class has independent component sizes.
    pub fn all_iid(&self) -> bool {
        self.classes.iter().all(|c| c.sizes.iid_dist().is_some())
    }
}

/// Assumption flags attached by [`validate_config`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFlags {
    pub finite_second_moment: bool,
    /// Some class can leave fewer than `k` zero components.
    pub nondegenerate: bool,
    pub exists_k_lt_d_nondegenerate: bool,
    /// Some class with `k < d` has a positive gap between its largest and
    /// `k`-th smallest component with positive probability.
    pub strict_gap_class: bool,
    pub all_iid_ihr: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    pub config: SystemConfig,
    pub flags: ConfigFlags,
}

impl std::ops::Deref for ValidatedConfig {
    type Target = SystemConfig;
    fn deref(&self) -> &SystemConfig {
        &self.config
    }
}

pub fn validate_config(cfg: &SystemConfig) -> Result<ValidatedConfig> {
    let mut cfg = cfg.clone();
    if cfg.spec_version != SPEC_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported spec_version {}",
            cfg.spec_version
        )));
    }
    if cfg.classes.is_empty() {
        return Err(Error::ZeroTotalRate);
    }
    for (j, c) in cfg.classes.iter_mut().enumerate() {
        if c.d == 0 || c.k == 0 {
            return Err(Error::ParamRange(format!(
                "class {j}: d and k must be >= 1"
            )));
        }
        if c.k > c.d {
            return Err(Error::KExceedsD {
                class: j,
                k: c.k,
                d: c.d,
            });
        }
        if !(c.sigma >= 0.0) || !c.sigma.is_finite() {
            return Err(Error::NegativeRate {
                class: j,
                sigma: c.sigma,
            });
        }
        c.sizes.normalize()?;
    }
    if !(cfg.lambda() > 0.0) {
        return Err(Error::ZeroTotalRate);
    }
    cfg.frame.validate()?;
    if !(cfg.speed >= 0.0 && cfg.speed.is_finite()) {
        return Err(Error::ParamRange(format!(
            "speed must be >= 0, got {}",
            cfg.speed
        )));
    }
    if !cfg.classes.iter().any(|c| c.sizes.marginal_mean() > 0.0) {
        return Err(Error::InvalidConfig(
            "at least one class needs a positive mean component size".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DEGENERACY_SEED);
    let active = || cfg.classes.iter().filter(|c| c.sigma > 0.0);
    let finite_second_moment = active().all(|c| c.sizes.marginal_second_moment().is_finite());
    let nondeg: Vec<(usize, usize, bool)> = active()
        .map(|c| (c.k, c.d, class_nondegenerate(c, &mut rng)))
        .collect();
    let strict_gap_class = active()
        .filter(|c| c.k < c.d)
        .any(|c| class_strict_gap(c, &mut rng));
    let all_iid_ihr = active().all(|c| c.sizes.iid_dist().is_some_and(|d| d.is_ihr()));

    let flags = ConfigFlags {
        finite_second_moment,
        nondegenerate: nondeg.iter().any(|t| t.2),
        exists_k_lt_d_nondegenerate: nondeg.iter().any(|&(k, d, ok)| ok && k < d),
        strict_gap_class,
        all_iid_ihr,
    };
    Ok(ValidatedConfig { config: cfg, flags })
}

/// `P(#zero components >= k) < 1`.
fn class_nondegenerate(c: &JobClass, rng: &mut ChaCha8Rng) -> bool {
    if let Some(dist) = c.sizes.iid_dist() {
        return dist.prob_zero() < 1.0;
    }
    let mut buf = vec![0.0; c.d];
    (0..DEGENERACY_DRAWS).any(|_| {
        c.sizes.sample_into(&mut buf, rng);
        buf.iter().filter(|x| **x == 0.0).count() < c.k
    })
}

/// `P(max - k-th smallest > 0) > 0`.
fn class_strict_gap(c: &JobClass, rng: &mut ChaCha8Rng) -> bool {
    if let Some(dist) = c.sizes.iid_dist() {
        return dist.point_mass().is_none();
    }
    let mut buf = vec![0.0; c.d];
    (0..DEGENERACY_DRAWS).any(|_| {
        c.sizes.sample_into(&mut buf, rng);
        buf.sort_by(f64::total_cmp);
        buf[c.d - 1] > buf[c.k - 1]
    })
}

/// The selection-weighted marginal `H = sum_j (sigma_j d_j / alpha) H_j`.
pub fn marginal_h(cfg: &SystemConfig) -> Result<ScalarDist> {
    let alpha = cfg.alpha();
    if !(alpha > 0.0) {
        return Err(Error::ZeroTotalRate);
    }
    let active: Vec<&JobClass> = cfg.classes.iter().filter(|c| c.sigma > 0.0).collect();
    let mut parts = Vec::with_capacity(active.len());
    let mut used = 0.0;
    for (i, c) in active.iter().enumerate() {
        let h = c.sizes.marginal().ok_or_else(|| {
            Error::UnknownFamily("marginal of a sampler without CDF access".into())
        })?;
        // Last weight closes the sum so it is exactly one.
        let w = if i + 1 == active.len() {
            1.0 - used
        } else {
            c.sigma * c.d as f64 / alpha
        };
        used += w;
        parts.push((w, h));
    }
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part").1);
    }
    Ok(ScalarDist::mixture(parts))
}

pub fn mixture_marginal(cfg: &SystemConfig) -> Result<ComponentModel> {
    Ok(ComponentModel::iid(marginal_h(cfg)?))
}

/// Limiting `(eps, delta)`-reduced system: fraction `eps` of particles sits
/// at `+inf` and `delta` at `-inf`.
pub fn reduce_system(cfg: &SystemConfig, eps: f64, delta: f64) -> Result<SystemConfig> {
    if !(eps >= 0.0 && delta >= 0.0 && eps + delta < 1.0) {
        return Err(Error::ParamRange(format!(
            "need eps, delta >= 0 and eps + delta < 1, got ({eps}, {delta})"
        )));
    }
    if eps == 0.0 && delta == 0.0 {
        return Ok(cfg.clone());
    }
    let regular = 1.0 - eps - delta;
    let mut classes = Vec::new();
    for c in &cfg.classes {
        for l in 0..c.k {
            for m in (l + 1)..=c.d {
                let rate = c.sigma * subclass_weight(c.d, m, l, eps, delta) / regular;
                if rate > 0.0 {
                    classes.push(JobClass {
                        d: m - l,
                        k: c.k - l,
                        sigma: rate,
                        sizes: c.sizes.clone(),
                    });
                }
            }
        }
    }
    Ok(SystemConfig {
        classes,
        ..cfg.clone()
    })
}

/// Probability that a selection of `d` picks exactly `l` particles at
/// `-inf` and `d - m` at `+inf`.
pub fn subclass_weight(d: usize, m: usize, l: usize, eps: f64, delta: f64) -> f64 {
    let regular = 1.0 - eps - delta;
    let multinom = factorial(d) / (factorial(l) * factorial(m - l) * factorial(d - m));
    multinom * delta.powi(l as i32) * regular.powi((m - l) as i32) * eps.powi((d - m) as i32)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
