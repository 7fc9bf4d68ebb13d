//! Joint (exchangeable) laws of a job's component sizes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::ScalarDist;
use crate::error::{Error, Result};

/// Law of the `d` component sizes of one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentModel {
    /// `d` independent draws from `dist`.
    Iid { dist: ScalarDist },
    /// A named exchangeable generator without closed-form joint law.
    Sampler { sampler: NamedSampler },
    /// Pick a sub-model by weight, then draw all `d` components from it.
    Mixture { components: Vec<WeightedModel> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedModel {
    pub weight: f64,
    pub model: ComponentModel,
}

/// Exchangeable, dimension-free generators. Projection onto fewer
/// components is the same generator, so reduced subclasses reuse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NamedSampler {
    /// All components equal one draw from `dist`.
    Identical { dist: ScalarDist },
    /// `xi_i = S * B_i` with a common scale `S` and iid bases `B_i`.
    SharedScale { scale: ScalarDist, base: ScalarDist },
}

impl ComponentModel {
    pub fn iid(dist: ScalarDist) -> Self {
        ComponentModel::Iid { dist }
    }

    pub(crate) fn normalize(&mut self) -> Result<()> {
        match self {
            ComponentModel::Iid { dist } => *dist = dist.clone().validated()?,
            ComponentModel::Sampler { sampler } => match sampler {
                NamedSampler::Identical { dist } => *dist = dist.clone().validated()?,
                NamedSampler::SharedScale { scale, base } => {
                    *scale = scale.clone().validated()?;
                    *base = base.clone().validated()?;
                }
            },
            ComponentModel::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidConfig("empty component-model mixture".into()));
                }
                let mut total = 0.0;
                for c in components.iter_mut() {
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return Err(Error::InvalidConfig(format!(
                            "mixture weight must be >= 0, got {}",
                            c.weight
                        )));
                    }
                    total += c.weight;
                    c.model.normalize()?;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "mixture weights sum to {total}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One exchangeable draw of `d` sizes.
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.sample_into(&mut out, rng);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match self {
            ComponentModel::Iid { dist } => {
                for x in out.iter_mut() {
                    *x = dist.sample(rng);
                }
            }
            ComponentModel::Sampler { sampler } => match sampler {
                NamedSampler::Identical { dist } => {
                    let v = dist.sample(rng);
                    out.fill(v);
                }
                NamedSampler::SharedScale { scale, base } => {
                    let s = scale.sample(rng);
                    for x in out.iter_mut() {
                        *x = s * base.sample(rng);
                    }
                }
            },
            ComponentModel::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.model.sample_into(out, rng);
                    }
                }
                components
                    .last()
                    .expect("non-empty mixture")
                    .model
                    .sample_into(out, rng)
            }
        }
    }

    /// Marginal law of one component, when it has CDF access.
    pub fn marginal(&self) -> Option<ScalarDist> {
        match self {
            ComponentModel::Iid { dist } => Some(dist.clone()),
            ComponentModel::Sampler { sampler } => match sampler {
                NamedSampler::Identical { dist } => Some(dist.clone()),
                NamedSampler::SharedScale { .. } => None,
            },
            ComponentModel::Mixture { components } => {
                let mut parts = Vec::with_capacity(components.len());
                for c in components {
                    parts.push((c.weight, c.model.marginal()?));
                }
                Some(ScalarDist::mixture(parts))
            }
        }
    }

    /// The scalar law when components are independent.
    pub fn iid_dist(&self) -> Option<&ScalarDist> {
        match self {
            ComponentModel::Iid { dist } => Some(dist),
            _ => None,
        }
    }

    /// Mean of one component (sampled scale laws multiply out exactly).
    pub fn marginal_mean(&self) -> f64 {
        match self {
            ComponentModel::Iid { dist } => dist.mean(),
            ComponentModel::Sampler { sampler } => match sampler {
                NamedSampler::Identical { dist } => dist.mean(),
                NamedSampler::SharedScale { scale, base } => scale.mean() * base.mean(),
            },
            ComponentModel::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.model.marginal_mean())
                .sum(),
        }
    }

    pub fn marginal_second_moment(&self) -> f64 {
        match self {
            ComponentModel::Iid { dist } => dist.second_moment(),
            ComponentModel::Sampler { sampler } => match sampler {
                NamedSampler::Identical { dist } => dist.second_moment(),
                NamedSampler::SharedScale { scale, base } => {
                    scale.second_moment() * base.second_moment()
                }
            },
            ComponentModel::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.model.marginal_second_moment())
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_draw() {
        let m = ComponentModel::iid(ScalarDist::det(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.sample(3, &mut rng), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn iid_exp_coordinate_means() {
        let m = ComponentModel::iid(ScalarDist::exp(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sums = [0.0; 2];
        let mut buf = [0.0; 2];
        for _ in 0..n {
            m.sample_into(&mut buf, &mut rng);
            sums[0] += buf[0];
            sums[1] += buf[1];
        }
        for s in sums {
            assert!((s / n as f64 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn model_mixture_mean() {
        let m = ComponentModel::Mixture {
            components: vec![
                WeightedModel {
                    weight: 0.5,
                    model: ComponentModel::iid(ScalarDist::det(0.0)),
                },
                WeightedModel {
                    weight: 0.5,
                    model: ComponentModel::iid(ScalarDist::det(2.0)),
                },
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mut buf = [0.0; 1];
        let mut s = 0.0;
        for _ in 0..n {
            m.sample_into(&mut buf, &mut rng);
            s += buf[0];
        }
        assert!((s / n as f64 - 1.0).abs() < 0.01);
        assert!((m.marginal_mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_sampler_components_equal() {
        let m = ComponentModel::Sampler {
            sampler: NamedSampler::Identical {
                dist: ScalarDist::exp(2.0),
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = m.sample(4, &mut rng);
        assert!(v.iter().all(|x| *x == v[0]));
    }

    #[test]
    fn json_shape() {
        let m: ComponentModel =
            serde_json::from_str(r#"{"kind":"iid","dist":{"type":"exp","rate":1.0}}"#).unwrap();
        assert_eq!(m, ComponentModel::iid(ScalarDist::exp(1.0)));
    }
}
