//! Scalar component-size laws on `[0, inf)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::integrate;

/// Parametric law of a single job component size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarDist {
    #[serde(rename = "exp")]
    Exponential {
        rate: f64,
    },
    #[serde(rename = "det")]
    Deterministic {
        value: f64,
    },
    /// Uniform on `(0, upper]`.
    Uniform {
        upper: f64,
    },
    /// `min(inner, cap)`.
    Truncated {
        dist: Box<ScalarDist>,
        cap: f64,
    },
    /// Equal-weight atoms; kept sorted.
    Empirical {
        samples: Vec<f64>,
    },
    Mixture {
        components: Vec<WeightedDist>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDist {
    pub weight: f64,
    pub dist: ScalarDist,
}

const WEIGHT_TOL: f64 = 1e-12;

impl ScalarDist {
    pub fn exp(rate: f64) -> Self {
        ScalarDist::Exponential { rate }
    }

    pub fn det(value: f64) -> Self {
        ScalarDist::Deterministic { value }
    }

    pub fn uniform(upper: f64) -> Self {
        ScalarDist::Uniform { upper }
    }

    pub fn truncated(dist: ScalarDist, cap: f64) -> Self {
        ScalarDist::Truncated {
            dist: Box::new(dist),
            cap,
        }
    }

    pub fn empirical(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        ScalarDist::Empirical { samples }
    }

    pub fn mixture(parts: impl IntoIterator<Item = (f64, ScalarDist)>) -> Self {
        ScalarDist::Mixture {
            components: parts
                .into_iter()
                .map(|(weight, dist)| WeightedDist { weight, dist })
                .collect(),
        }
    }

    /// Checks parameters and puts the value into canonical form (sorted
    /// empirical samples).
    pub fn validated(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    fn normalize(&mut self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            ScalarDist::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            ScalarDist::Deterministic { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad(format!("deterministic size must be >= 0, got {value}"));
                }
            }
            ScalarDist::Uniform { upper } => {
                if !(upper.is_finite() && *upper > 0.0) {
                    return bad(format!("uniform upper bound must be positive, got {upper}"));
                }
            }
            ScalarDist::Truncated { dist, cap } => {
                if !(cap.is_finite() && *cap >= 0.0) {
                    return bad(format!("truncation cap must be >= 0, got {cap}"));
                }
                dist.normalize()?;
            }
            ScalarDist::Empirical { samples } => {
                if samples.is_empty() {
                    return bad("empirical distribution needs at least one sample".into());
                }
                if samples.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return bad("empirical samples must be finite and >= 0".into());
                }
                samples.sort_by(f64::total_cmp);
            }
            ScalarDist::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let mut total = 0.0;
                for c in components.iter_mut() {
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return bad(format!("mixture weight must be >= 0, got {}", c.weight));
                    }
                    total += c.weight;
                    c.dist.normalize()?;
                }
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return bad(format!("mixture weights sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// `P(xi <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        1.0 - self.tail(z)
    }

    /// `P(xi > z)`.
    pub fn tail(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 1.0;
        }
        match self {
            ScalarDist::Exponential { rate } => (-rate * z).exp(),
            ScalarDist::Deterministic { value } => {
                if z < *value {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarDist::Uniform { upper } => (1.0 - z / upper).max(0.0),
            ScalarDist::Truncated { dist, cap } => {
                if z >= *cap {
                    0.0
                } else {
                    dist.tail(z)
                }
            }
            ScalarDist::Empirical { samples } => {
                let above = samples.len() - samples.partition_point(|s| *s <= z);
                above as f64 / samples.len() as f64
            }
            ScalarDist::Mixture { components } => {
                components.iter().map(|c| c.weight * c.dist.tail(z)).sum()
            }
        }
    }

    /// `E min(xi, z) = int_0^z P(xi > s) ds`.
    pub fn integrated_tail(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            ScalarDist::Exponential { rate } => -(-rate * z).exp_m1() / rate,
            ScalarDist::Deterministic { value } => z.min(*value),
            ScalarDist::Uniform { upper } => {
                if z >= *upper {
                    0.5 * upper
                } else {
                    z - 0.5 * z * z / upper
                }
            }
            ScalarDist::Truncated { dist, cap } => dist.integrated_tail(z.min(*cap)),
            ScalarDist::Empirical { samples } => {
                samples.iter().map(|s| s.min(z)).sum::<f64>() / samples.len() as f64
            }
            ScalarDist::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.integrated_tail(z))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarDist::Exponential { rate } => 1.0 / rate,
            ScalarDist::Deterministic { value } => *value,
            ScalarDist::Uniform { upper } => 0.5 * upper,
            ScalarDist::Truncated { dist, cap } => dist.integrated_tail(*cap),
            ScalarDist::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
            ScalarDist::Mixture { components } => {
                components.iter().map(|c| c.weight * c.dist.mean()).sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            ScalarDist::Exponential { rate } => 2.0 / (rate * rate),
            ScalarDist::Deterministic { value } => value * value,
            ScalarDist::Uniform { upper } => upper * upper / 3.0,
            ScalarDist::Truncated { dist, cap } => match dist.as_ref() {
                ScalarDist::Exponential { rate } => {
                    let rc = rate * cap;
                    2.0 * (1.0 - (-rc).exp() * (1.0 + rc)) / (rate * rate)
                }
                inner => 2.0 * integrate(|z| z * inner.tail(z), 0.0, *cap, 1e-12),
            },
            ScalarDist::Empirical { samples } => {
                samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
            }
            ScalarDist::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.second_moment())
                .sum(),
        }
    }

    /// Laplace transform `E exp(-beta xi)`.
    pub fn laplace(&self, beta: f64) -> f64 {
        match self {
            ScalarDist::Exponential { rate } => rate / (rate + beta),
            ScalarDist::Deterministic { value } => (-beta * value).exp(),
            ScalarDist::Uniform { upper } => {
                let x = beta * upper;
                if x == 0.0 {
                    1.0
                } else {
                    -(-x).exp_m1() / x
                }
            }
            ScalarDist::Truncated { .. } => 1.0 - beta * self.lbar(beta),
            ScalarDist::Empirical { samples } => {
                samples.iter().map(|s| (-beta * s).exp()).sum::<f64>() / samples.len() as f64
            }
            ScalarDist::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.laplace(beta))
                .sum(),
        }
    }

    /// `int_0^inf exp(-beta z) P(xi > z) dz = (1 - L(beta)) / beta`, with the
    /// mean as its value at zero.
    pub fn lbar(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return self.mean();
        }
        match self {
            ScalarDist::Exponential { rate } => 1.0 / (rate + beta),
            ScalarDist::Deterministic { value } => -(-beta * value).exp_m1() / beta,
            ScalarDist::Uniform { upper } => {
                let x = beta * upper;
                if x < 1e-4 {
                    upper * (0.5 - x / 6.0 + x * x / 24.0)
                } else {
                    ((-x).exp_m1() + x) / (beta * x)
                }
            }
            ScalarDist::Truncated { dist, cap } => match dist.as_ref() {
                ScalarDist::Exponential { rate } => {
                    -(-(beta + rate) * cap).exp_m1() / (beta + rate)
                }
                inner => integrate(|z| (-beta * z).exp() * inner.tail(z), 0.0, *cap, 1e-13),
            },
            ScalarDist::Empirical { samples } => {
                samples
                    .iter()
                    .map(|s| -(-beta * s).exp_m1() / beta)
                    .sum::<f64>()
                    / samples.len() as f64
            }
            ScalarDist::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.lbar(beta))
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            ScalarDist::Deterministic { value } => *value,
            ScalarDist::Uniform { upper } => upper * (1.0 - rng.random::<f64>()),
            ScalarDist::Truncated { dist, cap } => dist.sample(rng).min(*cap),
            ScalarDist::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            ScalarDist::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.dist.sample(rng);
                    }
                }
                components
                    .last()
                    .expect("non-empty mixture")
                    .dist
                    .sample(rng)
            }
        }
    }

    pub fn support_min(&self) -> f64 {
        match self {
            ScalarDist::Exponential { .. } | ScalarDist::Uniform { .. } => 0.0,
            ScalarDist::Deterministic { value } => *value,
            ScalarDist::Truncated { dist, cap } => dist.support_min().min(*cap),
            ScalarDist::Empirical { samples } => samples[0],
            ScalarDist::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.dist.support_min())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            ScalarDist::Exponential { .. } => None,
            ScalarDist::Deterministic { value } => Some(*value),
            ScalarDist::Uniform { upper } => Some(*upper),
            ScalarDist::Truncated { cap, .. } => Some(*cap),
            ScalarDist::Empirical { samples } => samples.last().copied(),
            ScalarDist::Mixture { components } => {
                let mut m: f64 = 0.0;
                for c in components.iter().filter(|c| c.weight > 0.0) {
                    m = m.max(c.dist.support_max()?);
                }
                Some(m)
            }
        }
    }

    /// The atom location if the law is a point mass.
    pub fn point_mass(&self) -> Option<f64> {
        match self {
            ScalarDist::Deterministic { value } => Some(*value),
            ScalarDist::Exponential { .. } | ScalarDist::Uniform { .. } => None,
            ScalarDist::Truncated { dist, cap } => {
                if *cap == 0.0 {
                    Some(0.0)
                } else if let Some(a) = dist.point_mass() {
                    Some(a.min(*cap))
                } else if dist.support_min() >= *cap {
                    Some(*cap)
                } else {
                    None
                }
            }
            ScalarDist::Empirical { samples } => {
                (samples[0] == samples[samples.len() - 1]).then_some(samples[0])
            }
            ScalarDist::Mixture { components } => {
                let mut loc = None;
                for c in components.iter().filter(|c| c.weight > 0.0) {
                    let a = c.dist.point_mass()?;
                    match loc {
                        None => loc = Some(a),
                        Some(b) if b == a => {}
                        Some(_) => return None,
                    }
                }
                loc
            }
        }
    }

    /// `P(xi = 0)`.
    pub fn prob_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    /// A level beyond which the tail mass is below `eps`.
    pub fn effective_max(&self, eps: f64) -> f64 {
        match self {
            ScalarDist::Exponential { rate } => -eps.ln() / rate,
            ScalarDist::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.dist.effective_max(eps))
                .fold(0.0, f64::max),
            other => other.support_max().unwrap_or(0.0),
        }
    }

    /// Increasing-hazard-rate test. Catalog families answer analytically;
    /// empirical laws and mixtures are checked numerically on a grid.
    pub fn is_ihr(&self) -> bool {
        match self {
            ScalarDist::Exponential { .. }
            | ScalarDist::Deterministic { .. }
            | ScalarDist::Uniform { .. } => true,
            ScalarDist::Truncated { dist, .. } => dist.is_ihr(),
            ScalarDist::Empirical { .. } | ScalarDist::Mixture { .. } => self.ihr_grid_check(),
        }
    }

    fn ihr_grid_check(&self) -> bool {
        let top = self.effective_max(1e-6).max(1e-9);
        let mut ys: Vec<f64> = (0..80).map(|i| top * i as f64 / 80.0).collect();
        if let ScalarDist::Empirical { samples } = self {
            ys.extend(samples.iter().copied());
            ys.extend(samples.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        }
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys.retain(|y| self.tail(*y) > 0.0);
        let deltas: Vec<f64> = (1..=40).map(|i| top * i as f64 / 40.0).collect();
        for &delta in &deltas {
            // Conditional completion probability must be non-decreasing in y.
            let mut prev = f64::NEG_INFINITY;
            for &y in &ys {
                let r = 1.0 - self.tail(y + delta) / self.tail(y);
                if r < prev - 1e-12 {
                    return false;
                }
                prev = prev.max(r);
            }
        }
        true
    }

    /// Splits the law into exponential modes `(weight, rate)` and bounded
    /// components `(weight, law)`; the tail is the weighted sum of both parts.
    #[allow(clippy::type_complexity)]
    pub fn decompose(&self) -> (Vec<(f64, f64)>, Vec<(f64, ScalarDist)>) {
        let mut modes = Vec::new();
        let mut bounded = Vec::new();
        self.decompose_into(1.0, &mut modes, &mut bounded);
        (modes, bounded)
    }

    fn decompose_into(
        &self,
        weight: f64,
        modes: &mut Vec<(f64, f64)>,
        bounded: &mut Vec<(f64, ScalarDist)>,
    ) {
        if weight == 0.0 {
            return;
        }
        match self {
            ScalarDist::Exponential { rate } => modes.push((weight, *rate)),
            ScalarDist::Mixture { components } => {
                for c in components {
                    c.dist.decompose_into(weight * c.weight, modes, bounded);
                }
            }
            other => bounded.push((weight, other.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_laplace_and_lbar() {
        let d = ScalarDist::exp(1.0);
        assert!((d.laplace(1.0) - 0.5).abs() < 1e-15);
        assert!((d.lbar(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(d.lbar(0.0), 1.0);
    }

    #[test]
    fn det_lbar_at_zero_is_the_atom() {
        assert_eq!(ScalarDist::det(2.5).lbar(0.0), 2.5);
        // continuity near zero
        assert!((ScalarDist::det(2.5).lbar(1e-9) - 2.5).abs() < 1e-8);
    }

    #[test]
    fn uniform_laplace_closed_form_matches_quadrature() {
        let d = ScalarDist::uniform(2.0);
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((d.laplace(1.0) - expected).abs() < 1e-14);
        assert!((d.laplace(1.0) - 0.43233).abs() < 1e-5);
        let quad = integrate(|z| 0.5 * (-z).exp(), 0.0, 2.0, 1e-13);
        assert!((d.laplace(1.0) - quad).abs() < 1e-10);
        // lbar series and closed form agree across the switch
        let beta: f64 = 1.0e-4 / 2.0;
        let x = beta * 2.0;
        let series = 2.0 * (0.5 - x / 6.0 + x * x / 24.0);
        let closed = ((-x).exp_m1() + x) / (beta * x);
        assert!((series - closed).abs() < 1e-9);
        assert!((d.lbar(beta * 0.999) - series).abs() < 1e-7);
    }

    #[test]
    fn truncated_moments() {
        let d = ScalarDist::truncated(ScalarDist::exp(1.0), 2.0);
        assert!((d.mean() - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        let generic = 2.0 * integrate(|z| z * (-z).exp(), 0.0, 2.0, 1e-13);
        assert!((d.second_moment() - generic).abs() < 1e-10);
        let via_l = (1.0 - d.laplace(0.7)) / 0.7;
        assert!((d.lbar(0.7) - via_l).abs() < 1e-12);
        assert!(d.is_ihr());
    }

    #[test]
    fn empirical_sorted_and_exact() {
        let d = ScalarDist::empirical(vec![3.0, 1.0, 2.0]);
        assert!((d.cdf(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.tail(2.5), 1.0 / 3.0);
        assert!((d.mean() - 2.0).abs() < 1e-15);
        let l: f64 = [1.0f64, 2.0, 3.0]
            .iter()
            .map(|s| (-0.5 * s).exp())
            .sum::<f64>()
            / 3.0;
        assert!((d.laplace(0.5) - l).abs() < 1e-15);
    }

    #[test]
    fn ihr_catalog_and_hyperexponential() {
        assert!(ScalarDist::exp(1.0).is_ihr());
        assert!(ScalarDist::det(3.0).is_ihr());
        assert!(ScalarDist::uniform(1.0).is_ihr());
        let hyper =
            ScalarDist::mixture([(0.5, ScalarDist::exp(1.0)), (0.5, ScalarDist::exp(10.0))]);
        assert!(!hyper.is_ihr());
        // same-rate mixture is still exponential
        let same = ScalarDist::mixture([(0.3, ScalarDist::exp(2.0)), (0.7, ScalarDist::exp(2.0))]);
        assert!(same.is_ihr());
    }

    #[test]
    fn mixture_weights_validated() {
        let bad = ScalarDist::mixture([(0.5, ScalarDist::exp(1.0)), (0.6, ScalarDist::det(1.0))]);
        assert!(bad.validated().is_err());
    }

    #[test]
    fn mixture_sample_mean() {
        let d = ScalarDist::mixture([(0.5, ScalarDist::det(0.0)), (0.5, ScalarDist::det(2.0))]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.01);
    }

    #[test]
    fn lbar_decreasing_and_convex() {
        for d in [
            ScalarDist::exp(1.0),
            ScalarDist::det(1.0),
            ScalarDist::uniform(2.0),
            ScalarDist::empirical(vec![0.5, 1.0, 4.0]),
            ScalarDist::truncated(ScalarDist::uniform(3.0), 1.0),
        ] {
            let h = 0.05;
            let vals: Vec<f64> = (0..80).map(|i| d.lbar(i as f64 * h)).collect();
            for w in vals.windows(3) {
                assert!(w[1] < w[0], "{d:?} not decreasing");
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12, "{d:?} not convex");
            }
        }
    }

    #[test]
    fn point_masses() {
        assert_eq!(ScalarDist::det(1.0).point_mass(), Some(1.0));
        assert_eq!(
            ScalarDist::truncated(ScalarDist::det(5.0), 2.0).point_mass(),
            Some(2.0)
        );
        assert_eq!(
            ScalarDist::truncated(ScalarDist::exp(1.0), 2.0).point_mass(),
            None
        );
        assert_eq!(
            ScalarDist::empirical(vec![1.0, 1.0]).point_mass(),
            Some(1.0)
        );
    }
}
