//! Fixtures shared by the benchmarks.

use cocwave::{Frame, JobClass, ScalarDist, SystemConfig, TailField};
use rand::Rng;

/// `d = 2, k = 1` with unit-mean exponential components.
pub fn exp_pair(frame: Frame, v: f64) -> SystemConfig {
    SystemConfig::new(
        vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
        frame,
        v,
    )
}

/// Two classes with different redundancy and size laws.
pub fn mixed(frame: Frame, v: f64) -> SystemConfig {
    SystemConfig::new(
        vec![
            JobClass::iid(3, 1, 0.5, ScalarDist::uniform(2.0)),
            JobClass::iid(2, 2, 0.5, ScalarDist::det(0.5)),
        ],
        frame,
        v,
    )
}

pub fn exp_field() -> TailField {
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.01).collect();
    TailField::from_fn(grid, |w| (-w).exp()).expect("valid field")
}

pub fn random_samples<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| -rng.random::<f64>().ln()).collect()
}
