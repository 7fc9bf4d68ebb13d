//! The crossing functional `h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::TailField;
use crate::model::{ScalarDist, SystemConfig};
use crate::numeric::binomial_upper_tail;
use crate::sim::{coc_jump_into, Estimate};

/// Default Monte Carlo budget for classes without iid components.
const MC_SAMPLES: usize = 400_000;
const MC_TARGET_SE: f64 = 2e-3;
const MC_SEED: u64 = 0x4c_7a11;

/// `h(x_{(-inf, w]})`: expected number of selected particles moving from
/// `(-inf, w]` to `(w, inf)` per job arrival, with particle locations drawn
/// independently from `x`.
///
/// Exact for iid classes; otherwise a seeded Monte Carlo estimate that fails
/// with `MC_VARIANCE_EXCEEDED` when its standard error is too large.
pub fn compute_h(x: &TailField, w: f64, cfg: &SystemConfig) -> Result<f64> {
    let lambda = cfg.lambda();
    if !(lambda > 0.0) {
        return Err(Error::ZeroTotalRate);
    }
    if cfg.all_iid() {
        return Ok(lambda_h_exact(x, w, cfg) / lambda);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    let est = compute_h_mc(x, w, cfg, MC_SAMPLES, &mut rng)?;
    let se = est.half_width / 1.96;
    if se > MC_TARGET_SE * est.mean.max(1.0) {
        return Err(Error::McVarianceExceeded {
            achieved: se,
            requested: MC_TARGET_SE,
        });
    }
    Ok(est.mean)
}

/// `lambda h` for iid classes.
pub(crate) fn lambda_h_exact(x: &TailField, w: f64, cfg: &SystemConfig) -> f64 {
    let xw = x.eval(w);
    let mut total = 0.0;
    for c in cfg.classes.iter().filter(|c| c.sigma > 0.0) {
        let dist = c.sizes.iid_dist().expect("iid class");
        let i = started_unfinished(x, w, dist);
        let q = (xw + i).clamp(0.0, 1.0);
        total += c.sigma * c.d as f64 * i * binomial_upper_tail(c.d - 1, q, c.d - c.k);
    }
    total
}

/// `P(u <= w < u + xi)` for `u ~ x` (finite part) and `xi ~ dist`.
fn started_unfinished(x: &TailField, w: f64, dist: &ScalarDist) -> f64 {
    let i = x.integrate_measure(
        |u| if u <= w { dist.tail(w - u) } else { 0.0 },
        |a, b| {
            if a >= w {
                return 0.0;
            }
            let b = b.min(w);
            dist.integrated_tail(w - a) - dist.integrated_tail(w - b)
        },
    );
    i.max(0.0)
}

/// Monte Carlo estimate of `h`: `m` tagged draws per class, each counting
/// how many of the `d` selected particles cross `w`.
pub fn compute_h_mc<R: Rng + ?Sized>(
    x: &TailField,
    w: f64,
    cfg: &SystemConfig,
    m: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if m < 2 {
        return Err(Error::ParamRange(
            "need at least two Monte Carlo draws".into(),
        ));
    }
    let lambda = cfg.lambda();
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut locs = Vec::new();
    let mut sizes = Vec::new();
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    for c in cfg.classes.iter().filter(|c| c.sigma > 0.0) {
        locs.resize(c.d, 0.0);
        sizes.resize(c.d, 0.0);
        out.resize(c.d, 0.0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            for l in locs.iter_mut() {
                *l = x.inverse(rng.random::<f64>());
            }
            c.sizes.sample_into(&mut sizes, rng);
            coc_jump_into(&locs, &sizes, c.k, f64::INFINITY, &mut scratch, &mut out)?;
            let crossed = locs
                .iter()
                .zip(&out)
                .filter(|(a, b)| **a <= w && **b > w)
                .count() as f64;
            s += crossed;
            s2 += crossed * crossed;
        }
        let mu = s / m as f64;
        let sv = (s2 / m as f64 - mu * mu).max(0.0) * m as f64 / (m - 1) as f64;
        let wt = c.sigma / lambda;
        mean += wt * mu;
        var += wt * wt * sv / m as f64;
    }
    Ok(Estimate {
        mean,
        half_width: 1.96 * var.sqrt(),
        batches: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Frame, JobClass};
    use proptest::prelude::*;

    fn single(d: usize, k: usize, dist: ScalarDist) -> SystemConfig {
        SystemConfig::new(vec![JobClass::iid(d, k, 1.0, dist)], Frame::FREE, 0.0)
    }

    #[test]
    fn nothing_below_level_gives_zero() {
        let cfg = single(2, 1, ScalarDist::exp(1.0));
        let x = TailField::point_mass(3.0);
        assert_eq!(compute_h(&x, 1.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn single_exp_at_point_mass() {
        let cfg = single(1, 1, ScalarDist::exp(1.0));
        let x = TailField::point_mass(0.0);
        let h = compute_h(&x, 1.0, &cfg).unwrap();
        assert!((h - (-1.0f64).exp()).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc = compute_h_mc(&x, 1.0, &cfg, 200_000, &mut rng).unwrap();
        assert!((mc.mean - h).abs() < 4.0 * mc.half_width.max(1e-3));
    }

    #[test]
    fn both_det_components_cross() {
        let cfg = single(2, 1, ScalarDist::det(1.0));
        let x = TailField::point_mass(0.0);
        assert!((compute_h(&x, 0.5, &cfg).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn point_mass_single_component_is_survival() {
        // at t = 0 the particle at the origin crosses w iff its size exceeds w
        for dist in [
            ScalarDist::exp(1.3),
            ScalarDist::uniform(2.0),
            ScalarDist::det(0.7),
        ] {
            let cfg = single(1, 1, dist.clone());
            for w in [0.1, 0.5, 0.9, 1.7] {
                let h = compute_h(&TailField::point_mass(0.0), w, &cfg).unwrap();
                assert!((h - dist.tail(w)).abs() < 1e-12, "{dist:?} w={w}");
            }
        }
    }

    fn mc_agrees(x: &TailField, cfg: &SystemConfig, ws: &[f64], seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &w in ws {
            let exact = compute_h(x, w, cfg).unwrap();
            let mc = compute_h_mc(x, w, cfg, 200_000, &mut rng).unwrap();
            assert!(
                (mc.mean - exact).abs() <= 4.0 * mc.half_width + 1e-6,
                "w={w}: exact {exact} mc {} +- {}",
                mc.mean,
                mc.half_width
            );
        }
    }

    #[test]
    fn factorized_form_matches_crossing_counts() {
        let grid: Vec<f64> = (0..=800).map(|i| -2.0 + i as f64 * 0.01).collect();
        let smooth = TailField::from_fn(grid, |w| {
            if w < 0.0 {
                1.0 - 0.5 * (2.0 * w).exp()
            } else {
                0.5 * (-w).exp()
            }
        })
        .unwrap();
        mc_agrees(
            &smooth,
            &single(2, 1, ScalarDist::exp(1.0)),
            &[-1.0, 0.0, 0.7, 2.5],
            11,
        );
        mc_agrees(
            &smooth,
            &single(3, 2, ScalarDist::uniform(2.0)),
            &[-0.5, 0.3, 1.5],
            12,
        );
        let atoms = TailField::from_samples(&[-0.4, 0.0, 0.0, 0.35, 1.2, 2.0]).unwrap();
        let mixed = SystemConfig::new(
            vec![
                JobClass::iid(2, 1, 0.7, ScalarDist::det(1.0)),
                JobClass::iid(4, 2, 0.3, ScalarDist::exp(0.5)),
            ],
            Frame::FREE,
            0.0,
        );
        mc_agrees(&atoms, &mixed, &[-0.2, 0.0, 0.5, 1.2, 2.4], 13);
    }

    #[test]
    fn exchangeable_classes_use_monte_carlo() {
        let cfg = SystemConfig::new(
            vec![JobClass {
                d: 2,
                k: 1,
                sigma: 1.0,
                sizes: crate::model::ComponentModel::Sampler {
                    sampler: crate::model::NamedSampler::Identical {
                        dist: ScalarDist::exp(1.0),
                    },
                },
            }],
            Frame::FREE,
            0.0,
        );
        // both components share one size: they cross together
        let h = compute_h(&TailField::point_mass(0.0), 1.0, &cfg).unwrap();
        assert!((h - 2.0 * (-1.0f64).exp()).abs() < 1e-2, "{h}");
    }

    fn sup_below(x: &TailField, y: &TailField, w: f64) -> f64 {
        x.grid()
            .iter()
            .chain(y.grid())
            .copied()
            .filter(|u| *u <= w)
            .chain([w])
            .flat_map(|u| {
                [
                    (x.eval(u) - y.eval(u)).abs(),
                    (x.eval_left(u) - y.eval_left(u)).abs(),
                ]
            })
            .fold(0.0, f64::max)
    }

    fn arb_dist() -> impl Strategy<Value = ScalarDist> {
        prop_oneof![
            (0.3f64..3.0).prop_map(ScalarDist::exp),
            (0.1f64..2.0).prop_map(ScalarDist::det),
            (0.1f64..3.0).prop_map(ScalarDist::uniform),
        ]
    }

    fn arb_class() -> impl Strategy<Value = JobClass> {
        (1usize..5, 0.1f64..2.0, arb_dist()).prop_flat_map(|(d, s, dist)| {
            (1..=d).prop_map(move |k| JobClass::iid(d, k, s, dist.clone()))
        })
    }

    fn arb_field() -> impl Strategy<Value = TailField> {
        prop::collection::vec(-2.0f64..2.0, 1..15)
            .prop_map(|s| TailField::from_samples(&s).unwrap())
    }

    proptest! {
        #[test]
        fn lipschitz_in_the_field(
            classes in prop::collection::vec(arb_class(), 1..3),
            x in arb_field(),
            y in arb_field(),
            w in -2.5f64..2.5,
        ) {
            let cfg = SystemConfig::new(classes, Frame::FREE, 0.0);
            let dbar = cfg.classes.iter().map(|c| c.d).max().unwrap() as f64;
            let gap = (compute_h(&x, w, &cfg).unwrap() - compute_h(&y, w, &cfg).unwrap()).abs();
            prop_assert!(gap <= dbar * dbar * sup_below(&x, &y, w) + 1e-9);
        }

        #[test]
        fn monotone_in_rates(
            classes in prop::collection::vec(arb_class(), 1..3),
            bump in 0.0f64..2.0,
            j in 0usize..2,
            x in arb_field(),
            w in -2.5f64..2.5,
        ) {
            let cfg = SystemConfig::new(classes, Frame::FREE, 0.0);
            let mut more = cfg.clone();
            let j = j % more.classes.len();
            more.classes[j].sigma += bump;
            let before = lambda_h_exact(&x, w, &cfg);
            let after = lambda_h_exact(&x, w, &more);
            prop_assert!(after >= before - 1e-12);
        }
    }
}
