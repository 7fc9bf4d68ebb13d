//! The single-particle operator: one tagged particle moving in a frozen
//! environment.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::field::{levy_distance, TailField};
use crate::model::SystemConfig;
use crate::sim::coc_jump_into;

/// Share of the events discarded before recording.
const BURN_IN: f64 = 0.1;
/// Largest Lévy distance between the two halves of the record.
const HALF_TOL: f64 = 0.05;
/// Largest shift between the halves' medians, relative to the spread.
const MEDIAN_TOL: f64 = 0.25;

/// Long-run location law of a particle that drifts left at speed `v`
/// (stopping at `frame.left`) and is selected by jobs at rate `alpha`,
/// with the class of each job drawn in proportion to `sigma_j d_j` and its
/// `d_j - 1` companions sampled independently from `x`. The particle jumps
/// by the cancel-on-completion rule and is clamped at `frame.right`.
///
/// The law is recorded just before each of `events` jumps, which sees the
/// time average since jumps are Poisson. Fails with `NONCONVERGED` when
/// the two halves of the record disagree.
pub fn opfp_apply<R: Rng + ?Sized>(
    x: &TailField,
    cfg: &SystemConfig,
    v: f64,
    events: usize,
    rng: &mut R,
) -> Result<TailField> {
    if !(v >= 0.0) {
        return Err(Error::ParamRange(format!("speed must be >= 0, got {v}")));
    }
    if events < 100 {
        return Err(Error::ParamRange(format!(
            "need at least 100 events, got {events}"
        )));
    }
    cfg.frame.validate()?;
    let alpha = cfg.alpha();
    if !(alpha > 0.0) {
        return Err(Error::ZeroTotalRate);
    }
    let classes: Vec<_> = cfg.classes.iter().filter(|c| c.sigma > 0.0).collect();
    let weights: Vec<f64> = classes
        .iter()
        .map(|c| c.sigma * c.d as f64 / alpha)
        .collect();
    let (lo, hi) = (cfg.frame.lower(), cfg.frame.upper());

    let start = x.inverse(0.5);
    let mut y = if start.is_finite() { start } else { 0.0 }.clamp(lo, hi);
    let skip = (BURN_IN * events as f64) as usize;
    let mut record = Vec::with_capacity(events - skip);
    let (mut locs, mut sizes, mut out, mut scratch) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for e in 0..events {
        let gap: f64 = Exp1.sample(rng);
        y = (y - v * gap / alpha).max(lo);
        if e >= skip {
            record.push(y);
        }
        let mut u = rng.random::<f64>();
        let c = classes
            .iter()
            .zip(&weights)
            .find(|(_, w)| {
                u -= **w;
                u < 0.0
            })
            .map_or(classes[classes.len() - 1], |p| *p.0);
        locs.clear();
        locs.push(y);
        locs.extend((1..c.d).map(|_| x.inverse(rng.random::<f64>()).clamp(lo, hi)));
        sizes.resize(c.d, 0.0);
        out.resize(c.d, 0.0);
        c.sizes.sample_into(&mut sizes, rng);
        coc_jump_into(&locs, &sizes, c.k, hi, &mut scratch, &mut out)?;
        y = out[0];
        if !y.is_finite() {
            return Err(Error::NonConverged(format!(
                "tagged particle escaped to {y}"
            )));
        }
    }
    let half = record.len() / 2;
    let first = TailField::from_samples(&record[..half])?;
    let second = TailField::from_samples(&record[half..])?;
    let all = TailField::from_samples(&record)?;
    // the compactified metric cannot see a drift far from the origin, so
    // the medians are compared on the scale of the spread as well
    let gap = levy_distance(&first, &second);
    let shift = (second.inverse(0.5) - first.inverse(0.5)).abs();
    let iqr = all.inverse(0.25) - all.inverse(0.75);
    if gap > HALF_TOL || shift > MEDIAN_TOL * iqr {
        return Err(Error::NonConverged(format!(
            "halves of the occupation record differ by {gap:.4} in Lévy distance, medians by {shift:.4}"
        )));
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::defp::{defp_integrate, DefpOptions};
    use crate::meanfield::result::Classification;
    use crate::model::{Frame, JobClass, ScalarDist};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn artificial() -> (SystemConfig, TailField) {
        let cfg = SystemConfig::new(
            vec![JobClass::iid(1, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::right(0.0),
            0.0,
        );
        let grid: Vec<f64> = (0..=3000).map(|i| -30.0 + i as f64 * 0.01).collect();
        (cfg, TailField::from_fn(grid, |w| 1.0 - w.exp()).unwrap())
    }

    #[test]
    fn exact_fixed_point_is_reproduced() {
        let (cfg, x) = artificial();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = opfp_apply(&x, &cfg, 0.5, 200_000, &mut rng).unwrap();
        assert!(levy_distance(&x, &y) <= 0.02);
    }

    #[test]
    fn shifted_field_is_not_reproduced() {
        let (cfg, x) = artificial();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let moved = x.shifted(-1.0);
        let y = opfp_apply(&moved, &cfg, 0.5, 200_000, &mut rng).unwrap();
        assert!(levy_distance(&moved, &y) > 0.05);
    }

    #[test]
    fn right_regulated_fixed_point_is_reproduced() {
        let cfg = SystemConfig::new(
            vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::FREE,
            0.0,
        );
        let r = defp_integrate(&cfg, 0.5, &DefpOptions::default()).unwrap();
        let Classification::HitAxis { w_star } = r.classification else {
            panic!("{:?}", r.classification);
        };
        let x = r.field.shifted(-w_star);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = opfp_apply(
            &x,
            &cfg.with_frame(Frame::right(0.0)),
            0.5,
            200_000,
            &mut rng,
        )
        .unwrap();
        assert!(levy_distance(&x, &y) <= 0.02);
    }

    #[test]
    fn empty_environment_never_settles() {
        let cfg = SystemConfig::new(
            vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
            Frame::FREE,
            0.0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = opfp_apply(&TailField::at_infinity(), &cfg, 1.0, 100_000, &mut rng).unwrap_err();
        assert_eq!(e.code().as_str(), "NONCONVERGED");
    }
}
