//! Monte Carlo check that the expected total displacement of a job's
//! selected particles does not grow with their spread.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::JobClass;
use crate::sim::{batch_means, coc_jump_into, Estimate};

const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementPoint {
    /// Gaps between consecutive ordered locations, `d - 1` of them.
    pub gaps: Vec<f64>,
    pub eta: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DMonotonicityReport {
    pub points: Vec<DisplacementPoint>,
    /// Index pairs `(i, j)` with `gaps_i >= gaps_j` componentwise whose
    /// estimates increase beyond their joint interval.
    pub violations: Vec<(usize, usize)>,
    /// No estimate is distinguishable from any other: the class displaces
    /// the same expected work whatever the spread.
    pub constant: bool,
}

impl DMonotonicityReport {
    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Estimates `E eta(D)` at each gap vector with common random sizes, so
/// that differences between points are not blurred by independent noise.
pub fn d_monotonicity_check<R: Rng + ?Sized>(
    class: &JobClass,
    gap_grid: &[Vec<f64>],
    samples: usize,
    rng: &mut R,
) -> Result<DMonotonicityReport> {
    let d = class.d;
    if d < 2 {
        return Err(Error::ParamRange(format!("need d >= 2, got {d}")));
    }
    if gap_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(g) = gap_grid
        .iter()
        .find(|g| g.len() != d - 1 || g.iter().any(|x| !(*x >= 0.0 && x.is_finite())))
    {
        return Err(Error::ParamRange(format!(
            "gap vector {g:?} is not {} finite non-negative values",
            d - 1
        )));
    }
    if samples < BATCHES {
        return Err(Error::ParamRange(format!(
            "need at least {BATCHES} samples, got {samples}"
        )));
    }
    let locations: Vec<Vec<f64>> = gap_grid
        .iter()
        .map(|g| {
            std::iter::once(0.0)
                .chain(g.iter().scan(0.0, |z, x| {
                    *z += x;
                    Some(*z)
                }))
                .collect()
        })
        .collect();
    let per = samples / BATCHES;
    let mut sums = vec![vec![0.0; BATCHES]; gap_grid.len()];
    let (mut sizes, mut out, mut scratch) = (vec![0.0; d], vec![0.0; d], Vec::new());
    for b in 0..BATCHES {
        for _ in 0..per {
            class.sizes.sample_into(&mut sizes, rng);
            for (loc, s) in locations.iter().zip(sums.iter_mut()) {
                coc_jump_into(loc, &sizes, class.k, f64::INFINITY, &mut scratch, &mut out)?;
                s[b] += out.iter().zip(loc).map(|(a, z)| a - z).sum::<f64>();
            }
        }
    }
    let points: Vec<DisplacementPoint> = gap_grid
        .iter()
        .zip(&sums)
        .map(|(g, s)| {
            let means: Vec<f64> = s.iter().map(|x| x / per as f64).collect();
            DisplacementPoint {
                gaps: g.clone(),
                eta: batch_means(&means),
            }
        })
        .collect();
    let mut violations = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            let wider = i != j && p.gaps.iter().zip(&q.gaps).all(|(a, b)| a >= b);
            if wider && p.eta.mean - q.eta.mean > p.eta.half_width + q.eta.half_width {
                violations.push((i, j));
            }
        }
    }
    let constant = points.iter().all(|p| {
        points
            .iter()
            .all(|q| (p.eta.mean - q.eta.mean).abs() <= p.eta.half_width + q.eta.half_width)
    });
    Ok(DMonotonicityReport {
        points,
        violations,
        constant,
    })
}
