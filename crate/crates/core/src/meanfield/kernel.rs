//! Fast evaluation of `lambda h` along a uniform grid.
//!
//! The field is piecewise linear between grid points `w_i = w_0 + i dx`,
//! equal to one left of `w_0` (so `1 - x_0` is an atom at `w_0`). For an
//! iid class with component tail `Hbar`, a tagged particle selected at `u`
//! crosses `w` when its own potential exceeds `w` and fewer than `k`
//! companions have potentials at or below `w`:
//!
//! `lambda h(w) = sum_j sigma_j d_j I_j(w) P(Bin(d_j - 1, x_w + I_j(w)) >= d_j - k_j)`
//!
//! with `I_j(w) = int_{u <= w} Hbar_j(w - u) [-dx_u]`. The convolution is
//! split by kernel shape: exponential modes by recursion, point masses and
//! uniforms through the field and its running integral, anything else by a
//! finite table.

use crate::error::{Error, Result};
use crate::model::{ScalarDist, SystemConfig};
use crate::numeric::binomial_upper_tail;

/// Empirical laws with at most this many atoms use exact point-mass
/// kernels; larger ones are tabulated.
const MAX_EXACT_ATOMS: usize = 32;

#[derive(Debug, Clone)]
struct ExpMode {
    weight: f64,
    decay: f64,
    gain: f64,
}

#[derive(Debug, Clone)]
enum Bounded {
    /// `Hbar(z) = 1{z < a}`.
    Step { weight: f64, a: f64 },
    /// `Hbar(z) = (1 - z / b)^+`.
    Ramp { weight: f64, b: f64 },
    /// `atom[m] = Hbar(m dx)`, `cell[m] = int_{(m-1)dx}^{m dx} Hbar`.
    Table {
        weight: f64,
        atom: Vec<f64>,
        cell: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct ClassKernel {
    coef: f64,
    d: usize,
    k: usize,
    modes: Vec<ExpMode>,
    bounded: Vec<Bounded>,
}

/// `lambda h` on a uniform grid for a configuration with iid classes.
#[derive(Debug, Clone)]
pub struct HOperator {
    dx: f64,
    classes: Vec<ClassKernel>,
}

impl HOperator {
    pub fn new(cfg: &SystemConfig, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::ParamRange(format!(
                "grid step must be positive, got {dx}"
            )));
        }
        let mut classes = Vec::new();
        for c in cfg.classes.iter().filter(|c| c.sigma > 0.0) {
            let dist = c.sizes.iid_dist().ok_or_else(|| {
                Error::UnknownFamily("exact crossing rates need iid component sizes".into())
            })?;
            let (modes, bounded) = dist.decompose();
            let mut kern = ClassKernel {
                coef: c.sigma * c.d as f64,
                d: c.d,
                k: c.k,
                modes: modes
                    .into_iter()
                    .map(|(weight, r)| ExpMode {
                        weight,
                        decay: (-r * dx).exp(),
                        gain: -(-r * dx).exp_m1() / r,
                    })
                    .collect(),
                bounded: Vec::new(),
            };
            for (weight, b) in bounded {
                push_bounded(&mut kern.bounded, weight, &b, dx);
            }
            classes.push(kern);
        }
        Ok(HOperator { dx, classes })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn sweep(&self) -> HSweep<'_> {
        HSweep {
            op: self,
            acc: self
                .classes
                .iter()
                .map(|c| vec![0.0; c.modes.len()])
                .collect(),
            pending: self
                .classes
                .iter()
                .map(|c| vec![0.0; c.modes.len()])
                .collect(),
            prefix: Vec::new(),
        }
    }

    /// `lambda h` at every grid point of `x`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.sweep();
        (0..x.len()).map(|n| s.commit(&x[..=n])).collect()
    }
}

fn push_bounded(out: &mut Vec<Bounded>, weight: f64, dist: &ScalarDist, dx: f64) {
    match dist {
        ScalarDist::Deterministic { value } => out.push(Bounded::Step { weight, a: *value }),
        ScalarDist::Uniform { upper } => out.push(Bounded::Ramp { weight, b: *upper }),
        ScalarDist::Empirical { samples } if distinct(samples) <= MAX_EXACT_ATOMS => {
            let m = samples.len() as f64;
            let mut i = 0;
            while i < samples.len() {
                let a = samples[i];
                let j = samples.partition_point(|s| *s <= a);
                out.push(Bounded::Step {
                    weight: weight * (j - i) as f64 / m,
                    a,
                });
                i = j;
            }
        }
        other => {
            let top = other
                .support_max()
                .unwrap_or_else(|| other.effective_max(1e-16));
            let cells = (top / dx).ceil() as usize + 1;
            let atom = (0..=cells).map(|m| other.tail(m as f64 * dx)).collect();
            let mut cell = vec![0.0; cells + 1];
            for (m, c) in cell.iter_mut().enumerate().skip(1) {
                *c = other.integrated_tail(m as f64 * dx)
                    - other.integrated_tail((m - 1) as f64 * dx);
            }
            out.push(Bounded::Table { weight, atom, cell });
        }
    }
}

/// Rounds fractional indices that are integers up to floating error, so
/// that atoms aligned with the grid are resolved consistently.
fn snap(pos: f64) -> f64 {
    let r = pos.round();
    if (pos - r).abs() < 1e-9 {
        r
    } else {
        pos
    }
}

fn distinct(sorted: &[f64]) -> usize {
    1 + sorted.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Incremental left-to-right evaluation: `commit(&x[..=n])` returns
/// `lambda h(w_n)` once all earlier points have been committed.
#[derive(Debug, Clone)]
pub struct HSweep<'a> {
    op: &'a HOperator,
    acc: Vec<Vec<f64>>,
    pending: Vec<Vec<f64>>,
    prefix: Vec<f64>,
}

impl HSweep<'_> {
    /// Number of committed points.
    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    /// `lambda h` at the last point of `x` without committing it.
    pub fn trial(&mut self, x: &[f64]) -> f64 {
        let n = x.len() - 1;
        debug_assert_eq!(n, self.prefix.len());
        let dx = self.op.dx;
        let xn = x[n];
        let p_n = if n == 0 {
            0.0
        } else {
            self.prefix[n - 1] + 0.5 * dx * (x[n - 1] + xn)
        };
        let interp = |pos: f64| -> f64 {
            let pos = snap(pos);
            if pos < 0.0 {
                return 1.0;
            }
            let i = pos.floor() as usize;
            if i >= n {
                return xn;
            }
            let f = pos - i as f64;
            x[i] + f * (x[i + 1] - x[i])
        };
        // running integral of the field from w_0 to the fractional index
        let prefix = &self.prefix;
        let running = |pos: f64| -> f64 {
            if pos < 0.0 {
                return pos * dx;
            }
            let i = pos.floor() as usize;
            if i >= n {
                return p_n;
            }
            let f = pos - i as f64;
            let xi = x[i];
            let xp = xi + f * (x[i + 1] - xi);
            prefix[i] + 0.5 * f * dx * (xi + xp)
        };
        let slope = |i: usize| (x[i] - x[i + 1]) / dx;
        let mut total = 0.0;
        for (c, kern) in self.op.classes.iter().enumerate() {
            let mut i_sum = 0.0;
            for (m, mode) in kern.modes.iter().enumerate() {
                let e = if n == 0 {
                    1.0 - x[0]
                } else {
                    mode.decay * self.acc[c][m] + mode.gain * slope(n - 1)
                };
                self.pending[c][m] = e;
                i_sum += mode.weight * e;
            }
            for b in &kern.bounded {
                i_sum += match b {
                    Bounded::Step { weight, a } => weight * (interp(n as f64 - a / dx) - xn),
                    Bounded::Ramp { weight, b } => {
                        weight * ((p_n - running(n as f64 - b / dx)) / b - xn)
                    }
                    Bounded::Table { weight, atom, cell } => {
                        let mut s = if n < atom.len() {
                            (1.0 - x[0]) * atom[n]
                        } else {
                            0.0
                        };
                        let top = n.min(cell.len() - 1);
                        for (m, cm) in cell.iter().enumerate().take(top + 1).skip(1) {
                            s += cm * slope(n - m);
                        }
                        weight * s
                    }
                };
            }
            let i_j = i_sum.max(0.0);
            let q = (xn + i_j).clamp(0.0, 1.0);
            total += kern.coef * i_j * binomial_upper_tail(kern.d - 1, q, kern.d - kern.k);
        }
        total
    }

    /// Evaluates and commits the last point of `x`.
    pub fn commit(&mut self, x: &[f64]) -> f64 {
        let f = self.trial(x);
        let n = x.len() - 1;
        std::mem::swap(&mut self.acc, &mut self.pending);
        let p = if n == 0 {
            0.0
        } else {
            self.prefix[n - 1] + 0.5 * self.op.dx * (x[n - 1] + x[n])
        };
        self.prefix.push(p);
        f
    }
}
