//! Tail fields: non-increasing `[0,1]`-valued functions `x_w`, the fraction
//! of particles strictly to the right of `w`, with explicit mass at `±inf`.

mod io;
mod levy;

pub use io::{read_csv, write_csv};
pub use levy::levy_distance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a field is interpolated between breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Value `values[i]` on `[grid[i], grid[i+1])`.
    Step,
    /// Linear between breakpoints.
    Linear,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Step => "step",
            Mode::Linear => "linear",
        }
    }
}

/// A tail field. Left of the first breakpoint it equals `x_neg_inf`; from
/// the last breakpoint on it equals the last value, which is the mass at
/// `+inf`. A jump at the first breakpoint is an atom there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailField {
    grid: Vec<f64>,
    values: Vec<f64>,
    mode: Mode,
    x_neg_inf: f64,
}

impl TailField {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, mode: Mode, x_neg_inf: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyInput);
        }
        if grid.len() != values.len() {
            return Err(Error::Parse(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().any(|w| !w.is_finite()) || grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Parse(
                "grid must be finite and strictly increasing".into(),
            ));
        }
        if !(0.0..=1.0).contains(&x_neg_inf) {
            return Err(Error::Parse(format!("x_-inf = {x_neg_inf} outside [0,1]")));
        }
        let mut prev = x_neg_inf;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) || v > prev {
                return Err(Error::Parse(
                    "values must be non-increasing in [0, 1]".into(),
                ));
            }
            prev = v;
        }
        Ok(TailField {
            grid,
            values,
            mode,
            x_neg_inf,
        })
    }

    /// Builds a field from approximately monotone numeric output: values are
    /// clamped to `[0,1]` and made non-increasing.
    pub fn from_numeric(grid: Vec<f64>, mut values: Vec<f64>, mode: Mode) -> Result<Self> {
        let mut prev: f64 = 1.0;
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0).min(prev);
            prev = *v;
        }
        Self::new(grid, values, mode, 1.0)
    }

    /// Empirical tail of particle locations (`±inf` entries allowed).
    pub fn from_samples(locations: &[f64]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyInput);
        }
        if locations.iter().any(|w| w.is_nan()) {
            return Err(Error::Parse("NaN location".into()));
        }
        let n = locations.len();
        let mut sorted: Vec<f64> = locations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let below = sorted.partition_point(|w| *w == f64::NEG_INFINITY);
        let finite_end = sorted.partition_point(|w| *w < f64::INFINITY);
        let x_neg_inf = (n - below) as f64 / n as f64;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut i = below;
        while i < finite_end {
            let w = sorted[i];
            while i < finite_end && sorted[i] == w {
                i += 1;
            }
            grid.push(w);
            values.push((n - i) as f64 / n as f64);
        }
        if grid.is_empty() {
            grid.push(0.0);
            values.push((n - finite_end) as f64 / n as f64);
        }
        Self::new(grid, values, Mode::Step, x_neg_inf)
    }

    /// All mass at `a`.
    pub fn point_mass(a: f64) -> Self {
        TailField {
            grid: vec![a],
            values: vec![0.0],
            mode: Mode::Step,
            x_neg_inf: 1.0,
        }
    }

    /// The empty state `I{w < 0}`: every particle at the origin.
    pub fn empty_state() -> Self {
        Self::point_mass(0.0)
    }

    /// All mass at `+inf`.
    pub fn at_infinity() -> Self {
        TailField {
            grid: vec![0.0],
            values: vec![1.0],
            mode: Mode::Step,
            x_neg_inf: 1.0,
        }
    }

    /// Samples `f` on `grid` as a linear field.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|w| f(*w)).collect();
        Self::from_numeric(grid, values, Mode::Linear)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn x_neg_inf(&self) -> f64 {
        self.x_neg_inf
    }

    pub fn x_pos_inf(&self) -> f64 {
        *self.values.last().expect("non-empty field")
    }

    pub fn is_proper(&self) -> bool {
        self.x_pos_inf() == 0.0 && self.x_neg_inf == 1.0
    }

    /// `x_w`.
    pub fn eval(&self, w: f64) -> f64 {
        let g = &self.grid;
        if w < g[0] {
            return self.x_neg_inf;
        }
        let i = g.partition_point(|u| *u <= w) - 1;
        if i + 1 == g.len() || self.mode == Mode::Step {
            return self.values[i];
        }
        let (w0, w1) = (g[i], g[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * (w - w0) / (w1 - w0)
    }

    /// Left limit `x_{w-}`.
    pub fn eval_left(&self, w: f64) -> f64 {
        let g = &self.grid;
        if w <= g[0] {
            return self.x_neg_inf;
        }
        match self.mode {
            Mode::Step => self.values[g.partition_point(|u| *u < w) - 1],
            Mode::Linear => self.eval(w),
        }
    }

    /// Same field translated right by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        TailField {
            grid: self.grid.iter().map(|w| w + c).collect(),
            ..self.clone()
        }
    }

    /// `sup {w : x_w > u}`, `-inf` when the set is empty.
    pub fn inverse(&self, u: f64) -> f64 {
        if self.x_pos_inf() > u {
            return f64::INFINITY;
        }
        if self.x_neg_inf <= u {
            return f64::NEG_INFINITY;
        }
        let j = self.values.partition_point(|v| *v > u);
        if j == 0 || self.mode == Mode::Step {
            return self.grid[j];
        }
        let (w0, w1) = (self.grid[j - 1], self.grid[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        w0 + (v0 - u) / (v0 - v1) * (w1 - w0)
    }

    /// `int g d[-x]` over finite locations; `seg(a, b)` must return
    /// `int_a^b g(u) du`.
    pub(crate) fn integrate_measure(
        &self,
        atom: impl Fn(f64) -> f64,
        seg: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let mut total = 0.0;
        let mut prev = self.x_neg_inf;
        match self.mode {
            Mode::Step => {
                for (w, v) in self.grid.iter().zip(&self.values) {
                    let m = prev - v;
                    if m > 0.0 {
                        total += m * atom(*w);
                    }
                    prev = *v;
                }
            }
            Mode::Linear => {
                let m0 = prev - self.values[0];
                if m0 > 0.0 {
                    total += m0 * atom(self.grid[0]);
                }
                for i in 0..self.grid.len() - 1 {
                    let (a, b) = (self.grid[i], self.grid[i + 1]);
                    let m = self.values[i] - self.values[i + 1];
                    if m > 0.0 {
                        total += m / (b - a) * seg(a, b);
                    }
                }
            }
        }
        total
    }

    fn require_proper(&self) -> Result<()> {
        if !self.is_proper() {
            return Err(Error::ImproperField {
                x_pos_inf: self.x_pos_inf(),
                x_neg_inf: self.x_neg_inf,
            });
        }
        Ok(())
    }

    /// Mean location `int_0^inf x - int_-inf^0 (1 - x)`.
    pub fn mean(&self) -> Result<f64> {
        self.require_proper()?;
        let m = self.integrate_measure(|u| u, |a, b| 0.5 * (b * b - a * a));
        if !m.is_finite() {
            return Err(Error::Divergent);
        }
        Ok(m)
    }

    /// The field translated so its mean is zero.
    pub fn center(&self) -> Result<Self> {
        let m = self.mean()?;
        let mut c = self.shifted(-m);
        // one correction pass for the rounding of the shifted grid
        let r = c.mean()?;
        if r != 0.0 && r.abs() < 1e-6 * (1.0 + m.abs()) {
            c = c.shifted(-r);
        }
        Ok(c)
    }

    /// `int |u - mean|^l d[-x_u]`.
    pub fn phi_moment(&self, l: u32) -> Result<f64> {
        let m = self.mean()?;
        let p = l as i32;
        let anti = |u: f64| {
            let y = u - m;
            y.signum() * y.abs().powi(p + 1) / (p + 1) as f64
        };
        let r = self.integrate_measure(|u| (u - m).abs().powi(p), |a, b| anti(b) - anti(a));
        if !r.is_finite() {
            return Err(Error::Divergent);
        }
        Ok(r)
    }

    /// Sup of `|x - y|` over both breakpoint sets (and left limits).
    pub fn sup_distance(&self, other: &TailField) -> f64 {
        let mut d: f64 = (self.x_neg_inf - other.x_neg_inf)
            .abs()
            .max((self.x_pos_inf() - other.x_pos_inf()).abs());
        for w in self.grid.iter().chain(other.grid.iter()) {
            d = d.max((self.eval(*w) - other.eval(*w)).abs());
            d = d.max((self.eval_left(*w) - other.eval_left(*w)).abs());
        }
        d
    }
}
