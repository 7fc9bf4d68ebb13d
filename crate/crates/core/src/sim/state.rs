//! Particle positions with lazy drift and the arrival event stream.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{Frame, SystemConfig, ValidatedConfig};

use super::jump::coc_jump_into;

/// Position after drifting left at speed `v` for `dt`, regulated at `left`.
pub fn drift(w: f64, dt: f64, v: f64, left: f64) -> f64 {
    if v == 0.0 {
        return w;
    }
    (w - v * dt).max(left)
}

/// One job arrival: waiting time since the previous one, class, selected
/// particles and their component sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub class: usize,
    pub selected: Vec<usize>,
    pub sizes: Vec<f64>,
}

/// Draws arrival events for an `n`-particle system.
#[derive(Debug, Clone)]
pub struct EventStream {
    cfg: SystemConfig,
    class_cdf: Vec<f64>,
    total_rate: f64,
    perm: Vec<usize>,
}

impl EventStream {
    pub fn new(cfg: &ValidatedConfig, n: usize) -> Result<Self> {
        let dbar = cfg.dbar();
        if n < dbar {
            return Err(Error::NTooSmall { n, dbar });
        }
        let lambda = cfg.lambda();
        let mut acc = 0.0;
        let class_cdf = cfg
            .classes
            .iter()
            .map(|c| {
                acc += c.sigma / lambda;
                acc
            })
            .collect();
        Ok(EventStream {
            cfg: cfg.config.clone(),
            class_cdf,
            total_rate: lambda * n as f64,
            perm: (0..n).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Event {
        let e: f64 = Exp1.sample(rng);
        let dt = e / self.total_rate;
        let u: f64 = rng.random();
        let class = self
            .class_cdf
            .partition_point(|c| *c <= u)
            .min(self.class_cdf.len() - 1);
        let job = &self.cfg.classes[class];
        // partial Fisher-Yates over a persistent permutation
        let n = self.perm.len();
        for i in 0..job.d {
            let j = rng.random_range(i..n);
            self.perm.swap(i, j);
        }
        let selected = self.perm[..job.d].to_vec();
        let sizes = job.sizes.sample(job.d, rng);
        Event {
            dt,
            class,
            selected,
            sizes,
        }
    }
}

/// Locations of the `n` particles in anchored coordinates.
#[derive(Debug, Clone)]
pub struct SimState {
    positions: Vec<f64>,
    stamps: Vec<f64>,
    clock: f64,
    frame: Frame,
    speed: f64,
    ks: Vec<usize>,
    arrivals: Vec<u64>,
    displacement: f64,
    busy_since: Option<f64>,
    busy_time: f64,
    scratch: Vec<f64>,
    old: Vec<f64>,
    new: Vec<f64>,
}

impl SimState {
    pub fn new(cfg: &SystemConfig, positions: Vec<f64>) -> Result<Self> {
        let dbar = cfg.dbar();
        if positions.len() < dbar {
            return Err(Error::NTooSmall {
                n: positions.len(),
                dbar,
            });
        }
        let (a, b) = (cfg.frame.lower(), cfg.frame.upper());
        if let Some(w) = positions.iter().find(|w| !(**w >= a && **w <= b)) {
            return Err(Error::ParamRange(format!(
                "initial position {w} outside the frame"
            )));
        }
        let n = positions.len();
        Ok(SimState {
            positions,
            stamps: vec![0.0; n],
            clock: 0.0,
            frame: cfg.frame,
            speed: cfg.speed,
            ks: cfg.classes.iter().map(|c| c.k).collect(),
            arrivals: vec![0; cfg.classes.len()],
            displacement: 0.0,
            busy_since: None,
            busy_time: 0.0,
            scratch: Vec::new(),
            old: Vec::new(),
            new: Vec::new(),
        })
    }

    /// Every particle at `w0`.
    pub fn uniform(cfg: &SystemConfig, n: usize, w0: f64) -> Result<Self> {
        Self::new(cfg, vec![w0; n])
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn arrivals(&self) -> &[u64] {
        &self.arrivals
    }

    /// Sum of all jump displacements so far.
    pub fn displacement(&self) -> f64 {
        self.displacement
    }

    fn left(&self) -> f64 {
        self.frame.lower()
    }

    pub fn position(&self, i: usize) -> f64 {
        drift(
            self.positions[i],
            self.clock - self.stamps[i],
            self.speed,
            self.left(),
        )
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.position(i)).collect()
    }

    /// Moves the clock without arrivals.
    pub fn advance(&mut self, dt: f64) {
        debug_assert!(dt >= 0.0);
        self.clock += dt;
    }

    /// Applies an arrival event.
    pub fn apply(&mut self, ev: &Event) -> Result<()> {
        self.clock += ev.dt;
        let d = ev.selected.len();
        self.old.clear();
        for &i in &ev.selected {
            let w = self.position(i);
            self.old.push(w);
        }
        if self.busy_since.is_some() {
            for &i in &ev.selected {
                self.busy_time += self.pending_busy(i);
            }
        }
        self.new.resize(d, 0.0);
        coc_jump_into(
            &self.old,
            &ev.sizes,
            self.ks[ev.class],
            self.frame.upper(),
            &mut self.scratch,
            &mut self.new,
        )?;
        for (slot, &i) in ev.selected.iter().enumerate() {
            self.displacement += self.new[slot] - self.old[slot];
            self.positions[i] = self.new[slot];
            self.stamps[i] = self.clock;
        }
        self.arrivals[ev.class] += 1;
        Ok(())
    }

    /// Draws and applies one arrival.
    pub fn step<R: Rng + ?Sized>(&mut self, events: &mut EventStream, rng: &mut R) -> Result<()> {
        let ev = events.draw(rng);
        self.apply(&ev)
    }

    /// Starts accumulating time spent strictly right of the left boundary.
    pub fn start_busy_window(&mut self) {
        self.busy_since = Some(self.clock);
        self.busy_time = 0.0;
    }

    /// Busy time of particle `i` since its last update, within the window.
    fn pending_busy(&self, i: usize) -> f64 {
        let start = self.busy_since.unwrap_or(self.clock);
        let (w, s) = (self.positions[i], self.stamps[i]);
        let a = self.left();
        let lo = s.max(start);
        let hi = if w <= a {
            return 0.0;
        } else if self.speed > 0.0 {
            self.clock.min(s + (w - a) / self.speed)
        } else {
            self.clock
        };
        (hi - lo).max(0.0)
    }

    /// Time-averaged fraction of particles strictly right of the left
    /// boundary since [`SimState::start_busy_window`].
    pub fn busy_fraction(&self) -> Option<f64> {
        let start = self.busy_since?;
        let span = self.clock - start;
        if span <= 0.0 {
            return None;
        }
        let pending: f64 = (0..self.n()).map(|i| self.pending_busy(i)).sum();
        Some((self.busy_time + pending) / (span * self.n() as f64))
    }

    /// Total busy particle-time accumulated in the current window.
    pub fn busy_time(&self) -> f64 {
        self.busy_time + (0..self.n()).map(|i| self.pending_busy(i)).sum::<f64>()
    }
}
