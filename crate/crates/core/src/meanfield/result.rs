use serde::{Deserialize, Serialize};

use crate::field::TailField;

/// Shape of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    /// Decreases to zero at the finite point `w_star`.
    HitAxis { w_star: f64 },
    /// Proper on both sides, without regulation.
    ProperFree,
    /// Levels off at `eps_star > 0` on the right.
    ImproperRight { eps_star: f64 },
    /// Atom of size `1 - load` at the left boundary.
    LeftRegulated { load: f64 },
    /// Regulated on both sides of a finite frame.
    TwoSided,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::HitAxis { .. } => "HIT_AXIS",
            Classification::ProperFree => "PROPER_FREE",
            Classification::ImproperRight { .. } => "IMPROPER_RIGHT",
            Classification::LeftRegulated { .. } => "LEFT_REGULATED",
            Classification::TwoSided => "TWO_SIDED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: f64,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub field: TailField,
    pub v: f64,
    pub classification: Classification,
    /// Value at the left boundary of a left-regulated frame.
    pub load: Option<f64>,
    /// `sup |v x' + lambda h|` over the grid interior, in the discrete form
    /// solved by the integrator.
    pub residual: f64,
    pub beta_used: Option<f64>,
    pub grid: GridSpec,
}

/// JSON sidecar written next to a fixed-point CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSummary {
    pub v: f64,
    pub classification: Classification,
    pub load: Option<f64>,
    pub residual: f64,
    pub beta: Option<f64>,
    pub grid: GridSpec,
}

impl FixedPointResult {
    pub fn summary(&self) -> FixedPointSummary {
        FixedPointSummary {
            v: self.v,
            classification: self.classification,
            load: self.load,
            residual: self.residual,
            beta: self.beta_used,
            grid: self.grid,
        }
    }
}
