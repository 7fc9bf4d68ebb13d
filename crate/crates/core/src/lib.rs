//! Particle systems with cancel-on-completion redundancy: an exact
//! event-driven simulator, mean-field fixed-point (traveling wave) solvers
//! and the experiment harness that checks one against the other.
//!
//! Locations are workloads: a job of class `j` selects `d_j` particles,
//! each gets a component of random size, and once `k_j` components finish
//! the rest are canceled. Between arrivals particles drift left at speed
//! `v` inside a frame `[A, B]`.

// `!(x > 0.0)` is how NaN gets rejected along with the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod harness;
pub mod meanfield;
pub mod model;
pub mod numeric;
pub mod sim;

pub use error::{Error, ErrorCode, Result};
pub use field::{levy_distance, Mode, TailField};
pub use model::{validate_config, ComponentModel, Frame, JobClass, ScalarDist, SystemConfig};
