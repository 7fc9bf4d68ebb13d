//! Model configuration: job classes, size laws, frames.

pub mod component;
pub mod config;
pub mod dist;

pub use component::{ComponentModel, NamedSampler, WeightedModel};
pub use config::{
    marginal_h, mixture_marginal, reduce_system, subclass_weight, validate_config, ConfigFlags,
    Frame, JobClass, SystemConfig, ValidatedConfig, SPEC_VERSION,
};
pub use dist::{ScalarDist, WeightedDist};
