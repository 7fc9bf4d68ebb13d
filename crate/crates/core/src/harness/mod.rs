//! Experiment orchestration: specs, seeded replica fan-out over a worker
//! pool, theory-vs-simulation reports and their data files.

mod emit;
mod run;
mod spec;

pub use emit::{emit, read_cells, read_report};
pub use run::{
    run_experiment, run_load_curve, run_phi1_bound, run_speed_range_report, run_ssai_left,
    run_ssai_right, run_vn_convergence,
};
pub use spec::{
    config_hash, Assertion, Cell, ConfigSource, ExperimentKind, ExperimentReport, ExperimentSpec,
    NamedField, Provenance,
};
