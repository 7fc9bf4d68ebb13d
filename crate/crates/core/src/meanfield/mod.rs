//! Deterministic mean-field numerics: the crossing functional, relaxation
//! of the mean-field dynamics and traveling-wave fixed points.

mod beta;
mod defp;
mod dmono;
mod h;
mod kernel;
mod opfp;
mod regulated;
mod relax;
mod result;
mod speed;

pub use beta::beta_solve;
pub use defp::{defp_integrate, DefpOptions};
pub use dmono::{d_monotonicity_check, DMonotonicityReport, DisplacementPoint};
pub use h::{compute_h, compute_h_mc};
pub use kernel::{HOperator, HSweep};
pub use opfp::opfp_apply;
pub use regulated::{
    left_regulated_fp, load_curve, median_speed_estimate, right_regulated_fp, truncate_fixed_point,
    MedianSpeedEstimate, RegulatedOptions,
};
pub use relax::{ml_integrate, ml_mfp, two_sided_fp, RelaxOptions, Trajectory};
pub use result::{Classification, FixedPointResult, FixedPointSummary, GridSpec};
pub use speed::{free_fp, speed_range, wave_flux_identity, SpeedProbe, SpeedRange};
