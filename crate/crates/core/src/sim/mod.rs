//! Event-driven simulation of the `n`-particle system.

mod estimate;
mod jump;
mod state;
mod stats;

pub use estimate::{
    estimate_vn, simulate_path, stationary_sample, PathRow, RateEstimate, StationaryOptions,
    StationarySample, VelocityEstimate, DEFAULT_BATCHES,
};
pub use jump::{coc_jump, coc_jump_into};
pub use state::{drift, Event, EventStream, SimState};
pub use stats::{batch_means, linear_trend, Estimate, Trend};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `replica` of the generator seeded by `seed`; adding
/// replicas never perturbs existing streams.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
