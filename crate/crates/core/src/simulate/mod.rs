//! Seeded generators for the heavy-tailed and heteroskedastic VAR processes.

mod dgp;
mod er;
mod noise;

pub use dgp::{
    ar_companion, bekk_covariance, psd_sqrt, rc_second_moment, simulate, simulate_companion,
    simulate_retrying, stability, DgpKind, DgpSpec, RegionOracle, Regions, DEFAULT_BURN_IN,
};
pub use er::{gen_er_transition, gen_er_transition_with, EdgeWeights};
pub use noise::{sample_noise, NoiseSampler, NoiseSpec};

#[cfg(test)]
mod tests;
