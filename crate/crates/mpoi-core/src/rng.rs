//! Seed derivation for reproducible experiments.
//!
//! Every Markov system in a run draws from its own ChaCha stream keyed by
//! (master seed, run id, system id), so per-system trajectories replay
//! identically no matter how a strategy interleaves its advances.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids above this offset are reserved for non-system consumers
/// (OCRS coins, playout coins) so they never collide with system streams.
const AUX_STREAM_OFFSET: u64 = 1 << 32;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-run base seed derived from the master seed.
pub fn run_seed(master_seed: u64, run_id: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run_id.wrapping_add(1)))
}

/// Independent generator for one Markov system within one run.
pub fn system_rng(master_seed: u64, run_id: u64, system_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(master_seed, run_id));
    rng.set_stream(system_id as u64);
    rng
}

/// Generator for auxiliary coins (OCRS decisions, playout gates) of one run.
pub fn aux_rng(master_seed: u64, run_id: u64, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(master_seed, run_id));
    rng.set_stream(AUX_STREAM_OFFSET + channel);
    rng
}
