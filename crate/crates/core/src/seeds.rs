//! Deterministic RNG derivation: one master seed, independent streams
//! per (stage, index) so pipeline steps never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STAGE_PAIRS: u64 = 1;
pub const STAGE_TRAIN: u64 = 2;
pub const STAGE_BENCH_SEEDS: u64 = 3;
pub const STAGE_BENCH_VARIANTS: u64 = 4;
pub const STAGE_BENCH_QUERIES: u64 = 5;
pub const STAGE_BENCH_COMPLETION: u64 = 6;
pub const STAGE_INIT: u64 = 7;

pub fn derive(seed: u64, stage: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 48) ^ index);
    rng
}
