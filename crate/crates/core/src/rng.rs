//! Seed derivation for independent, reproducible random streams.
//!
//! Every worker gets its own generator seeded from `(master_seed, stream)`, so
//! results never depend on which thread ran which part.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids reserved for pipeline stages that share a master seed.
pub mod stream {
    pub const PILOT: u64 = 0x0C0E_5EED;
    pub const MERGE_KEEP: u64 = 0x4B45_4550;
    pub const MERGE_SHUFFLE: u64 = 0x5348_5546;
    pub const PROBES: u64 = 0x5052_4F42;
    pub const MERGE_WEIGHTED: u64 = 0x5745_4947;
    pub const MERGE_REUSE: u64 = 0x5245_5553;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed and a stream id into a child seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream_rng(master: u64, stream: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, stream))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
