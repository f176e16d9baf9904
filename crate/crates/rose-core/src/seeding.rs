//! Splittable deterministic random streams.
//!
//! Every stochastic component (data generation, Byzantine selection, attack
//! noise, synthesized reports) draws from a ChaCha stream derived from the
//! experiment seed and a list of integer tags by a splitmix64 chain, so
//! replays are identical regardless of worker scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; combined with the base seed and indices such as replication
/// or machine id.
pub mod tags {
    pub const REPLICATION: u64 = 0x5245504c; // "REPL"
    pub const DATA: u64 = 0x44415441; // "DATA"
    pub const BYZANTINE_SET: u64 = 0x42595a53; // "BYZS"
    pub const DATA_ATTACK: u64 = 0x41545444; // "ATTD"
    pub const STATISTIC_ATTACK: u64 = 0x41545453; // "ATTS"
    pub const SYNTH_REPORT: u64 = 0x53594e54; // "SYNT"
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with an ordered list of tags into a single stream seed.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(seed);
    for &part in parts {
        s = splitmix64(s ^ splitmix64(part));
    }
    s
}

/// Deterministic generator for the stream identified by `(seed, parts)`.
pub fn stream_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, parts))
}
