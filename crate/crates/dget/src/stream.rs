//! Keyed deterministic RNG streams.
//!
//! All randomness in a run is drawn from ChaCha streams keyed by
//! `(master seed, domain, node, iteration)`. Distinct keys map to distinct
//! 256-bit seeds, so streams never collide and per-node work can be
//! scheduled in any order (or in parallel) without changing a single draw.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain separators for the independent stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Problem data generation: one stream per node, fixed at construction.
    Data,
    /// Minibatch index selection and online sample draws: one stream per
    /// (node, iteration).
    Sampling,
}

const fn domain_tag(domain: StreamDomain) -> u64 {
    match domain {
        StreamDomain::Data => 0x4441_5441,
        StreamDomain::Sampling => 0x5341_4d50,
    }
}

/// splitmix64 finalizer; a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, domain, node, iteration)`.
///
/// Each key word is mixed independently into its own 8-byte slot of the
/// ChaCha seed, so the key-to-seed map is injective.
pub fn keyed_rng(seed: u64, domain: StreamDomain, node: u64, iteration: u64) -> ChaCha8Rng {
    let words = [
        mix(seed),
        mix(domain_tag(domain)),
        mix(node),
        mix(iteration),
    ];
    let mut bytes = [0u8; 32];
    for (slot, word) in words.iter().enumerate() {
        bytes[slot * 8..(slot + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
