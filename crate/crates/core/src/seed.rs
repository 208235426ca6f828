//! Deterministic seed derivation.
//!
//! Every random stream in the library is addressed by `(master, role, index)`.
//! The child seed is computed as
//!
//! ```text
//! h   = fnv1a64(role)
//! s   = splitmix64(master ^ splitmix64(h))
//! out = splitmix64(s ^ splitmix64(index + 0x9E37_79B9_7F4A_7C15))
//! ```
//!
//! so that trial `i` of role `r` always receives the same stream regardless
//! of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG used for every stream in the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Child seed for `(master, role, index)`.
pub fn child_seed(master: u64, role: &str, index: u64) -> u64 {
    let s = splitmix64(master ^ splitmix64(fnv1a64(role.as_bytes())));
    splitmix64(s ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// RNG for a derived stream.
pub fn stream(master: u64, role: &str) -> Rng {
    Rng::seed_from_u64(child_seed(master, role, 0))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
