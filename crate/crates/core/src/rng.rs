//! Seed derivation. Every random phase draws from its own ChaCha stream
//! derived from one root seed, so adding a phase never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mix a root seed with a phase label (FNV-1a followed by a splitmix64 finalizer).
pub fn phase_seed(root: u64, phase: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in phase.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn phase_rng(root: u64, phase: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(phase_seed(root, phase))
}
