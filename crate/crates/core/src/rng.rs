//! Named, reproducible random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, a stream label and indices.
pub fn derive_seed(seed: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for b in label.bytes() {
        h = splitmix(h ^ b as u64);
    }
    for i in indices {
        h = splitmix(h ^ i.wrapping_mul(0x2545_F491_4F6C_DD1D));
    }
    h
}

pub fn stream(seed: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, indices))
}
