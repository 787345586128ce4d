//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! generator keyed by `(seed, domain)` and positioned on a `stream`, so
//! independent consumers (per-sample augmentation, mini-batch shuffling,
//! start-set sampling, ...) never share or perturb each other's sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Consumers of randomness. The discriminant is part of the generator key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    Dataset = 2,
    DatasetCenters = 3,
    StartSet = 4,
    LabeledBatches = 5,
    UnlabeledBatches = 6,
    TrainAugment = 7,
    ScoreAugment = 8,
    Uniform = 9,
    Split = 10,
    Verify = 11,
}

pub fn rng_for(seed: u64, domain: Domain, stream: u64) -> Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Mixes a sub-seed out of `(seed, salt)` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
