//! Seeded random streams and their byte-exact serialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The generator used everywhere randomness enters a run.
pub type Rng = ChaCha8Rng;

/// Independent stream for a given seed.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes two words into a derived seed (splitmix64 finalizer).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const STATE_BYTES: usize = 32 + 8 + 16;

/// Seed, stream and word position, little-endian.
pub fn to_bytes(rng: &Rng) -> [u8; STATE_BYTES] {
    let mut out = [0u8; STATE_BYTES];
    out[..32].copy_from_slice(&rng.get_seed());
    out[32..40].copy_from_slice(&rng.get_stream().to_le_bytes());
    out[40..].copy_from_slice(&rng.get_word_pos().to_le_bytes());
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Rng> {
    if bytes.len() != STATE_BYTES {
        return Err(Error::Format(format!(
            "rng state needs {STATE_BYTES} bytes, got {}",
            bytes.len()
        )));
    }
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&bytes[..32]);
    let mut rng = Rng::from_seed(seed);
    rng.set_stream(u64::from_le_bytes(bytes[32..40].try_into().unwrap()));
    rng.set_word_pos(u128::from_le_bytes(bytes[40..].try_into().unwrap()));
    Ok(rng)
}
