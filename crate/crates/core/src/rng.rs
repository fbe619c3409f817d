//! Counter-based random substreams: every (seed, tag, index, slot) gets its own
//! ChaCha8 stream, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_CIRCUIT: u64 = 1;
pub const TAG_PSEUDOSPECTRUM: u64 = 2;

pub fn substream(seed: u64, tag: u64, index: u64, slot: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(slot);
    rng
}
