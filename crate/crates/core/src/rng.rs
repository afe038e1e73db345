//! Counter-based random streams.
//!
//! Every random draw is addressed by `(seed, sample, slot)`: the ChaCha
//! stream id is the sample index and each slot owns a disjoint window of
//! `2^40` words of the keystream. Results therefore do not depend on the
//! order in which samples are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream reserved for each slot.
const SLOT_SHIFT: u32 = 40;

/// Slot used for the jump count.
pub const COUNT_SLOT: u64 = 0;

/// Slot used for the `j`-th jump (`j ≥ 1`).
pub fn jump_slot(j: usize) -> u64 {
    j as u64
}

/// Slot used for the jump times of a path with `m` jumps.
pub fn times_slot(m: usize) -> u64 {
    m as u64 + 1
}

/// Generator positioned at the start of `slot` for `sample`.
pub fn stream(seed: u64, sample: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng.set_word_pos((slot as u128) << SLOT_SHIFT);
    rng
}
