//! Seed derivation.
//!
//! Every simulated day owns a ChaCha8 stream: the key comes from the panel
//! seed and the stream id is the day index (burn-in days included). Draws
//! within a day are consumed in intraday order, so `(seed, day, intraday
//! index)` fixes each value independently of how replications are scheduled.
//! Replication seeds are `splitmix64(master ^ splitmix64(index + GOLDEN))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(GOLDEN)))
}

/// Source of per-day generators for one panel seed.
#[derive(Debug, Clone)]
pub struct DayStreams {
    base: ChaCha8Rng,
}

impl DayStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn day(&self, day: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(day);
        rng.set_word_pos(0);
        rng
    }
}
