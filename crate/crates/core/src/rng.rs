//! Counter-based per-trial randomness.
//!
//! Every trial gets its own generator, positioned by `(seed, stream, trial_index)`
//! alone. A ChaCha8 key is expanded from the seed, the ChaCha stream id is the run
//! stream, and the block counter starts at the trial index, so no state is carried
//! from one trial to the next and the draw for a trial does not depend on which
//! worker evaluates it or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// 32-bit words in one ChaCha block; one block is reserved per trial.
const WORDS_PER_TRIAL: u128 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RunSeed {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RunSeed { seed, stream }
    }

    /// A derived stream for a sub-experiment (e.g. one setting pair).
    pub fn fork(self, lane: u64) -> RunSeed {
        let mut state = self.stream ^ lane.wrapping_mul(0xA076_1D64_78BD_642F);
        RunSeed {
            seed: self.seed,
            stream: splitmix64(&mut state) ^ lane,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The random source for one trial. Supplies at least 8 independent `u64`s
/// before running into the next trial's block.
#[derive(Debug, Clone)]
pub struct TrialRng(ChaCha8Rng);

impl TrialRng {
    /// Uniform deviate in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for TrialRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

pub fn trial_rng(seed: RunSeed, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::from_seed(expand_key(seed.seed));
    rng.set_stream(seed.stream);
    rng.set_word_pos(trial_index as u128 * WORDS_PER_TRIAL);
    TrialRng(rng)
}
