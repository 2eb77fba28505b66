//! Deterministic stream-splitting randomness.
//!
//! Every random quantity of a scenario (topology, initial states, per-round
//! fading coefficients, symbol phases, receiver noise) is drawn from its own
//! ChaCha stream addressed by a [`StreamKey`]. ChaCha is a counter-based
//! generator, so streams derived from the same 64-bit seed never overlap and
//! the draw for iteration `k` at receiver `i` does not depend on evaluation
//! order, worker scheduling or how many values other streams consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Address of one independent draw stream within a seeded scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKey {
    /// Random topology construction.
    Topology,
    /// Uniform initial-state vector.
    InitialStates,
    /// Real fading coefficients seen by `receiver` at one iteration.
    FadingRound { iteration: u64, receiver: u32 },
    /// Complex channel coefficients seen by `receiver` at one iteration.
    ComplexRound { iteration: u64, receiver: u32 },
    /// Baseband symbol phases and receiver noise for one receiver round.
    BasebandRound { iteration: u64, receiver: u32 },
    /// Noise injection for the nomographic pipeline demo.
    NomographicDemo { index: u64 },
}

impl StreamKey {
    fn stream_id(self) -> u64 {
        let (tag, receiver, iteration) = match self {
            StreamKey::Topology => (0u64, 0, 0),
            StreamKey::InitialStates => (1, 0, 0),
            StreamKey::FadingRound { iteration, receiver } => (2, receiver, iteration),
            StreamKey::ComplexRound { iteration, receiver } => (3, receiver, iteration),
            StreamKey::BasebandRound { iteration, receiver } => (4, receiver, iteration),
            StreamKey::NomographicDemo { index } => (5, 0, index),
        };
        debug_assert!(iteration < 1 << 40, "iteration index exceeds stream space");
        debug_assert!(receiver < 1 << 20, "receiver id exceeds stream space");
        (tag << 60) | (u64::from(receiver) << 40) | (iteration & 0xFF_FFFF_FFFF)
    }
}

/// Splits one 64-bit scenario seed into independent ChaCha streams.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = split_mix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    /// A fresh generator positioned at the start of the addressed stream.
    pub fn stream(&self, key: StreamKey) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(key.stream_id());
        rng
    }
}

/// Child seed for an indexed batch trial, e.g. `(base_seed, n, trial)`.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut state = split_mix(base ^ 0x9E37_79B9_7F4A_7C15);
    state = split_mix(state ^ a.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    split_mix(state ^ b.wrapping_mul(0x94D0_49BB_1331_11EB))
}

fn split_mix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
