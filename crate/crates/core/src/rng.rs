//! Seeded generator fan-out.
//!
//! Every stochastic component draws from its own ChaCha stream derived from a
//! single master seed, so disabling one component never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent random streams used by the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    Channel = 2,
    Sae = 3,
    Asa = 4,
    Replay = 5,
    PolicyInit = 6,
    Baseline = 7,
    Oracle = 8,
    WeightShift = 9,
}

/// Generator for `stream` under `master`.
pub fn stream(master: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng
}

/// Generator for a numbered sub-stream, e.g. one per epoch.
pub fn substream(master: u64, stream: Stream, index: u64) -> Rng {
    let mut rng =
        ChaCha8Rng::seed_from_u64(master ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
