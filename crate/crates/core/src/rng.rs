//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 keystream selected by `(seed, trajectory,
//! slot)`: the seed keys the cipher, the trajectory index and slot pick the
//! stream number. Slot 0 drives the counting jump decisions, slots 1 and 2 the
//! Wiener increments of the one- and two-photon homodyne channels. Each draw
//! consumes a fixed number of words, so the `k`-th value of a stream depends
//! only on `k`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Channel;

const SLOTS_PER_TRAJECTORY: u64 = 4;
/// ChaCha words (u32) consumed per Gaussian draw.
const WORDS_PER_NORMAL: u128 = 4;

pub const COUNTING_SLOT: u64 = 0;

pub fn stream(seed: u64, trajectory: u64, slot: u64) -> ChaCha8Rng {
    debug_assert!(slot < SLOTS_PER_TRAJECTORY);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory.wrapping_mul(SLOTS_PER_TRAJECTORY).wrapping_add(slot));
    rng
}

/// Uniform on `[0, 1)` from one 64-bit word.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by the Box–Muller transform; always consumes two `u64`.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Per-channel Wiener increments `dW ~ N(0, dt)` for one trajectory.
pub struct WienerStream {
    seed: u64,
    trajectory: u64,
    dt: f64,
    sqrt_dt: f64,
    one_photon: ChaCha8Rng,
    two_photon: ChaCha8Rng,
}

impl WienerStream {
    pub fn new(seed: u64, trajectory: u64, dt: f64) -> Self {
        WienerStream {
            seed,
            trajectory,
            dt,
            sqrt_dt: dt.sqrt(),
            one_photon: stream(seed, trajectory, Channel::OnePhoton.index()),
            two_photon: stream(seed, trajectory, Channel::TwoPhoton.index()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory(&self) -> u64 {
        self.trajectory
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Next increment of each channel, `[dW_1ph, dW_2ph]`.
    pub fn next_increments(&mut self) -> [f64; 2] {
        [
            standard_normal(&mut self.one_photon) * self.sqrt_dt,
            standard_normal(&mut self.two_photon) * self.sqrt_dt,
        ]
    }

    /// Increment of `channel` at `step` without generating the ones before it.
    pub fn increment_at(seed: u64, trajectory: u64, channel: Channel, step: u64, dt: f64) -> f64 {
        let mut rng = stream(seed, trajectory, channel.index());
        rng.set_word_pos(step as u128 * WORDS_PER_NORMAL);
        standard_normal(&mut rng) * dt.sqrt()
    }
}
